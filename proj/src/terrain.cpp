#include "pmfsm/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pmfsm/rng.hpp"

namespace pmfsm {

std::size_t Terrain::segment_at(double x) const {
  auto it = std::upper_bound(steps.begin(), steps.end(), x,
                             [](double value, const TerrainStep& s) { return value < s.start_x; });
  if (it == steps.begin()) return 0;
  return static_cast<std::size_t>(std::distance(steps.begin(), it) - 1);
}

double Terrain::height_at(double x) const { return steps[segment_at(x)].height; }

void Terrain::validate() const {
  if (steps.empty()) throw std::invalid_argument("terrain needs at least one step");
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (!(steps[i].start_x > steps[i - 1].start_x))
      throw std::invalid_argument("terrain step positions must be strictly increasing");
  }
  if (!(friction >= 0.0)) throw std::invalid_argument("terrain friction must be non-negative");
}

Terrain flat_terrain(double length, double friction) {
  Terrain t;
  t.friction = friction;
  t.length = length;
  return t;
}

Terrain make_stairs(std::uint64_t seed, const StairsConfig& config) {
  if (config.max_step_length <= 0.0 || config.stair_zone_length < 0.0 || config.approach_length < 0.0 ||
      config.exit_length < 0.0 || config.max_altitude_change < 0.0)
    throw std::invalid_argument("stairs configuration bounds must be positive");
  Rng rng(derive_seed({seed, 0x57a1u}));
  Terrain t;
  t.friction = config.friction;
  t.steps = {{0.0, 0.0}};
  const double min_len = std::min(config.min_step_length, config.max_step_length);
  const double zone_end = config.approach_length + config.stair_zone_length;
  double x = config.approach_length;
  double h = 0.0;
  while (x < zone_end) {
    const double dh = uniform(rng, -config.max_altitude_change, config.max_altitude_change);
    const double len = uniform(rng, min_len, config.max_step_length);
    if (config.max_altitude_change > 0.0) {
      h += dh;
      t.steps.push_back({x, h});
    }
    x += len;
  }
  // The exit zone continues at the last stair height.
  t.length = zone_end + config.exit_length;
  return t;
}

void write_terrain(std::ostream& out, const Terrain& terrain) {
  out.precision(17);
  out << "friction " << terrain.friction << '\n';
  out << "length " << terrain.length << '\n';
  for (const auto& s : terrain.steps) out << s.start_x << ' ' << s.height << '\n';
}

Terrain read_terrain(std::istream& in) {
  Terrain t;
  t.steps.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string head;
    if (!(ss >> head)) continue;
    if (head == "friction") {
      ss >> t.friction;
    } else if (head == "length") {
      ss >> t.length;
    } else {
      TerrainStep s;
      s.start_x = std::stod(head);
      if (!(ss >> s.height)) throw std::runtime_error("terrain line missing height: " + line);
      t.steps.push_back(s);
    }
  }
  if (t.steps.empty()) t.steps.push_back({0.0, 0.0});
  t.validate();
  return t;
}

Eigen::Vector3d PerturbationSchedule::force_at(double t) const {
  // Events are sorted by start time; the most recently started one wins so
  // overlapping events never exceed the per-event bounds.
  Eigen::Vector3d f = Eigen::Vector3d::Zero();
  for (const auto& e : events) {
    if (t >= e.start_time && t < e.start_time + e.duration) f = e.force;
  }
  return f;
}

PerturbationSchedule make_perturbations(std::uint64_t seed, double episode_seconds, const PerturbationConfig& config) {
  PerturbationSchedule schedule;
  if (!config.enabled || episode_seconds <= 0.0) return schedule;
  Rng rng(derive_seed({seed, 0x9e27u}));
  std::poisson_distribution<int> count_dist(config.mean_events);
  const int count = count_dist(rng);
  for (int i = 0; i < count; ++i) {
    Perturbation p;
    p.start_time = uniform(rng, 0.0, std::max(0.0, episode_seconds - config.event_duration));
    p.duration = config.event_duration;
    const double heading = uniform(rng, -M_PI, M_PI);
    const double horizontal = uniform(rng, 0.0, config.max_horizontal);
    p.force = {horizontal * std::cos(heading), horizontal * std::sin(heading),
               uniform(rng, -config.max_vertical, config.max_vertical)};
    schedule.events.push_back(p);
  }
  std::sort(schedule.events.begin(), schedule.events.end(),
            [](const Perturbation& a, const Perturbation& b) { return a.start_time < b.start_time; });
  return schedule;
}

}  // namespace pmfsm
