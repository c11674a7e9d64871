#pragma once

// Piecewise-constant terrain along the forward axis and external force
// schedules applied to the torso.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pmfsm {

struct TerrainStep {
  double start_x = 0.0;
  double height = 0.0;
};

/// Heightfield h(x) = height of the last step with start_x <= x. Points
/// behind the first step use the first height. `length` is the course length
/// used to cap travel distance.
struct Terrain {
  std::vector<TerrainStep> steps{{0.0, 0.0}};
  double friction = 0.8;
  double length = 15.0;

  double height_at(double x) const;
  /// Index of the step containing x.
  std::size_t segment_at(double x) const;
  void validate() const;
};

Terrain flat_terrain(double length = 15.0, double friction = 0.8);

struct StairsConfig {
  double max_altitude_change = 0.05;  // m, per step
  double max_step_length = 1.0;       // m
  double min_step_length = 0.4;       // m
  double approach_length = 2.0;       // flat acceleration zone before the stairs
  double stair_zone_length = 9.0;
  double exit_length = 4.0;           // flat deceleration zone after the stairs
  double friction = 0.8;
};

/// Flat approach, random up/down steps with |dh| <= max_altitude_change and
/// length <= max_step_length, flat exit. Deterministic per seed.
Terrain make_stairs(std::uint64_t seed, const StairsConfig& config);

/// Terrain text format: "friction <mu>", "length <m>", then "<start_x> <height>" lines.
void write_terrain(std::ostream& out, const Terrain& terrain);
Terrain read_terrain(std::istream& in);

struct Perturbation {
  double start_time = 0.0;
  double duration = 0.0;
  Eigen::Vector3d force = Eigen::Vector3d::Zero();  // world frame, N
};

struct PerturbationSchedule {
  std::vector<Perturbation> events;

  /// Force of the most recently started event active at time t.
  Eigen::Vector3d force_at(double t) const;
};

struct PerturbationConfig {
  bool enabled = false;
  double max_horizontal = 10.0;  // N
  double max_vertical = 30.0;    // N
  double mean_events = 2.0;      // per episode, Poisson
  double event_duration = 0.2;   // s
};

/// Poisson number of events at uniform random times; horizontal direction
/// uniform, magnitudes uniform within the bounds.
PerturbationSchedule make_perturbations(std::uint64_t seed, double episode_seconds, const PerturbationConfig& config);

}  // namespace pmfsm
