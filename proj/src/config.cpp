#include "pmfsm/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace pmfsm {

namespace {

namespace pt = boost::property_tree;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" + text + "'");
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': integer out of range");
  }
}

int parse_int(const std::string& key, const std::string& text) {
  const std::uint64_t v = parse_uint(key, text);
  if (v > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) throw ConfigError("'" + key + "': too large");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + text + "'");
}

/// One entry per key: reader and writer bound to a field of RunConfig.
struct Binding {
  std::function<void(RunConfig&, const std::string&, const std::string&)> read;
  std::function<std::string(const RunConfig&)> write;
};

using Bindings = std::vector<std::pair<std::string, Binding>>;

template <typename Get>
Binding real(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_double(k, v); },
          [get](const RunConfig& c) { return format_double(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Binding integer(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_int(k, v); },
          [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Binding flag(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_bool(k, v); },
          [get](const RunConfig& c) { return std::string(get(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

#define PMFSM_REAL(expr) real([](RunConfig& c) -> double& { return expr; })
#define PMFSM_INT(expr) integer([](RunConfig& c) -> int& { return expr; })
#define PMFSM_FLAG(expr) flag([](RunConfig& c) -> bool& { return expr; })

const Bindings& bindings() {
  static const Bindings table = [] {
    Bindings b;
    auto add = [&](std::string key, Binding binding) { b.emplace_back(std::move(key), std::move(binding)); };

    add("sim.mass", PMFSM_REAL(c.env.sim.mass));
    add("sim.inertia_x", PMFSM_REAL(c.env.sim.inertia.x()));
    add("sim.inertia_y", PMFSM_REAL(c.env.sim.inertia.y()));
    add("sim.inertia_z", PMFSM_REAL(c.env.sim.inertia.z()));
    add("sim.gravity", PMFSM_REAL(c.env.sim.gravity));
    add("sim.control_dt", PMFSM_REAL(c.env.sim.control_dt));
    add("sim.substeps", PMFSM_INT(c.env.sim.substeps));
    add("sim.kp", PMFSM_REAL(c.env.sim.kp));
    add("sim.kd", PMFSM_REAL(c.env.sim.kd));
    add("sim.tau_max", PMFSM_REAL(c.env.sim.tau_max));
    add("sim.actuator_time_constant", PMFSM_REAL(c.env.sim.actuator_time_constant));
    add("sim.max_joint_velocity", PMFSM_REAL(c.env.sim.max_joint_velocity));
    add("sim.contact_stiffness", PMFSM_REAL(c.env.sim.contact_stiffness));
    add("sim.contact_damping", PMFSM_REAL(c.env.sim.contact_damping));
    add("sim.tangential_stiffness", PMFSM_REAL(c.env.sim.tangential_stiffness));
    add("sim.tangential_damping", PMFSM_REAL(c.env.sim.tangential_damping));
    add("sim.episode_seconds", PMFSM_REAL(c.env.episode_seconds));

    add("geometry.l_upper", PMFSM_REAL(c.env.geometry.l_upper));
    add("geometry.l_lower", PMFSM_REAL(c.env.geometry.l_lower));
    add("geometry.hip_min", PMFSM_REAL(c.env.geometry.hip_limits.lo));
    add("geometry.hip_max", PMFSM_REAL(c.env.geometry.hip_limits.hi));
    add("geometry.knee_min", PMFSM_REAL(c.env.geometry.knee_limits.lo));
    add("geometry.knee_max", PMFSM_REAL(c.env.geometry.knee_limits.hi));
    add("geometry.hip_offset_x", PMFSM_REAL(c.env.geometry.hip_offsets[0].x()));
    add("geometry.hip_offset_y", PMFSM_REAL(c.env.geometry.hip_offsets[0].y()));
    add("geometry.stance_hip", PMFSM_REAL(c.env.geometry.default_stance.hip));
    add("geometry.stance_knee", PMFSM_REAL(c.env.geometry.default_stance.knee));
    add("geometry.retraction_offset", PMFSM_REAL(c.env.geometry.retraction_offset));
    add("geometry.touchdown_depth", PMFSM_REAL(c.env.geometry.touchdown_depth));

    add("timing.delta_tol", PMFSM_REAL(c.env.fsm.timing.delta_tol));
    add("timing.tau_s1", PMFSM_REAL(c.env.fsm.timing.tau.s1));
    add("timing.tau_s2", PMFSM_REAL(c.env.fsm.timing.tau.s2));
    add("timing.tau_s3", PMFSM_REAL(c.env.fsm.timing.tau.s3));
    add("timing.watchdog_cycles", PMFSM_REAL(c.env.fsm.watchdog_cycles));

    add("reflex.lift_fraction", PMFSM_REAL(c.env.fsm.reflex.lift_fraction));
    add("reflex.crouch_delta", PMFSM_REAL(c.env.fsm.reflex.crouch_delta));
    add("reflex.extend_fraction", PMFSM_REAL(c.env.fsm.reflex.extend_fraction));

    add("ranges.f_min", PMFSM_REAL(c.ranges.f.lo));
    add("ranges.f_max", PMFSM_REAL(c.ranges.f.hi));
    add("ranges.A_min", PMFSM_REAL(c.ranges.A.lo));
    add("ranges.A_max", PMFSM_REAL(c.ranges.A.hi));
    add("ranges.h_min", PMFSM_REAL(c.ranges.h.lo));
    add("ranges.h_max", PMFSM_REAL(c.ranges.h.hi));
    add("ranges.u_fb_scale", PMFSM_REAL(c.ranges.u_fb_scale));

    add("reward.v_max", PMFSM_REAL(c.env.reward.v_max));
    add("reward.c_tau", PMFSM_REAL(c.env.reward.c_tau));
    add("reward.done_penalty", PMFSM_REAL(c.env.reward.done_penalty));

    add("fall.height_fraction", PMFSM_REAL(c.env.fall.height_fraction));
    add("fall.max_tilt", PMFSM_REAL(c.env.fall.max_tilt));

    add("velocity.min", PMFSM_REAL(c.env.velocity.lo));
    add("velocity.max", PMFSM_REAL(c.env.velocity.hi));
    add("velocity.fixed", PMFSM_REAL(c.env.velocity.fixed));

    add("stairs.max_altitude_change", PMFSM_REAL(c.env.stairs.max_altitude_change));
    add("stairs.max_step_length", PMFSM_REAL(c.env.stairs.max_step_length));
    add("stairs.min_step_length", PMFSM_REAL(c.env.stairs.min_step_length));
    add("stairs.approach_length", PMFSM_REAL(c.env.stairs.approach_length));
    add("stairs.stair_zone_length", PMFSM_REAL(c.env.stairs.stair_zone_length));
    add("stairs.exit_length", PMFSM_REAL(c.env.stairs.exit_length));
    add("stairs.friction", PMFSM_REAL(c.env.stairs.friction));

    add("test_perturbations.enabled", PMFSM_FLAG(c.env.test_perturbations.enabled));
    add("test_perturbations.max_horizontal", PMFSM_REAL(c.env.test_perturbations.max_horizontal));
    add("test_perturbations.max_vertical", PMFSM_REAL(c.env.test_perturbations.max_vertical));
    add("test_perturbations.mean_events", PMFSM_REAL(c.env.test_perturbations.mean_events));
    add("test_perturbations.event_duration", PMFSM_REAL(c.env.test_perturbations.event_duration));

    add("randomization.missing_step_prob", PMFSM_REAL(c.randomization.missing_step_prob));
    add("randomization.com_offset_range", PMFSM_REAL(c.randomization.com_offset_range));
    add("randomization.perturbations", PMFSM_FLAG(c.randomization.perturbations.enabled));
    add("randomization.max_horizontal", PMFSM_REAL(c.randomization.perturbations.max_horizontal));
    add("randomization.max_vertical", PMFSM_REAL(c.randomization.perturbations.max_vertical));
    add("randomization.mean_events", PMFSM_REAL(c.randomization.perturbations.mean_events));
    add("randomization.event_duration", PMFSM_REAL(c.randomization.perturbations.event_duration));

    add("ars.step_size", PMFSM_REAL(c.ars.step_size));
    add("ars.exploration_std", PMFSM_REAL(c.ars.exploration_std));
    add("ars.num_directions", PMFSM_INT(c.ars.num_directions));
    add("ars.top_directions", PMFSM_INT(c.ars.top_directions));
    add("ars.rollouts_per_direction", PMFSM_INT(c.ars.rollouts_per_direction));
    add("ars.total_iterations", PMFSM_INT(c.ars.total_iterations));
    add("ars.episode_seconds", PMFSM_REAL(c.ars.episode_seconds));
    add("ars.seed", {[](RunConfig& c, const std::string& k, const std::string& v) { c.ars.seed = parse_uint(k, v); },
                     [](const RunConfig& c) { return std::to_string(c.ars.seed); }});
    add("ars.threads", PMFSM_INT(c.ars.threads));
    add("ars.eval_episodes", PMFSM_INT(c.ars.eval_episodes));

    add("experiments.num_trials", PMFSM_INT(c.experiments.num_trials));
    add("experiments.expected_distance", PMFSM_REAL(c.experiments.expected_distance));
    add("experiments.threads", PMFSM_INT(c.experiments.threads));

    add("gait.matrix", {[](RunConfig& c, const std::string&, const std::string& v) { c.gait = v; },
                        [](const RunConfig& c) { return c.gait; }});
    return b;
  }();
  return table;
}

#undef PMFSM_REAL
#undef PMFSM_INT
#undef PMFSM_FLAG

/// Mirrors the first leg's hip offset onto the others and the action ranges
/// onto the timing ranges.
void sync_derived(RunConfig& c) {
  auto& offsets = c.env.geometry.hip_offsets;
  const double x = std::abs(offsets[0].x()), y = std::abs(offsets[0].y());
  offsets[0] = {x, y, 0.0};
  offsets[1] = {x, -y, 0.0};
  offsets[2] = {-x, y, 0.0};
  offsets[3] = {-x, -y, 0.0};
  c.env.fsm.timing.dt = c.env.sim.control_dt;
  c.env.fsm.timing.f_range = c.ranges.f;
  c.env.fsm.timing.A_range = c.ranges.A;
  c.env.fsm.timing.h_range = c.ranges.h;
}

}  // namespace

GaitMatrix resolve_gait(const std::string& name, const std::string& base_dir) {
  if (name == "trot") return trot_gait();
  if (name == "stand") return stand_gait();
  if (name == "walk") return walk_gait();
  std::filesystem::path p(name);
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  try {
    return load_gait_matrix(p.string());
  } catch (const std::exception& e) {
    throw ConfigError("gait '" + name + "': " + e.what());
  }
}

void RunConfig::validate() {
  sync_derived(*this);
  env.gait = resolve_gait(gait);
  try {
    env.validate();
    randomization.validate();
    ranges.validate();
    ars.validate();
  } catch (const GaitMatrixError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (experiments.num_trials < 1) throw ConfigError("experiments.num_trials must be at least 1");
  if (!(experiments.expected_distance > 0.0)) throw ConfigError("experiments.expected_distance must be positive");
  if (experiments.threads < 1) throw ConfigError("experiments.threads must be at least 1");
}

RunConfig parse_config(std::istream& in, const std::string& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  std::map<std::string, const Binding*> index;
  for (const auto& [key, binding] : bindings()) index[key] = &binding;

  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      auto it = index.find(full);
      if (it == index.end()) throw ConfigError("unknown config key '" + full + "'");
      it->second->read(config, full, value.data());
    }
  }
  sync_derived(config);
  if (config.gait != "trot" && config.gait != "stand" && config.gait != "walk") {
    std::filesystem::path p(config.gait);
    if (p.is_relative()) config.gait = (std::filesystem::path(base_dir) / p).lexically_normal().string();
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, std::filesystem::path(path).parent_path().string());
}

std::string format_config(const RunConfig& config) {
  std::ostringstream os;
  std::string current;
  for (const auto& [key, binding] : bindings()) {
    const std::string section = key.substr(0, key.find('.'));
    if (section != current) {
      if (!current.empty()) os << '\n';
      os << '[' << section << "]\n";
      current = section;
    }
    os << key.substr(key.find('.') + 1) << " = " << binding.write(config) << '\n';
  }
  return os.str();
}

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : format_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace pmfsm
