#include "pmfsm/task.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "pmfsm/rng.hpp"

namespace pmfsm {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view variant_name(Variant variant) {
  switch (variant) {
    case Variant::kPmtg: return "PMTG";
    case Variant::kPmtgContact: return "PMTG-contact";
    case Variant::kPmFsm: return "PM-FSM";
    case Variant::kPmFsmReflex: return "PM-FSM-reflex";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  const std::string n = lower(name);
  for (Variant v : {Variant::kPmtg, Variant::kPmtgContact, Variant::kPmFsm, Variant::kPmFsmReflex}) {
    if (n == lower(variant_name(v))) return v;
  }
  throw std::invalid_argument("unknown variant: " + std::string(name));
}

int observation_length(Variant variant) {
  switch (variant) {
    case Variant::kPmtg: return 10;
    case Variant::kPmtgContact: return 14;
    case Variant::kPmFsm: return 12;
    case Variant::kPmFsmReflex: return 13;
  }
  return 0;
}

bool uses_fsm(Variant variant) { return variant == Variant::kPmFsm || variant == Variant::kPmFsmReflex; }

std::string_view task_name(TaskKind task) {
  switch (task) {
    case TaskKind::kVel: return "VEL";
    case TaskKind::kPer: return "PER";
    case TaskKind::kStr: return "STR";
  }
  return "?";
}

TaskKind parse_task(std::string_view name) {
  const std::string n = lower(name);
  if (n == "vel") return TaskKind::kVel;
  if (n == "per") return TaskKind::kPer;
  if (n == "str") return TaskKind::kStr;
  throw std::invalid_argument("unknown task: " + std::string(name));
}

void RewardConfig::validate() const {
  if (!(v_max > 0.0)) throw std::invalid_argument("v_max must be positive");
  if (!(c_tau >= 0.0)) throw std::invalid_argument("c_tau must be non-negative");
}

double speed_reward(double v_r, double v_t, double v_max) {
  const double e = v_r - v_t;
  return v_max * std::exp(-(e * e) / (2.0 * v_max * v_max));
}

RewardBreakdown reward(const RobotState& state, double v_t, const JointVector& torques, bool fell,
                       const RewardConfig& config) {
  RewardBreakdown r;
  r.r_speed = speed_reward(state.linear_velocity.x(), v_t, config.v_max);
  r.r_torque = -config.c_tau * torques.squaredNorm();
  r.r_done = fell ? config.done_penalty : 0.0;
  r.total = r.r_speed + r.r_torque + r.r_done;
  return r;
}

void FallConfig::validate() const {
  if (!(height_fraction >= 0.0) || !(max_tilt > 0.0)) throw std::invalid_argument("invalid fall thresholds");
}

bool is_fallen(const RobotState& state, double height_above_ground, double nominal_height, const FallConfig& config) {
  if (height_above_ground < config.height_fraction * nominal_height) return true;
  const double cos_tilt = std::clamp(state.up_axis().z(), -1.0, 1.0);
  return std::acos(cos_tilt) > config.max_tilt;
}

double VelocityProfile::at(double t) const {
  const double ramp = ramp_fraction * episode_seconds;
  if (t <= 0.0 || t >= episode_seconds) return 0.0;
  if (ramp <= 0.0) return v_target;
  if (t < ramp) return v_target * t / ramp;
  if (t > episode_seconds - ramp) return v_target * (episode_seconds - t) / ramp;
  return v_target;
}

VelocityProfile make_velocity_profile(TaskKind task, std::uint64_t seed, double episode_seconds,
                                      const VelocityRange& range) {
  VelocityProfile p;
  p.episode_seconds = episode_seconds;
  if (task == TaskKind::kVel) {
    Rng rng(derive_seed({seed, 0x7e10u}));
    p.v_target = uniform(rng, range.lo, range.hi);
  } else {
    p.v_target = range.fixed;
  }
  return p;
}

ObsVector observe(const RobotState& state, double v_t, Variant variant, const ObservationExtras& extras) {
  ObsVector obs(observation_length(variant));
  const Eigen::Vector3d up = state.up_axis();
  obs.head<3>() = up;
  obs[3] = state.linear_velocity.x();
  obs.segment<3>(4) = state.angular_velocity;
  obs[7] = v_t;
  int k = 8;
  if (uses_fsm(variant)) {
    if (!extras.fsm) throw VariantMismatch(std::string(variant_name(variant)) + " observation needs an FSM snapshot");
    const ObsVector f = fsm_observation(*extras.fsm, variant == Variant::kPmFsmReflex);
    obs.segment(k, f.size()) = f;
  } else {
    if (!extras.tg_phase) throw VariantMismatch(std::string(variant_name(variant)) + " observation needs a TG phase");
    obs[k++] = std::sin(*extras.tg_phase);
    obs[k++] = std::cos(*extras.tg_phase);
    if (variant == Variant::kPmtgContact) {
      for (int leg = 0; leg < kNumLegs; ++leg) obs[k++] = state.contact_flags[leg] ? 1.0 : 0.0;
    }
  }
  return obs;
}

}  // namespace pmfsm
