#pragma once

// Observations, reward, termination and target-velocity profiles shared by
// training and evaluation.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pmfsm/gait_fsm.hpp"
#include "pmfsm/simulator.hpp"
#include "pmfsm/types.hpp"

namespace pmfsm {

enum class Variant : std::uint8_t { kPmtg = 0, kPmtgContact = 1, kPmFsm = 2, kPmFsmReflex = 3 };

std::string_view variant_name(Variant variant);  // "PMTG", "PMTG-contact", "PM-FSM", "PM-FSM-reflex"
/// Accepts the names above, case-insensitive. Throws std::invalid_argument.
Variant parse_variant(std::string_view name);
int observation_length(Variant variant);
bool uses_fsm(Variant variant);

enum class TaskKind : std::uint8_t { kVel = 0, kPer = 1, kStr = 2 };

std::string_view task_name(TaskKind task);
TaskKind parse_task(std::string_view name);

struct RewardConfig {
  double v_max = 0.6;          // m/s
  double c_tau = 1e-4;         // per (N m)^2
  double done_penalty = -0.5;

  void validate() const;
};

struct RewardBreakdown {
  double r_speed = 0.0;
  double r_torque = 0.0;
  double r_done = 0.0;
  double total = 0.0;
};

/// v_max * exp(-(v_r - v_t)^2 / (2 v_max^2)).
double speed_reward(double v_r, double v_t, double v_max);

/// v_r is the torso velocity along the target direction (world +x).
RewardBreakdown reward(const RobotState& state, double v_t, const JointVector& torques, bool fell,
                       const RewardConfig& config);

struct FallConfig {
  double height_fraction = 0.6;   // of the nominal standing height
  double max_tilt = 0.7853981633974483;  // rad

  void validate() const;
};

/// Height is measured above the terrain directly below the center of mass.
bool is_fallen(const RobotState& state, double height_above_ground, double nominal_height, const FallConfig& config);

/// Trapezoid: ramp up over the first 20% of the episode, hold, ramp down over
/// the last 20%.
struct VelocityProfile {
  double v_target = 0.6;
  double episode_seconds = 25.0;
  double ramp_fraction = 0.2;

  double at(double t) const;
};

struct VelocityRange {
  double lo = 0.5;
  double hi = 0.9;
  double fixed = 0.6;  // PER and STR
};

/// VEL draws v_target uniformly from the range per seed; PER and STR hold
/// the fixed value.
VelocityProfile make_velocity_profile(TaskKind task, std::uint64_t seed, double episode_seconds,
                                      const VelocityRange& range = {});

class VariantMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Variant-specific extras: TG phase for the PMTG family, FSM snapshot for
/// the PM-FSM family.
struct ObservationExtras {
  std::optional<double> tg_phase;
  const FsmSnapshot* fsm = nullptr;
};

/// Base layout: up axis in world (3), forward velocity (1), body angular
/// velocity roll/pitch/yaw (3), target velocity (1). Then per variant:
/// phase (sin, cos), contact flags, FSM leg phases, reflex id.
ObsVector observe(const RobotState& state, double v_t, Variant variant, const ObservationExtras& extras);

}  // namespace pmfsm
