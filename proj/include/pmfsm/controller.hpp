#pragma once

// Joint-target generators driven by the modulation parameters: the gait state
// machine with interpolated motion, and the open-loop trajectory generator
// used by the PMTG baselines.

#include <array>

#include "pmfsm/gait_fsm.hpp"
#include "pmfsm/leg_model.hpp"
#include "pmfsm/motion_interp.hpp"
#include "pmfsm/types.hpp"

namespace pmfsm {

struct FsmControllerConfig {
  TimingConfig timing;
  ReflexConfig reflex;
  bool reflexes_enabled = false;
  /// A state held longer than this many ideal cycles is forced forward.
  double watchdog_cycles = 5.0;
};

class FsmController {
 public:
  FsmController(SubAutomataMatrix matrix, LegGeometry geometry, FsmControllerConfig config);

  /// Starts at state 1 with the interpolated pose at the measured joint angles.
  void reset(const JointVector& joint_angles);

  /// One control step: evaluates transitions and reflexes from the measured
  /// contacts, then advances the interpolated pose. Returns u_fsm.
  JointVector update(const ContactFlags& contacts, const JointVector& joint_angles, const ModulationParams& rho);

  const FsmSnapshot& snapshot() const { return fsm_; }
  const SubAutomataMatrix& matrix() const { return matrix_; }
  const JointVector& pose() const { return p_; }
  /// Termination pose each leg is currently interpolating toward.
  const JointVector& target() const { return e_; }
  const LegFlags& last_reached() const { return reached_; }
  int watchdog_count() const { return watchdog_count_; }
  int reflex_count(ReflexKind kind) const { return reflex_counts_[static_cast<std::size_t>(kind)]; }

 private:
  LegPose leg_target(int leg, const std::array<TerminationPoseSet, kNumLegs>& nominal) const;
  LegFlags evaluate_reached(const std::array<TerminationPoseSet, kNumLegs>& nominal) const;

  SubAutomataMatrix matrix_;
  LegGeometry geometry_;
  FsmControllerConfig config_;
  FsmSnapshot fsm_;
  JointVector p_ = JointVector::Zero();
  JointVector e_ = JointVector::Zero();
  JointVector e_prev_ = JointVector::Zero();
  std::array<LegPhase, kNumLegs> entered_phase_{};
  std::array<bool, kNumLegs> entered_override_{};
  LegFlags reached_{};
  int watchdog_count_ = 0;
  std::array<int, 4> reflex_counts_{};
};

/// Trajectory generator clock: phase advances by 2 pi f dt, wrapped to [0, 2 pi).
double tg_step(double phase, double frequency, double dt);

/// Phase offsets: FL and RR at 0, FR and RL at pi. For each leg, the first
/// half of its phase is a half-ellipse swing, the second half a straight
/// ground-line return. Stride endpoints are the ground poses at the default
/// hip angle +/- A/2.
JointVector tg_targets(double phase, double amplitude, double height, const LegGeometry& geom);

}  // namespace pmfsm
