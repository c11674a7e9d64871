#include "pmfsm/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

namespace pmfsm {

FsmController::FsmController(SubAutomataMatrix matrix, LegGeometry geometry, FsmControllerConfig config)
    : matrix_(std::move(matrix)), geometry_(std::move(geometry)), config_(std::move(config)) {
  config_.timing.validate();
  geometry_.validate();
  fsm_ = initial_snapshot(matrix_);
}

void FsmController::reset(const JointVector& joint_angles) {
  fsm_ = initial_snapshot(matrix_);
  p_ = joint_angles;
  e_ = joint_angles;
  e_prev_ = joint_angles;
  entered_phase_ = fsm_.per_leg_phase;
  entered_override_ = {};
  reached_ = {};
  watchdog_count_ = 0;
  reflex_counts_ = {};
}

LegPose FsmController::leg_target(int leg, const std::array<TerminationPoseSet, kNumLegs>& nominal) const {
  if (const auto& o = fsm_.pose_overrides[static_cast<std::size_t>(leg)]) return *o;
  return nominal[static_cast<std::size_t>(leg)].for_phase(static_cast<int>(fsm_.per_leg_phase[leg]));
}

LegFlags FsmController::evaluate_reached(const std::array<TerminationPoseSet, kNumLegs>& nominal) const {
  const double tol = config_.timing.delta_tol * (1.0 + 1e-9);
  const PhaseRow& next = matrix_.state(matrix_.next_state(fsm_.state_index));
  LegFlags reached{};
  for (int leg = 0; leg < kNumLegs; ++leg) {
    // Support that carries on into the next row does not gate this one.
    if (fsm_.per_leg_phase[leg] == LegPhase::kAdjustment && next[leg] == LegPhase::kAdjustment &&
        !fsm_.pose_overrides[static_cast<std::size_t>(leg)]) {
      reached[leg] = true;
      continue;
    }
    const LegPose e = leg_target(leg, nominal);
    reached[leg] = std::abs(p_[hip_index(leg)] - e.hip) <= tol && std::abs(p_[knee_index(leg)] - e.knee) <= tol;
  }
  return reached;
}

JointVector FsmController::update(const ContactFlags& contacts, const JointVector& joint_angles,
                                  const ModulationParams& rho) {
  const TimingConfig& timing = config_.timing;
  const int cycle = ideal_cycle_steps(rho.frequency, timing.dt);
  std::array<TerminationPoseSet, kNumLegs> nominal;
  for (int leg = 0; leg < kNumLegs; ++leg) nominal[leg] = sub_automata_targets(rho, geometry_, leg);

  const LocomotionContext ctx{contacts, joint_angles};
  reached_ = evaluate_reached(nominal);

  bool transitioned = false;
  if (fsm_.reflex.active()) {
    const ReflexKind before = fsm_.reflex.kind;
    std::tie(fsm_, transitioned) =
        advance_reflex(fsm_, matrix_, ctx, reached_, nominal, rho, geometry_, config_.reflex);
    if (fsm_.reflex.kind != before && fsm_.reflex.active()) ++reflex_counts_[static_cast<std::size_t>(fsm_.reflex.kind)];
  } else {
    Reflex reflex;
    if (config_.reflexes_enabled) reflex = check_reflex(note_contacts(fsm_, ctx), ctx, reached_);
    if (reflex.active()) {
      fsm_ = apply_reflex(note_contacts(fsm_, ctx), reflex, nominal, rho, geometry_, config_.reflex).first;
      ++reflex_counts_[static_cast<std::size_t>(reflex.kind)];
    } else {
      std::tie(fsm_, transitioned) = fsm_step(fsm_, matrix_, ctx, reached_);
    }
  }
  if (!transitioned && fsm_.steps_in_state > config_.watchdog_cycles * cycle) {
    fsm_ = advance_state(fsm_, matrix_);
    ++watchdog_count_;
  }

  for (int leg = 0; leg < kNumLegs; ++leg) {
    const bool has_override = fsm_.pose_overrides[static_cast<std::size_t>(leg)].has_value();
    if (fsm_.per_leg_phase[leg] != entered_phase_[leg] || has_override != entered_override_[leg]) {
      // New interpolation segment starts from the current pose.
      entered_phase_[leg] = fsm_.per_leg_phase[leg];
      entered_override_[leg] = has_override;
      e_prev_[hip_index(leg)] = p_[hip_index(leg)];
      e_prev_[knee_index(leg)] = p_[knee_index(leg)];
    }
    const LegPose e = leg_target(leg, nominal);
    e_[hip_index(leg)] = e.hip;
    e_[knee_index(leg)] = e.knee;
    const double share = timing.tau.for_phase(static_cast<int>(fsm_.per_leg_phase[leg]));
    for (int j : {hip_index(leg), knee_index(leg)}) {
      const double k = interpolation_gain(cycle, share, e_[j], e_prev_[j], timing.delta_tol);
      p_[j] += k * (e_[j] - p_[j]);
    }
  }
  return p_;
}

double tg_step(double phase, double frequency, double dt) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double next = std::fmod(phase + two_pi * frequency * dt, two_pi);
  if (next < 0.0) next += two_pi;
  return next;
}

namespace {

LegPose reachable_ik(double x, double z, const LegGeometry& geom) {
  const double r = std::hypot(x, z);
  const double r_max = geom.l_upper + geom.l_lower - 1e-6;
  const double r_min = std::abs(geom.l_upper - geom.l_lower) + 1e-6;
  if (r > r_max || r < r_min) {
    const double s = std::clamp(r, r_min, r_max) / std::max(r, 1e-12);
    x *= s;
    z *= s;
  }
  return clamp_to_limits(inverse_kinematics({x, z}, geom), geom);
}

}  // namespace

JointVector tg_targets(double phase, double amplitude, double height, const LegGeometry& geom) {
  constexpr double pi = std::numbers::pi;
  const double z_ground = nominal_height(geom);
  const double hip = geom.default_stance.hip;
  const double front = forward_kinematics({hip + 0.5 * amplitude, knee_for_depth(hip + 0.5 * amplitude, z_ground, geom).knee}, geom).x;
  const double rear = forward_kinematics({hip - 0.5 * amplitude, knee_for_depth(hip - 0.5 * amplitude, z_ground, geom).knee}, geom).x;
  const double center = 0.5 * (front + rear);
  const double half_span = 0.5 * (front - rear);

  JointVector out;
  constexpr std::array<double, kNumLegs> offsets = {0.0, pi, pi, 0.0};
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const double phi = std::fmod(phase + offsets[leg], 2.0 * pi);
    double x = 0.0, lift = 0.0;
    if (phi < pi) {
      const double s = phi / pi;
      x = center - half_span * std::cos(pi * s);
      lift = height * std::sin(pi * s);
    } else {
      const double s = (phi - pi) / pi;
      x = center + half_span * (1.0 - 2.0 * s);
    }
    const LegPose q = reachable_ik(x, z_ground - lift, geom);
    out[hip_index(leg)] = q.hip;
    out[knee_index(leg)] = q.knee;
  }
  return out;
}

}  // namespace pmfsm
