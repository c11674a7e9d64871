#include "pmfsm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pmfsm {

void SimConfig::validate() const {
  if (!(mass > 0.0) || !(inertia.minCoeff() > 0.0)) throw std::invalid_argument("mass and inertia must be positive");
  if (!(control_dt > 0.0) || substeps < 1) throw std::invalid_argument("control_dt and substeps must be positive");
  if (!(actuator_time_constant > 0.0)) throw std::invalid_argument("actuator time constant must be positive");
  if (!(tau_max > 0.0)) throw std::invalid_argument("tau_max must be positive");
  if (!(kp > 0.0) || kd < 0.0 || !(kp * actuator_time_constant > kd))
    throw std::invalid_argument("need kp > 0 and kp * actuator_time_constant > kd");
  if (contact_stiffness < 0.0 || contact_damping < 0.0 || tangential_stiffness <= 0.0 || tangential_damping < 0.0)
    throw std::invalid_argument("contact parameters must be non-negative");
}

TerrainContact terrain_contact(const Terrain& terrain, double x, double z) {
  TerrainContact c;
  const std::size_t j = terrain.segment_at(x);
  const double top = terrain.steps[j].height;
  if (z >= top) return c;
  c.depth = top - z;
  c.normal = Eigen::Vector3d::UnitZ();
  c.face = static_cast<long>(3 * j);
  // Left riser: entering column j from the lower segment behind it.
  if (j > 0 && terrain.steps[j - 1].height < top && z > terrain.steps[j - 1].height) {
    const double d = x - terrain.steps[j].start_x;
    if (d < c.depth) {
      c.depth = d;
      c.normal = -Eigen::Vector3d::UnitX();
      c.face = static_cast<long>(3 * j + 1);
    }
  }
  // Right riser: column j drops to a lower segment ahead.
  if (j + 1 < terrain.steps.size() && terrain.steps[j + 1].height < top && z > terrain.steps[j + 1].height) {
    const double d = terrain.steps[j + 1].start_x - x;
    if (d < c.depth) {
      c.depth = d;
      c.normal = Eigen::Vector3d::UnitX();
      c.face = static_cast<long>(3 * j + 2);
    }
  }
  return c;
}

Simulator::Simulator(SimConfig config, LegGeometry geometry, Terrain terrain, PerturbationSchedule schedule)
    : config_(std::move(config)),
      geometry_(std::move(geometry)),
      terrain_(std::move(terrain)),
      schedule_(std::move(schedule)) {
  config_.validate();
  geometry_.validate();
  terrain_.validate();
  state_ = standing_state(0.0);
}

Eigen::Vector3d Simulator::foot_in_body(const RobotState& state, int leg) const {
  const FootPosition f = forward_kinematics(state.leg_pose(leg), geometry_);
  return geometry_.hip_offsets[static_cast<std::size_t>(leg)] - config_.com_offset + Eigen::Vector3d{f.x, 0.0, -f.z};
}

RobotState Simulator::standing_state(double x) const {
  RobotState s;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    s.joint_angles[hip_index(leg)] = geometry_.default_stance.hip;
    s.joint_angles[knee_index(leg)] = geometry_.default_stance.knee;
  }
  const double ground = terrain_.height_at(x);
  // Lowest foot touches the ground exactly.
  double lowest = 0.0;
  for (int leg = 0; leg < kNumLegs; ++leg) lowest = std::min(lowest, foot_in_body(s, leg).z());
  s.position = {x, 0.0, ground - lowest};
  return s;
}

void Simulator::reset(const RobotState& state) {
  state_ = state;
  state_.orientation.normalize();
  feet_ = {};
  time_ = 0.0;
  state_.contact_flags = evaluate_contact_flags();
}

Eigen::Vector3d Simulator::foot_position(int leg) const {
  return state_.position + state_.orientation * foot_in_body(state_, leg);
}

double Simulator::height_above_ground() const {
  return state_.position.z() - terrain_.height_at(state_.position.x());
}

ContactFlags Simulator::evaluate_contact_flags() const {
  ContactFlags flags{};
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Eigen::Vector3d p = foot_position(leg);
    flags[leg] = terrain_contact(terrain_, p.x(), p.z()).depth > 0.0;
  }
  return flags;
}

double Simulator::mechanical_energy() const {
  const Eigen::Vector3d& w = state_.angular_velocity;
  double e = 0.5 * config_.mass * state_.linear_velocity.squaredNorm() +
             0.5 * w.dot(config_.inertia.cwiseProduct(w)) + config_.mass * config_.gravity * state_.position.z();
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Eigen::Vector3d p = foot_position(leg);
    const TerrainContact c = terrain_contact(terrain_, p.x(), p.z());
    if (c.depth <= 0.0) continue;
    e += 0.5 * config_.contact_stiffness * c.depth * c.depth;
    const auto& foot = feet_[static_cast<std::size_t>(leg)];
    if (foot.active) {
      Eigen::Vector3d s = p - foot.anchor;
      s -= s.dot(c.normal) * c.normal;
      e += 0.5 * config_.tangential_stiffness * s.squaredNorm();
    }
  }
  return e;
}

StepResult Simulator::step(const JointVector& joint_targets) {
  StepResult out;
  JointVector torque_sq = JointVector::Zero();
  const double dt = config_.physics_dt();
  for (int i = 0; i < config_.substeps; ++i) substep(joint_targets, dt, torque_sq);
  out.torque_rms = (torque_sq / config_.substeps).cwiseSqrt();
  out.torques = state_.torques;
  for (int leg = 0; leg < kNumLegs; ++leg) out.foot_forces[leg] = feet_[static_cast<std::size_t>(leg)].force;

  const bool finite = state_.position.allFinite() && state_.linear_velocity.allFinite() &&
                      state_.angular_velocity.allFinite() && state_.orientation.coeffs().allFinite() &&
                      state_.joint_angles.allFinite();
  out.diverged = !finite;
  state_.contact_flags = finite ? evaluate_contact_flags() : ContactFlags{};
  out.contacts = state_.contact_flags;
  return out;
}

void Simulator::substep(const JointVector& targets, double dt, JointVector& torque_sq) {
  RobotState& s = state_;
  const Eigen::Matrix3d rot = s.orientation.toRotationMatrix();
  const Eigen::Vector3d omega_world = rot * s.angular_velocity;
  Eigen::Vector3d force = Eigen::Vector3d{0.0, 0.0, -config_.mass * config_.gravity} + schedule_.force_at(time_);
  Eigen::Vector3d torque_world = Eigen::Vector3d::Zero();
  const double mu = terrain_.friction;
  const Interval limits[2] = {geometry_.hip_limits, geometry_.knee_limits};
  const double joint_damping = config_.kp * config_.actuator_time_constant;
  const double motor_damping = std::max(joint_damping - config_.kd, 1e-9);

  for (int leg = 0; leg < kNumLegs; ++leg) {
    auto& foot = feet_[static_cast<std::size_t>(leg)];
    const int jh = hip_index(leg);
    const int jk = knee_index(leg);
    const LegPose pose = s.leg_pose(leg);
    const Eigen::Matrix2d jac = leg_jacobian(pose, geometry_);
    const Eigen::Vector2d qd_prev{s.joint_velocities[jh], s.joint_velocities[jk]};
    const Eigen::Vector3d arm = rot * foot_in_body(s, leg);
    const Eigen::Vector3d p = s.position + arm;
    const Eigen::Vector3d v_torso = s.linear_velocity + omega_world.cross(arm);

    // Foot velocity contributed by the joints, world frame: v_leg = G qd.
    Eigen::Matrix<double, 3, 2> leg_map;
    leg_map.row(0) = jac.row(0);
    leg_map.row(1).setZero();
    leg_map.row(2) = -jac.row(1);
    const Eigen::Matrix<double, 3, 2> g_map = rot * leg_map;

    const TerrainContact c = terrain_contact(terrain_, p.x(), p.z());
    if (c.depth <= 0.0) {
      foot = FootContactState{};
    } else if (!foot.active || foot.face != c.face) {
      foot.active = true;
      foot.face = c.face;
      foot.anchor = p;
    }

    struct ContactForce {
      Eigen::Vector3d force = Eigen::Vector3d::Zero();
      double normal = 0.0;
      double normal_raw = 0.0;
      bool sticking = false;
    };
    const auto contact_force = [&](const Eigen::Vector3d& v) {
      ContactForce f;
      if (!foot.active) return f;
      f.normal_raw = config_.contact_stiffness * c.depth - config_.contact_damping * v.dot(c.normal);
      f.normal = std::max(0.0, f.normal_raw);
      Eigen::Vector3d slip = p - foot.anchor;
      slip -= slip.dot(c.normal) * c.normal;
      const Eigen::Vector3d v_t = v - v.dot(c.normal) * c.normal;
      Eigen::Vector3d f_t = -config_.tangential_stiffness * slip - config_.tangential_damping * v_t;
      const double cap = mu * f.normal;
      const double f_t_norm = f_t.norm();
      f.sticking = f_t_norm <= cap;
      if (!f.sticking) f_t = f_t_norm > 0.0 ? Eigen::Vector3d(f_t * (cap / f_t_norm)) : Eigen::Vector3d::Zero();
      f.force = f.normal * c.normal + f_t;
      return f;
    };

    // Linearize the contact around the previous joint velocity.
    const ContactForce trial = contact_force(v_torso + g_map * qd_prev);
    Eigen::Matrix3d stiff = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d damp = Eigen::Matrix3d::Zero();
    if (foot.active) {
      const Eigen::Matrix3d nn = c.normal * c.normal.transpose();
      if (trial.normal_raw > 0.0) {
        stiff += config_.contact_stiffness * nn;
        damp += config_.contact_damping * nn;
      }
      if (trial.sticking && trial.normal > 0.0) {
        const Eigen::Matrix3d tt = Eigen::Matrix3d::Identity() - nn;
        stiff += config_.tangential_stiffness * tt;
        damp += config_.tangential_damping * tt;
      }
    }

    // Joints: massless links with viscous actuators, b qd = tau_motor + tau_ext,
    // implicit in the PD spring and the linearized contact force.
    const Eigen::Matrix2d contact_lhs = g_map.transpose() * (dt * stiff + damp) * g_map;
    const Eigen::Vector2d tau_ext = g_map.transpose() * (trial.force + damp * g_map * qd_prev);
    const Eigen::Vector2d error{targets[jh] - pose.hip, targets[jk] - pose.knee};
    std::array<bool, 2> saturated{false, false};
    std::array<double, 2> sat_torque{0.0, 0.0};
    Eigen::Vector2d qd = Eigen::Vector2d::Zero();
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::Matrix2d lhs = contact_lhs;
      Eigen::Vector2d rhs = tau_ext;
      for (int k = 0; k < 2; ++k) {
        if (saturated[k]) {
          lhs(k, k) += motor_damping;
          rhs[k] += sat_torque[k];
        } else {
          lhs(k, k) += joint_damping + config_.kp * dt;
          rhs[k] += config_.kp * error[k];
        }
      }
      qd = lhs.partialPivLu().solve(rhs);
      bool changed = false;
      for (int k = 0; k < 2; ++k) {
        if (saturated[k]) continue;
        const double tau = config_.kp * (error[k] - dt * qd[k]) - config_.kd * qd[k];
        if (std::abs(tau) > config_.tau_max) {
          saturated[k] = true;
          sat_torque[k] = std::copysign(config_.tau_max, tau);
          changed = true;
        }
      }
      if (!changed) break;
    }
    for (int k = 0; k < 2; ++k) {
      const int j = leg * kJointsPerLeg + k;
      double rate_k = std::clamp(qd[k], -config_.max_joint_velocity, config_.max_joint_velocity);
      const double tau = saturated[k] ? sat_torque[k]
                                      : std::clamp(config_.kp * (error[k] - dt * rate_k) - config_.kd * rate_k,
                                                   -config_.tau_max, config_.tau_max);
      s.torques[j] = tau;
      torque_sq[j] += tau * tau;
      double q = s.joint_angles[j] + rate_k * dt;
      const double limited = limits[k].clamp(q);
      if (limited != q) {
        q = limited;
        rate_k = 0.0;
      }
      s.joint_angles[j] = q;
      s.joint_velocities[j] = rate_k;
      qd[k] = rate_k;
    }

    // Force on the torso with the solved foot velocity.
    if (foot.active) {
      const ContactForce f = contact_force(v_torso + g_map * qd);
      if (!f.sticking) {
        // Sliding: drag the anchor so the spring alone carries the capped force.
        Eigen::Vector3d f_t = f.force - f.normal * c.normal;
        foot.anchor = p + f_t / config_.tangential_stiffness;
      }
      foot.force = f.force;
      foot.depth = c.depth;
      force += foot.force;
      torque_world += arm.cross(foot.force);
      if (monitor_) monitor_({leg, f.normal, (f.force - f.normal * c.normal).norm(), mu, c.depth});
    }
  }

  // Torso: semi-implicit Euler.
  s.linear_velocity += dt * force / config_.mass;
  s.position += dt * s.linear_velocity;
  const Eigen::Vector3d torque_body = rot.transpose() * torque_world;
  const Eigen::Vector3d& w = s.angular_velocity;
  const Eigen::Vector3d gyro = w.cross(config_.inertia.cwiseProduct(w));
  s.angular_velocity += dt * (torque_body - gyro).cwiseQuotient(config_.inertia);
  const Eigen::Vector3d rotvec = s.angular_velocity * dt;
  const double angle = rotvec.norm();
  if (angle > 0.0) {
    s.orientation = s.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(angle, rotvec / angle));
    s.orientation.normalize();
  }
  time_ += dt;
}

}  // namespace pmfsm
