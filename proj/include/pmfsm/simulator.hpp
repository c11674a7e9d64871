#pragma once

// Single-rigid-body quadruped with massless sagittal legs, first-order
// back-drivable joint actuators and penalty ground contact.

#include <array>
#include <functional>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pmfsm/leg_model.hpp"
#include "pmfsm/terrain.hpp"
#include "pmfsm/types.hpp"

namespace pmfsm {

struct SimConfig {
  double mass = 12.0;                                 // kg
  Eigen::Vector3d inertia{0.06, 0.20, 0.22};          // principal, torso frame, kg m^2
  double gravity = 9.81;
  double control_dt = 0.025;                          // s
  int substeps = 10;                                  // physics dt = control_dt / substeps
  double kp = 55.0;                                   // N m / rad
  double kd = 0.8;                                    // N m s / rad
  double tau_max = 33.5;                              // N m
  /// Joint velocity follows (kp (target - q) + tau_ext) / (kp T); T is the
  /// unloaded time constant.
  double actuator_time_constant = 0.06;               // s
  double max_joint_velocity = 21.0;                   // rad/s
  double contact_stiffness = 3.0e4;                   // N/m
  double contact_damping = 300.0;                     // N s/m
  double tangential_stiffness = 3.0e4;                // N/m
  double tangential_damping = 300.0;                  // N s/m
  Eigen::Vector3d com_offset = Eigen::Vector3d::Zero();  // torso frame, m

  double physics_dt() const { return control_dt / substeps; }
  void validate() const;
};

struct RobotState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();        // center of mass, world
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();  // torso -> world
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();  // world
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero(); // torso frame
  JointVector joint_angles = JointVector::Zero();
  JointVector joint_velocities = JointVector::Zero();
  ContactFlags contact_flags{};
  JointVector torques = JointVector::Zero();

  /// Robot z-axis expressed in the world frame.
  Eigen::Vector3d up_axis() const { return orientation * Eigen::Vector3d::UnitZ(); }
  LegPose leg_pose(int leg) const { return {joint_angles[hip_index(leg)], joint_angles[knee_index(leg)]}; }
};

/// Per-substep contact sample, emitted to an optional monitor.
struct ContactSample {
  int leg = 0;
  double normal_force = 0.0;
  double tangential_force = 0.0;
  double friction = 0.0;
  double penetration = 0.0;
};

struct StepResult {
  ContactFlags contacts{};
  JointVector torques = JointVector::Zero();      // last substep
  JointVector torque_rms = JointVector::Zero();   // over the control interval
  std::array<Eigen::Vector3d, kNumLegs> foot_forces{};  // last substep, world
  bool diverged = false;
};

/// Ground contact of a point against the piecewise-constant terrain: the
/// shallowest way out of the solid column the point is inside.
struct TerrainContact {
  double depth = 0.0;  // > 0 when penetrating
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  long face = -1;
};

TerrainContact terrain_contact(const Terrain& terrain, double x, double z);

class Simulator {
 public:
  Simulator(SimConfig config, LegGeometry geometry, Terrain terrain, PerturbationSchedule schedule = {});

  /// Torso level at default stance with all feet just touching the ground at
  /// forward position x.
  RobotState standing_state(double x = 0.0) const;

  void reset(const RobotState& state);
  const RobotState& state() const { return state_; }
  double time() const { return time_; }
  const SimConfig& config() const { return config_; }
  const LegGeometry& geometry() const { return geometry_; }
  const Terrain& terrain() const { return terrain_; }

  /// Advances one control interval with the given PD joint targets.
  StepResult step(const JointVector& joint_targets);

  /// Foot position in world coordinates for the current state.
  Eigen::Vector3d foot_position(int leg) const;
  /// Vector from center of mass to foot, torso frame.
  Eigen::Vector3d foot_in_body(const RobotState& state, int leg) const;

  /// Torso height above the terrain directly below the center of mass.
  double height_above_ground() const;

  /// Kinetic + gravitational + contact-spring energy.
  double mechanical_energy() const;

  void set_contact_monitor(std::function<void(const ContactSample&)> monitor) { monitor_ = std::move(monitor); }

 private:
  struct FootContactState {
    bool active = false;
    long face = -1;
    Eigen::Vector3d anchor = Eigen::Vector3d::Zero();
    Eigen::Vector3d force = Eigen::Vector3d::Zero();
    double depth = 0.0;
  };

  void substep(const JointVector& targets, double dt, JointVector& torque_sq);
  ContactFlags evaluate_contact_flags() const;

  SimConfig config_;
  LegGeometry geometry_;
  Terrain terrain_;
  PerturbationSchedule schedule_;
  RobotState state_;
  std::array<FootContactState, kNumLegs> feet_{};
  double time_ = 0.0;
  std::function<void(const ContactSample&)> monitor_;
};

}  // namespace pmfsm
