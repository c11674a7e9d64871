#pragma once

// Planar two-link leg kinematics and the per-phase termination poses derived
// from the modulation parameters.

#include <array>
#include <stdexcept>

#include <Eigen/Core>

#include "pmfsm/types.hpp"

namespace pmfsm {

/// Sagittal-plane leg geometry shared by all four legs. Frames: hip frame has
/// x forward and z pointing down; the torso frame has x forward, y left, z up.
struct LegGeometry {
  double l_upper = 0.2;
  double l_lower = 0.2;
  Interval hip_limits{-1.0, 2.0};
  Interval knee_limits{-2.7, 0.0};
  /// Leg roots in the torso frame, FL, FR, RL, RR.
  std::array<Eigen::Vector3d, kNumLegs> hip_offsets{
      Eigen::Vector3d{0.18, 0.13, 0.0}, Eigen::Vector3d{0.18, -0.13, 0.0},
      Eigen::Vector3d{-0.18, 0.13, 0.0}, Eigen::Vector3d{-0.18, -0.13, 0.0}};
  LegPose default_stance{0.9, -1.8};
  /// Horizontal hip-angle shift of the touch-down pose relative to the swing apex.
  double retraction_offset = 0.0;
  /// Touch-down target depth below the nominal ground plane, so that a
  /// retracting foot meets flat ground before its interpolation converges.
  double touchdown_depth = 0.0;

  void validate() const;
};

/// Foot position in the hip frame, meters (x forward, z down).
struct FootPosition {
  double x = 0.0;
  double z = 0.0;
};

class OutOfWorkspace : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

FootPosition forward_kinematics(const LegPose& q, const LegGeometry& geom);

/// d(x, z)/d(hip, knee), row-major: [dx/dhip, dx/dknee; dz/dhip, dz/dknee].
Eigen::Matrix2d leg_jacobian(const LegPose& q, const LegGeometry& geom);

/// Knee-backward branch (knee <= 0). Throws OutOfWorkspace when the target is
/// farther than l_upper + l_lower or closer than |l_upper - l_lower|.
LegPose inverse_kinematics(const FootPosition& foot, const LegGeometry& geom);

/// Depth of the foot below the hip at the default stance.
double nominal_height(const LegGeometry& geom);

struct KneeSolution {
  double knee = 0.0;
  bool clamped = false;
};

/// Knee angle that puts the foot at depth `z` for a fixed hip angle, keeping
/// the lower link on the backward branch. Clamps when `z` is unreachable.
KneeSolution knee_for_depth(double hip, double z, const LegGeometry& geom);

struct TerminationPoseSet {
  LegPose e_s1;  // swing apex: front, raised by h
  LegPose e_s2;  // touch-down: front, on the ground
  LegPose e_s3;  // rear support position
  bool clamped = false;

  const LegPose& for_phase(int phase) const { return phase == 1 ? e_s1 : (phase == 2 ? e_s2 : e_s3); }
};

/// Hip at default +/- A/2 and knee from the depth constraint: e_s1 lifts the
/// foot h above the nominal ground, e_s2 and e_s3 keep it on the ground.
TerminationPoseSet sub_automata_targets(const ModulationParams& rho, const LegGeometry& geom, int leg);

/// Clearance of the foot above the nominal ground plane for pose `q`.
double foot_clearance(const LegPose& q, const LegGeometry& geom);

LegPose clamp_to_limits(const LegPose& q, const LegGeometry& geom);

}  // namespace pmfsm
