#include "pmfsm/leg_model.hpp"

#include <algorithm>
#include <cmath>

namespace pmfsm {

namespace {
constexpr double kWorkspaceEps = 1e-12;
}

void LegGeometry::validate() const {
  if (!(l_upper > 0.0) || !(l_lower > 0.0)) throw std::invalid_argument("leg link lengths must be positive");
  if (hip_limits.lo > hip_limits.hi || knee_limits.lo > knee_limits.hi)
    throw std::invalid_argument("joint limit interval is empty");
  if (!hip_limits.contains(default_stance.hip) || !knee_limits.contains(default_stance.knee))
    throw std::invalid_argument("default stance outside joint limits");
  if (touchdown_depth < 0.0) throw std::invalid_argument("touchdown_depth must be non-negative");
}

FootPosition forward_kinematics(const LegPose& q, const LegGeometry& geom) {
  const double thigh = q.hip;
  const double shank = q.hip + q.knee;
  return {geom.l_upper * std::sin(thigh) + geom.l_lower * std::sin(shank),
          geom.l_upper * std::cos(thigh) + geom.l_lower * std::cos(shank)};
}

Eigen::Matrix2d leg_jacobian(const LegPose& q, const LegGeometry& geom) {
  const double c1 = std::cos(q.hip);
  const double s1 = std::sin(q.hip);
  const double c12 = std::cos(q.hip + q.knee);
  const double s12 = std::sin(q.hip + q.knee);
  Eigen::Matrix2d j;
  j << geom.l_upper * c1 + geom.l_lower * c12, geom.l_lower * c12,
      -geom.l_upper * s1 - geom.l_lower * s12, -geom.l_lower * s12;
  return j;
}

LegPose inverse_kinematics(const FootPosition& foot, const LegGeometry& geom) {
  const double r2 = foot.x * foot.x + foot.z * foot.z;
  const double r = std::sqrt(r2);
  const double lu = geom.l_upper;
  const double ll = geom.l_lower;
  if (r > lu + ll - kWorkspaceEps || r < std::abs(lu - ll) + kWorkspaceEps)
    throw OutOfWorkspace("foot target outside leg workspace");
  const double cos_knee = std::clamp((r2 - lu * lu - ll * ll) / (2.0 * lu * ll), -1.0, 1.0);
  const double knee = -std::acos(cos_knee);
  const double foot_angle = std::atan2(foot.x, foot.z);
  const double hip = foot_angle - std::atan2(ll * std::sin(knee), lu + ll * std::cos(knee));
  return {hip, knee};
}

double nominal_height(const LegGeometry& geom) { return forward_kinematics(geom.default_stance, geom).z; }

KneeSolution knee_for_depth(double hip, double z, const LegGeometry& geom) {
  // z = l_u cos(hip) + l_l cos(shank), shank = hip + knee, shank on the
  // rear-pointing branch (shank <= 0 for the default morphology).
  double c = (z - geom.l_upper * std::cos(hip)) / geom.l_lower;
  bool clamped = false;
  if (c > 1.0 || c < -1.0) {
    clamped = true;
    c = std::clamp(c, -1.0, 1.0);
  }
  const double shank = -std::acos(c);
  return {shank - hip, clamped};
}

LegPose clamp_to_limits(const LegPose& q, const LegGeometry& geom) {
  return {geom.hip_limits.clamp(q.hip), geom.knee_limits.clamp(q.knee)};
}

double foot_clearance(const LegPose& q, const LegGeometry& geom) {
  return nominal_height(geom) - forward_kinematics(q, geom).z;
}

TerminationPoseSet sub_automata_targets(const ModulationParams& rho, const LegGeometry& geom, int /*leg*/) {
  const double z_ground = nominal_height(geom);
  const double hip_front = geom.default_stance.hip + 0.5 * rho.amplitude;
  const double hip_touchdown = hip_front + geom.retraction_offset;
  const double hip_rear = geom.default_stance.hip - 0.5 * rho.amplitude;

  TerminationPoseSet out;
  auto solve = [&](double hip, double z) {
    const KneeSolution k = knee_for_depth(hip, z, geom);
    LegPose pose{hip, k.knee};
    const LegPose limited = clamp_to_limits(pose, geom);
    out.clamped = out.clamped || k.clamped || !(limited == pose);
    return limited;
  };
  out.e_s1 = solve(hip_front, z_ground - rho.height);
  out.e_s2 = solve(hip_touchdown, z_ground + geom.touchdown_depth);
  out.e_s3 = solve(hip_rear, z_ground);
  return out;
}

}  // namespace pmfsm
