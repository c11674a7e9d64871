#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include <Eigen/Core>

namespace pmfsm {

inline constexpr int kNumLegs = 4;
inline constexpr int kJointsPerLeg = 2;
inline constexpr int kNumJoints = kNumLegs * kJointsPerLeg;

/// Leg order used everywhere: gait matrix columns, joint vectors, contact flags.
enum class Leg : int { kFL = 0, kFR = 1, kRL = 2, kRR = 3 };

inline constexpr std::array<std::string_view, kNumLegs> kLegNames = {"FL", "FR", "RL", "RR"};

inline constexpr bool is_rear_leg(int leg) { return leg >= 2; }

/// Joint layout: (hip pitch, knee pitch) per leg, legs in FL, FR, RL, RR order.
using JointVector = Eigen::Matrix<double, kNumJoints, 1>;

/// Small fixed-capacity vector for poses of any joint count up to a full robot.
using PoseVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kNumJoints, 1>;

/// Policy-facing observation; at most 16 entries for every variant.
using ObsVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 16, 1>;

using ContactFlags = std::array<bool, kNumLegs>;

inline constexpr int hip_index(int leg) { return leg * kJointsPerLeg; }
inline constexpr int knee_index(int leg) { return leg * kJointsPerLeg + 1; }

/// Hip and knee pitch angles of one leg, radians.
struct LegPose {
  double hip = 0.0;
  double knee = 0.0;

  friend bool operator==(const LegPose&, const LegPose&) = default;
};

/// Policy-chosen modulation of the gait generator: frequency (Hz), hip swing
/// amplitude (rad) and foot clearance (m).
struct ModulationParams {
  double frequency = 2.0;
  double amplitude = 0.5;
  double height = 0.05;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  double mid() const { return 0.5 * (lo + hi); }
};

}  // namespace pmfsm
