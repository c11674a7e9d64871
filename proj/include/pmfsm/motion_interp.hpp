#pragma once

// Exponential interpolation from one termination pose to the next, timed so
// that each sub-automaton phase takes its share of the ideal gait cycle.

#include <stdexcept>

#include "pmfsm/types.hpp"

namespace pmfsm {

/// Phase shares of the ideal cycle for (s1, s2, s3).
struct DurationDistribution {
  double s1 = 0.34;
  double s2 = 0.16;
  double s3 = 0.50;

  double for_phase(int phase) const { return phase == 1 ? s1 : (phase == 2 ? s2 : s3); }
  void validate() const;
};

struct TimingConfig {
  double dt = 0.025;          // control interval, s
  double delta_tol = 0.005;   // joint convergence tolerance, rad
  Interval f_range{1.0, 3.0};
  Interval A_range{0.2, 0.8};
  Interval h_range{0.02, 0.08};
  DurationDistribution tau;

  void validate() const;
};

class NonPositiveInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// T = ceil(1 / (f dt)), at least 1.
int ideal_cycle_steps(double frequency, double dt);

/// Steps allotted to a phase: floor(T d + 0.5), at least 1.
int phase_steps(int cycle_steps, double share);

/// Gain that brings a joint from e_prev to within delta_tol of e_i in
/// phase_steps(T, d_i) applications of interp_step. Zero when already within
/// tolerance.
double interpolation_gain(int cycle_steps, double share, double e_i, double e_prev, double delta_tol);

struct InterpolatorState {
  PoseVector p;
  PoseVector e_current;
  PoseVector e_previous;
  /// One gain per joint, each computed from that joint's own |e - e_prev|.
  PoseVector gain;
  int steps_elapsed = 0;
};

/// Per-step increment a = K (e - p), component-wise.
PoseVector interp_step(const InterpolatorState& state);

/// true iff max |p - e| <= delta_tol.
bool targets_reached(const PoseVector& p, const PoseVector& e, double delta_tol);

}  // namespace pmfsm
