#include "pmfsm/motion_interp.hpp"

#include <cmath>
#include <string>

namespace pmfsm {

void DurationDistribution::validate() const {
  if (!(s1 > 0.0 && s2 > 0.0 && s3 > 0.0)) throw std::invalid_argument("duration shares must be positive");
  if (std::abs(s1 + s2 + s3 - 1.0) > 1e-9) throw std::invalid_argument("duration shares must sum to 1");
}

void TimingConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(delta_tol > 0.0)) throw std::invalid_argument("delta_tol must be positive");
  if (f_range.lo > f_range.hi || A_range.lo > A_range.hi || h_range.lo > h_range.hi)
    throw std::invalid_argument("modulation range is empty");
  if (!(f_range.lo > 0.0) || !(h_range.lo > 0.0))
    throw std::invalid_argument("frequency and height ranges need positive lower bounds");
  tau.validate();
}

int ideal_cycle_steps(double frequency, double dt) {
  if (!(frequency > 0.0) || !(dt > 0.0)) throw NonPositiveInput("ideal_cycle_steps needs f > 0 and dt > 0");
  // 1/(f dt) is often an integer in exact arithmetic (f = 1, dt = 0.025) but
  // lands a few ulps above it in floating point; do not let that round up.
  const double steps = 1.0 / (frequency * dt);
  const double nearest = std::round(steps);
  const double cycle = std::abs(steps - nearest) <= 1e-9 * nearest ? nearest : std::ceil(steps);
  return cycle < 1.0 ? 1 : static_cast<int>(cycle);
}

int phase_steps(int cycle_steps, double share) {
  const int n = static_cast<int>(std::floor(cycle_steps * share + 0.5));
  return n < 1 ? 1 : n;
}

double interpolation_gain(int cycle_steps, double share, double e_i, double e_prev, double delta_tol) {
  const double distance = std::abs(e_i - e_prev);
  if (distance <= delta_tol) return 0.0;
  const int n = phase_steps(cycle_steps, share);
  return 1.0 - std::pow(delta_tol / distance, 1.0 / n);
}

PoseVector interp_step(const InterpolatorState& state) {
  return state.gain.cwiseProduct(state.e_current - state.p);
}

bool targets_reached(const PoseVector& p, const PoseVector& e, double delta_tol) {
  if (p.size() != e.size())
    throw LengthMismatch("targets_reached: " + std::to_string(p.size()) + " vs " + std::to_string(e.size()));
  if (p.size() == 0) return true;
  return (p - e).cwiseAbs().maxCoeff() <= delta_tol;
}

}  // namespace pmfsm
