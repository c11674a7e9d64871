#pragma once

// Feed-forward policy, action decoding, observation normalization, and the
// binary checkpoint format.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "pmfsm/task.hpp"
#include "pmfsm/types.hpp"

namespace pmfsm {

inline constexpr int kActionSize = 11;
inline constexpr int kHidden1 = 128;
inline constexpr int kHidden2 = 64;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using ActionVector = Eigen::Matrix<double, kActionSize, 1>;

std::size_t parameter_count(int input_size);

/// input -> 128 -> 64 -> 11 with tanh on every layer. Parameters are stored
/// as one flat vector, layer by layer, each weight matrix column-major
/// followed by its bias.
class Policy {
 public:
  Policy() = default;
  explicit Policy(int input_size);
  Policy(int input_size, Eigen::VectorXd parameters);

  int input_size() const { return input_size_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::VectorXd& parameters() { return params_; }

  ActionVector forward(const Eigen::Ref<const Eigen::VectorXd>& obs) const;

 private:
  int input_size_ = 0;
  Eigen::VectorXd params_;
};

/// Xavier-uniform hidden layers; the output layer is scaled by `output_scale`
/// (0 gives a zero-action initial policy).
Policy make_initial_policy(int input_size, std::uint64_t seed, double output_scale = 0.0);

struct ActionRanges {
  Interval f{1.0, 3.0};
  Interval A{0.2, 0.8};
  Interval h{0.02, 0.08};
  double u_fb_scale = 0.2;  // rad

  void validate() const;
};

struct DecodedAction {
  JointVector u_fb = JointVector::Zero();
  ModulationParams rho;
};

/// Inputs outside [-1, 1] are clamped first.
DecodedAction decode_action(const ActionVector& raw, const ActionRanges& ranges);

/// Running mean and variance (Welford). Normalized value is
/// (x - mean) / sqrt(max(var, 1e-8)).
class ObsNormalizer {
 public:
  static constexpr double kMinVariance = 1e-8;

  ObsNormalizer() = default;
  explicit ObsNormalizer(int size);

  int size() const { return static_cast<int>(mean_.size()); }
  double count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  Eigen::VectorXd variance() const;

  void update(const Eigen::Ref<const Eigen::VectorXd>& x);
  /// Chan et al. parallel merge.
  void merge(const ObsNormalizer& other);
  Eigen::VectorXd normalize(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  void set_state(double count, Eigen::VectorXd mean, Eigen::VectorXd m2);
  const Eigen::VectorXd& m2() const { return m2_; }

 private:
  double count_ = 0.0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

struct Checkpoint {
  Variant variant = Variant::kPmFsm;
  ActionRanges ranges;
  ObsNormalizer normalizer;
  Policy policy;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Checkpoint make_checkpoint(Variant variant, std::uint64_t seed, const ActionRanges& ranges = {},
                           double output_scale = 0.0);

/// Little-endian binary: magic "PMFSMCK1", version, variant, observation
/// length, ranges, normalizer state, parameter count, parameters.
void write_checkpoint(std::ostream& out, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pmfsm
