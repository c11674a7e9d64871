#include "pmfsm/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "pmfsm/rng.hpp"

namespace pmfsm {

std::size_t parameter_count(int input_size) {
  const auto n = static_cast<std::size_t>(input_size);
  return n * kHidden1 + kHidden1 + kHidden1 * kHidden2 + kHidden2 + kHidden2 * kActionSize + kActionSize;
}

Policy::Policy(int input_size) : Policy(input_size, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count(input_size)))) {}

Policy::Policy(int input_size, Eigen::VectorXd parameters) : input_size_(input_size), params_(std::move(parameters)) {
  if (input_size <= 0) throw DimensionMismatch("policy input size must be positive");
  if (static_cast<std::size_t>(params_.size()) != parameter_count(input_size))
    throw DimensionMismatch("parameter vector length does not match the network shape");
}

ActionVector Policy::forward(const Eigen::Ref<const Eigen::VectorXd>& obs) const {
  if (obs.size() != input_size_)
    throw DimensionMismatch("observation length " + std::to_string(obs.size()) + ", policy expects " +
                            std::to_string(input_size_));
  const double* p = params_.data();
  using MapM = Eigen::Map<const Eigen::MatrixXd>;
  using MapV = Eigen::Map<const Eigen::VectorXd>;

  MapM w1(p, kHidden1, input_size_);
  p += kHidden1 * input_size_;
  MapV b1(p, kHidden1);
  p += kHidden1;
  const Eigen::VectorXd h1 = (w1 * obs + b1).array().tanh().matrix();

  MapM w2(p, kHidden2, kHidden1);
  p += kHidden2 * kHidden1;
  MapV b2(p, kHidden2);
  p += kHidden2;
  const Eigen::VectorXd h2 = (w2 * h1 + b2).array().tanh().matrix();

  MapM w3(p, kActionSize, kHidden2);
  p += kActionSize * kHidden2;
  MapV b3(p, kActionSize);
  return (w3 * h2 + b3).array().tanh().matrix();
}

Policy make_initial_policy(int input_size, std::uint64_t seed, double output_scale) {
  Policy policy(input_size);
  Rng rng(derive_seed({seed, 0x1417u}));
  double* p = policy.parameters().data();
  auto fill_layer = [&](int rows, int cols, double scale) {
    const double bound = scale * std::sqrt(6.0 / (rows + cols));
    for (int i = 0; i < rows * cols; ++i) *p++ = uniform(rng, -bound, bound);
    p += rows;  // zero biases
  };
  fill_layer(kHidden1, input_size, 1.0);
  fill_layer(kHidden2, kHidden1, 1.0);
  fill_layer(kActionSize, kHidden2, output_scale);
  return policy;
}

void ActionRanges::validate() const {
  if (!(f.lo > 0.0 && f.hi >= f.lo)) throw std::invalid_argument("frequency range must be positive and ordered");
  if (!(A.hi >= A.lo)) throw std::invalid_argument("amplitude range must be ordered");
  if (!(h.lo > 0.0 && h.hi >= h.lo)) throw std::invalid_argument("height range must be positive and ordered");
  if (!(u_fb_scale >= 0.0)) throw std::invalid_argument("u_fb_scale must be non-negative");
}

namespace {

double affine(double raw, const Interval& range) {
  const double r = std::clamp(raw, -1.0, 1.0);
  if (r == 1.0) return range.hi;
  if (r == -1.0) return range.lo;
  return range.mid() + 0.5 * (range.hi - range.lo) * r;
}

}  // namespace

DecodedAction decode_action(const ActionVector& raw, const ActionRanges& ranges) {
  DecodedAction out;
  for (int j = 0; j < kNumJoints; ++j) out.u_fb[j] = std::clamp(raw[j], -1.0, 1.0) * ranges.u_fb_scale;
  out.rho.frequency = affine(raw[8], ranges.f);
  out.rho.amplitude = affine(raw[9], ranges.A);
  out.rho.height = affine(raw[10], ranges.h);
  return out;
}

ObsNormalizer::ObsNormalizer(int size) : mean_(Eigen::VectorXd::Zero(size)), m2_(Eigen::VectorXd::Zero(size)) {}

Eigen::VectorXd ObsNormalizer::variance() const {
  if (count_ < 2.0) return Eigen::VectorXd::Ones(mean_.size());
  return m2_ / count_;
}

void ObsNormalizer::update(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != mean_.size()) throw DimensionMismatch("normalizer update size mismatch");
  count_ += 1.0;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / count_;
  m2_ += delta.cwiseProduct(x - mean_);
}

void ObsNormalizer::merge(const ObsNormalizer& other) {
  if (other.count_ == 0.0) return;
  if (other.mean_.size() != mean_.size()) throw DimensionMismatch("normalizer merge size mismatch");
  if (count_ == 0.0) {
    *this = other;
    return;
  }
  const double n = count_ + other.count_;
  const Eigen::VectorXd delta = other.mean_ - mean_;
  mean_ += delta * (other.count_ / n);
  m2_ += other.m2_ + delta.cwiseProduct(delta) * (count_ * other.count_ / n);
  count_ = n;
}

Eigen::VectorXd ObsNormalizer::normalize(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != mean_.size()) throw DimensionMismatch("normalizer input size mismatch");
  const Eigen::VectorXd var = variance().cwiseMax(kMinVariance);
  return (x - mean_).cwiseQuotient(var.cwiseSqrt());
}

void ObsNormalizer::set_state(double count, Eigen::VectorXd mean, Eigen::VectorXd m2) {
  if (mean.size() != m2.size()) throw DimensionMismatch("normalizer state size mismatch");
  count_ = count;
  mean_ = std::move(mean);
  m2_ = std::move(m2);
}

Checkpoint make_checkpoint(Variant variant, std::uint64_t seed, const ActionRanges& ranges, double output_scale) {
  ranges.validate();
  Checkpoint ck;
  ck.variant = variant;
  ck.ranges = ranges;
  const int n = observation_length(variant);
  ck.normalizer = ObsNormalizer(n);
  ck.policy = make_initial_policy(n, seed, output_scale);
  return ck;
}

namespace {

constexpr char kMagic[8] = {'P', 'M', 'F', 'S', 'M', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t v = to_little(std::bit_cast<std::uint64_t>(d));
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("truncated checkpoint");
  return to_little(v);
}

double get_f64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("truncated checkpoint");
  return std::bit_cast<double>(to_little(v));
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(ck.variant));
  put_u32(out, static_cast<std::uint32_t>(ck.policy.input_size()));
  for (const Interval& r : {ck.ranges.f, ck.ranges.A, ck.ranges.h}) {
    put_f64(out, r.lo);
    put_f64(out, r.hi);
  }
  put_f64(out, ck.ranges.u_fb_scale);
  put_f64(out, ck.normalizer.count());
  for (double v : ck.normalizer.mean()) put_f64(out, v);
  for (double v : ck.normalizer.m2()) put_f64(out, v);
  put_u32(out, static_cast<std::uint32_t>(ck.policy.parameters().size()));
  for (double v : ck.policy.parameters()) put_f64(out, v);
  if (!out) throw CheckpointError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError("not a checkpoint file");
  if (get_u32(in) != kVersion) throw CheckpointError("unsupported checkpoint version");
  const std::uint32_t variant = get_u32(in);
  if (variant > 3) throw CheckpointError("unknown variant in checkpoint");
  Checkpoint ck;
  ck.variant = static_cast<Variant>(variant);
  const int n = static_cast<int>(get_u32(in));
  if (n != observation_length(ck.variant)) throw CheckpointError("observation length does not match variant");
  for (Interval* r : {&ck.ranges.f, &ck.ranges.A, &ck.ranges.h}) {
    r->lo = get_f64(in);
    r->hi = get_f64(in);
  }
  ck.ranges.u_fb_scale = get_f64(in);
  const double count = get_f64(in);
  Eigen::VectorXd mean(n), m2(n);
  for (int i = 0; i < n; ++i) mean[i] = get_f64(in);
  for (int i = 0; i < n; ++i) m2[i] = get_f64(in);
  ck.normalizer.set_state(count, std::move(mean), std::move(m2));
  const std::uint32_t count_params = get_u32(in);
  if (count_params != parameter_count(n)) throw CheckpointError("parameter count does not match network shape");
  Eigen::VectorXd params(count_params);
  for (std::uint32_t i = 0; i < count_params; ++i) params[i] = get_f64(in);
  ck.policy = Policy(n, std::move(params));
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  write_checkpoint(out, ck);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace pmfsm
