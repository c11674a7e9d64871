#pragma once

// Augmented random search over flat policy parameter vectors.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "pmfsm/episode.hpp"
#include "pmfsm/policy.hpp"

namespace pmfsm {

struct ArsConfig {
  double step_size = 0.02;        // alpha
  double exploration_std = 0.03;  // nu
  int num_directions = 16;        // N
  int top_directions = 8;         // b
  int rollouts_per_direction = 1;
  int total_iterations = 300;
  double episode_seconds = 25.0;
  std::uint64_t seed = 1;
  int threads = 1;
  int eval_episodes = 2;

  void validate() const;
};

struct RolloutOutcome {
  double total_return = 0.0;
  ObsNormalizer observation_stats;
};

/// Evaluates one perturbed parameter vector under a frozen normalizer.
using RolloutFn = std::function<RolloutOutcome(const Eigen::VectorXd& params, const ObsNormalizer& normalizer,
                                               std::uint64_t episode_seed)>;

struct IterationStats {
  int iteration = 0;
  double wall_seconds = 0.0;
  double mean_return = 0.0;
  double max_return = 0.0;
  double eval_return = 0.0;
  double update_norm = 0.0;
  bool skipped = false;  // degenerate returns, no update applied
};

struct IterationResult {
  Eigen::VectorXd params;
  ObsNormalizer normalizer;
  IterationStats stats;
};

/// Standard-normal direction vectors for one iteration.
std::vector<Eigen::VectorXd> sample_directions(std::uint64_t seed, int iteration, int count, Eigen::Index dim);

/// One ARS update. Pair k uses episode seeds derived from (seed, iteration,
/// k, rollout); both signs share them. Rollouts run on `config.threads`
/// workers and are reduced in index order, so the result does not depend on
/// the thread count. `directions` overrides sampling when non-empty.
IterationResult ars_iteration(const Eigen::VectorXd& params, const ObsNormalizer& normalizer, const ArsConfig& config,
                              int iteration, const RolloutFn& rollout,
                              const std::vector<Eigen::VectorXd>& directions = {});

/// Return -(theta - optimum)^2 for a one-dimensional parameter.
RolloutFn quadratic_rollout(double optimum = 3.0);

struct TrainOptions {
  Variant variant = Variant::kPmFsm;
  TrainingTerrain terrain = TrainingTerrain::kFlat;
  EnvConfig env;
  DomainRandomization randomization;
  ActionRanges ranges;
  ArsConfig ars;
  double init_output_scale = 1.0;
  /// Called after every iteration.
  std::function<void(const IterationStats&)> on_iteration;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<IterationStats> curve;
};

/// Episode rollout under domain randomization for the given variant.
RolloutFn policy_rollout(Variant variant, const ActionRanges& ranges, TrainingTerrain terrain, const EnvConfig& env,
                         const DomainRandomization& dr);

/// Mean return of deterministic flat-ground VEL episodes on fixed seeds.
double evaluate_checkpoint(const Checkpoint& checkpoint, const EnvConfig& env, std::uint64_t seed, int episodes);

TrainResult train(const TrainOptions& options);

}  // namespace pmfsm
