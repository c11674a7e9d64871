#include "pmfsm/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

#include "pmfsm/rng.hpp"

namespace pmfsm {

void ArsConfig::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("ARS step size must be positive");
  if (!(exploration_std >= 0.0)) throw std::invalid_argument("ARS exploration std must be non-negative");
  if (num_directions < 1 || top_directions < 1 || top_directions > num_directions)
    throw std::invalid_argument("ARS needs 0 < top_directions <= num_directions");
  if (rollouts_per_direction < 1) throw std::invalid_argument("rollouts_per_direction must be at least 1");
  if (total_iterations < 0) throw std::invalid_argument("total_iterations must be non-negative");
  if (!(episode_seconds > 0.0)) throw std::invalid_argument("episode_seconds must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (eval_episodes < 0) throw std::invalid_argument("eval_episodes must be non-negative");
}

std::vector<Eigen::VectorXd> sample_directions(std::uint64_t seed, int iteration, int count, Eigen::Index dim) {
  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(iteration), 0xd1u}));
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd d(dim);
    // Box-Muller on our own uniforms keeps the stream independent of the
    // standard library's distribution implementation.
    for (Eigen::Index i = 0; i < dim; i += 2) {
      const double u1 = 1.0 - uniform(rng, 0.0, 1.0);
      const double u2 = uniform(rng, 0.0, 1.0);
      const double r = std::sqrt(-2.0 * std::log(u1));
      d[i] = r * std::cos(2.0 * std::numbers::pi * u2);
      if (i + 1 < dim) d[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
    }
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

template <typename F>
void parallel_for(int count, int threads, F&& body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < count; i += threads) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

IterationResult ars_iteration(const Eigen::VectorXd& params, const ObsNormalizer& normalizer, const ArsConfig& config,
                              int iteration, const RolloutFn& rollout, const std::vector<Eigen::VectorXd>& directions) {
  config.validate();
  const int n = config.num_directions;
  const int m = config.rollouts_per_direction;
  const std::vector<Eigen::VectorXd> dirs =
      directions.empty() ? sample_directions(config.seed, iteration, n, params.size()) : directions;
  if (static_cast<int>(dirs.size()) != n) throw std::invalid_argument("direction count does not match num_directions");

  // Job j = (k, sign, rollout): k = j / (2m), sign = (j / m) % 2.
  const int jobs = 2 * n * m;
  std::vector<RolloutOutcome> outcomes(static_cast<std::size_t>(jobs));
  parallel_for(jobs, config.threads, [&](int j) {
    const int k = j / (2 * m);
    const int sign = (j / m) % 2;
    const int r = j % m;
    const std::uint64_t episode_seed = derive_seed({config.seed, static_cast<std::uint64_t>(iteration),
                                                    static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)});
    const Eigen::VectorXd theta = params + (sign == 0 ? 1.0 : -1.0) * config.exploration_std * dirs[k];
    outcomes[static_cast<std::size_t>(j)] = rollout(theta, normalizer, episode_seed);
  });

  std::vector<double> plus(n, 0.0), minus(n, 0.0);
  ObsNormalizer merged = normalizer;
  double sum = 0.0, best = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < jobs; ++j) {
    const RolloutOutcome& o = outcomes[static_cast<std::size_t>(j)];
    const int k = j / (2 * m);
    ((j / m) % 2 == 0 ? plus : minus)[k] += o.total_return / m;
    sum += o.total_return;
    best = std::max(best, o.total_return);
    if (o.observation_stats.size() > 0) merged.merge(o.observation_stats);
  }

  IterationResult result;
  result.stats.iteration = iteration;
  result.stats.mean_return = sum / jobs;
  result.stats.max_return = best;
  result.normalizer = merged;
  result.params = params;

  bool degenerate = true;
  for (int k = 0; k < n; ++k) degenerate = degenerate && plus[k] == minus[k];
  if (degenerate) {
    result.stats.skipped = true;
    return result;
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::max(plus[a], minus[a]) > std::max(plus[b], minus[b]); });
  const int b = config.top_directions;
  double mean = 0.0;
  for (int i = 0; i < b; ++i) mean += plus[order[i]] + minus[order[i]];
  mean /= 2.0 * b;
  double var = 0.0;
  for (int i = 0; i < b; ++i) {
    var += (plus[order[i]] - mean) * (plus[order[i]] - mean);
    var += (minus[order[i]] - mean) * (minus[order[i]] - mean);
  }
  const double sigma = std::max(std::sqrt(var / (2.0 * b)), 1e-6);

  Eigen::VectorXd step = Eigen::VectorXd::Zero(params.size());
  for (int i = 0; i < b; ++i) step += (plus[order[i]] - minus[order[i]]) * dirs[order[i]];
  step *= config.step_size / (b * sigma);
  result.params = params + step;
  result.stats.update_norm = step.norm();
  return result;
}

RolloutFn quadratic_rollout(double optimum) {
  return [optimum](const Eigen::VectorXd& params, const ObsNormalizer&, std::uint64_t) {
    RolloutOutcome o;
    o.total_return = -(params[0] - optimum) * (params[0] - optimum);
    return o;
  };
}

RolloutFn policy_rollout(Variant variant, const ActionRanges& ranges, TrainingTerrain terrain, const EnvConfig& env,
                         const DomainRandomization& dr) {
  return [=](const Eigen::VectorXd& params, const ObsNormalizer& normalizer, std::uint64_t seed) {
    Checkpoint ck;
    ck.variant = variant;
    ck.ranges = ranges;
    ck.normalizer = normalizer;
    ck.policy = Policy(observation_length(variant), params);
    EpisodeOptions options;
    options.collect_observations = true;
    const EpisodeResult r = run_episode(ck, env, make_training_setup(terrain, env, dr, seed), options);
    return RolloutOutcome{r.total_return, r.observation_stats};
  };
}

double evaluate_checkpoint(const Checkpoint& checkpoint, const EnvConfig& env, std::uint64_t seed, int episodes) {
  if (episodes <= 0) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < episodes; ++i) {
    const std::uint64_t s = derive_seed({seed, 0xe7a1u, static_cast<std::uint64_t>(i)});
    sum += run_episode(checkpoint, env, make_task_setup(TaskKind::kVel, env, s)).total_return;
  }
  return sum / episodes;
}

TrainResult train(const TrainOptions& options) {
  options.ars.validate();
  options.randomization.validate();
  EnvConfig env = options.env;
  env.episode_seconds = options.ars.episode_seconds;
  env.validate();

  TrainResult result;
  result.checkpoint = make_checkpoint(options.variant, options.ars.seed, options.ranges, options.init_output_scale);
  if (options.ars.total_iterations == 0) return result;

  const RolloutFn rollout =
      policy_rollout(options.variant, result.checkpoint.ranges, options.terrain, env, options.randomization);
  const auto start = std::chrono::steady_clock::now();
  for (int it = 0; it < options.ars.total_iterations; ++it) {
    IterationResult step = ars_iteration(result.checkpoint.policy.parameters(), result.checkpoint.normalizer,
                                         options.ars, it, rollout);
    result.checkpoint.policy.parameters() = step.params;
    result.checkpoint.normalizer = step.normalizer;
    step.stats.eval_return = evaluate_checkpoint(result.checkpoint, env, options.ars.seed, options.ars.eval_episodes);
    step.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.curve.push_back(step.stats);
    if (options.on_iteration) options.on_iteration(step.stats);
  }
  return result;
}

}  // namespace pmfsm
