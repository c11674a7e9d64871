#include <cmath>

#include <doctest.h>

#include "pmfsm/optimizer.hpp"

using namespace pmfsm;

TEST_CASE("ARS solves the one-dimensional quadratic") {
  ArsConfig cfg;
  cfg.num_directions = 8;
  cfg.top_directions = 4;
  cfg.step_size = 0.1;
  cfg.exploration_std = 0.1;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
  ObsNormalizer norm;
  const RolloutFn f = quadratic_rollout(3.0);
  int it = 0;
  for (; it < 200 && std::abs(theta[0] - 3.0) >= 0.1; ++it) theta = ars_iteration(theta, norm, cfg, it, f).params;
  CHECK(std::abs(theta[0] - 3.0) < 0.1);
  CHECK(it <= 200);
}

TEST_CASE("updates do not depend on the thread count") {
  ArsConfig cfg;
  cfg.num_directions = 6;
  cfg.top_directions = 3;
  const RolloutFn f = [](const Eigen::VectorXd& p, const ObsNormalizer&, std::uint64_t seed) {
    RolloutOutcome o;
    o.total_return = -(p.array() - 0.5).square().sum() + 1e-3 * static_cast<double>(seed % 97);
    o.observation_stats = ObsNormalizer(2);
    o.observation_stats.update(Eigen::Vector2d(p[0], static_cast<double>(seed % 13)));
    return o;
  };
  const Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
  const ObsNormalizer norm(2);
  cfg.threads = 1;
  const auto a = ars_iteration(theta, norm, cfg, 3, f);
  cfg.threads = 4;
  const auto b = ars_iteration(theta, norm, cfg, 3, f);
  CHECK((a.params - b.params).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(a.normalizer.mean() == b.normalizer.mean());
  CHECK(a.stats.mean_return == b.stats.mean_return);
}

TEST_CASE("negated directions give the same update") {
  ArsConfig cfg;
  cfg.num_directions = 8;
  cfg.top_directions = 4;
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(4, 0.2);
  auto dirs = sample_directions(cfg.seed, 0, cfg.num_directions, theta.size());
  auto neg = dirs;
  for (auto& d : neg) d = -d;
  const RolloutFn f = [](const Eigen::VectorXd& p, const ObsNormalizer&, std::uint64_t) {
    RolloutOutcome o;
    o.total_return = -(p.array() - Eigen::ArrayXd::LinSpaced(4, 0.0, 1.0)).square().sum();
    return o;
  };
  const auto a = ars_iteration(theta, {}, cfg, 0, f, dirs);
  const auto b = ars_iteration(theta, {}, cfg, 0, f, neg);
  CHECK((a.params - b.params).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero exploration skips the update") {
  ArsConfig cfg;
  cfg.exploration_std = 0.0;
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(3, 1.0);
  const auto r = ars_iteration(theta, {}, cfg, 0, quadratic_rollout(3.0));
  CHECK(r.stats.skipped);
  CHECK(r.params == theta);
  CHECK(r.stats.update_norm == 0.0);
}

TEST_CASE("iteration stats bookkeeping") {
  ArsConfig cfg;
  cfg.num_directions = 4;
  cfg.top_directions = 2;
  const auto r = ars_iteration(Eigen::VectorXd::Zero(1), {}, cfg, 7, quadratic_rollout(3.0));
  CHECK(r.stats.iteration == 7);
  CHECK(r.stats.max_return >= r.stats.mean_return);
  CHECK(r.stats.update_norm == doctest::Approx((r.params - Eigen::VectorXd::Zero(1)).norm()));
}

TEST_CASE("directions are seeded and standard normal") {
  const auto a = sample_directions(1, 2, 400, 50);
  const auto b = sample_directions(1, 2, 400, 50);
  const auto c = sample_directions(1, 3, 400, 50);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    sum += a[i].sum();
    sq += a[i].squaredNorm();
  }
  CHECK(a[0] != c[0]);
  CHECK(std::abs(sum / 20000.0) < 0.05);
  CHECK(sq / 20000.0 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("config validation") {
  ArsConfig cfg;
  cfg.top_directions = 20;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("policy rollouts are finite, deterministic and bounded") {
  EnvConfig env;
  env.episode_seconds = 5.0;
  const DomainRandomization dr;
  for (Variant v : {Variant::kPmtg, Variant::kPmFsm}) {
    const RolloutFn f = policy_rollout(v, {}, TrainingTerrain::kFlat, env, dr);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count(observation_length(v))));
    const ObsNormalizer norm(observation_length(v));
    const auto a = f(zero, norm, 11);
    const auto b = f(zero, norm, 11);
    CHECK(std::isfinite(a.total_return));
    CHECK(a.total_return == b.total_return);
    CHECK(a.total_return <= 200 * env.reward.v_max);
    CHECK(a.observation_stats.count() > 0);
  }
}

TEST_CASE("zero iterations return the initial checkpoint") {
  TrainOptions opt;
  opt.ars.total_iterations = 0;
  const TrainResult r = train(opt);
  CHECK(r.curve.empty());
  CHECK(r.checkpoint.policy.parameters() ==
        make_checkpoint(opt.variant, opt.ars.seed, opt.ranges, opt.init_output_scale).policy.parameters());
}

TEST_CASE("curve length equals the iteration count") {
  TrainOptions opt;
  opt.env.episode_seconds = 1.0;
  opt.ars.episode_seconds = 1.0;
  opt.ars.total_iterations = 2;
  opt.ars.num_directions = 2;
  opt.ars.top_directions = 1;
  opt.ars.eval_episodes = 1;
  int calls = 0;
  opt.on_iteration = [&](const IterationStats&) { ++calls; };
  const TrainResult r = train(opt);
  CHECK(r.curve.size() == 2);
  CHECK(calls == 2);
}
