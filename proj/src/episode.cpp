#include "pmfsm/episode.hpp"

#include <algorithm>
#include <cmath>

#include "pmfsm/rng.hpp"

namespace pmfsm {

void DomainRandomization::validate() const {
  if (!(missing_step_prob >= 0.0 && missing_step_prob < 1.0))
    throw std::invalid_argument("missing_step_prob must be in [0, 1)");
  if (!(com_offset_range >= 0.0 && com_offset_range <= 0.05))
    throw std::invalid_argument("com_offset_range must be in [0, 0.05]");
}

void EnvConfig::validate() const {
  sim.validate();
  geometry.validate();
  fsm.timing.validate();
  reward.validate();
  fall.validate();
  if (!(episode_seconds > 0.0)) throw std::invalid_argument("episode_seconds must be positive");
  if (auto err = validate_gait_matrix(gait)) throw GaitMatrixError(*err);
}

EpisodeSetup make_task_setup(TaskKind task, const EnvConfig& env, std::uint64_t seed) {
  EpisodeSetup s;
  s.seed = seed;
  s.episode_seconds = env.episode_seconds;
  s.profile = make_velocity_profile(task, seed, env.episode_seconds, env.velocity);
  const double course = env.stairs.approach_length + env.stairs.stair_zone_length + env.stairs.exit_length;
  switch (task) {
    case TaskKind::kVel:
      s.terrain = flat_terrain(course, env.stairs.friction);
      break;
    case TaskKind::kPer:
      s.terrain = flat_terrain(course, env.stairs.friction);
      s.perturbations = make_perturbations(seed, env.episode_seconds, env.test_perturbations);
      break;
    case TaskKind::kStr:
      s.terrain = make_stairs(seed, env.stairs);
      break;
  }
  return s;
}

EpisodeSetup make_training_setup(TrainingTerrain terrain, const EnvConfig& env, const DomainRandomization& dr,
                                 std::uint64_t seed) {
  dr.validate();
  EpisodeSetup s;
  if (terrain == TrainingTerrain::kFlat) {
    s = make_task_setup(TaskKind::kVel, env, seed);
  } else {
    s = make_task_setup(TaskKind::kStr, env, seed);
  }
  s.perturbations = make_perturbations(derive_seed({seed, 0x71u}), env.episode_seconds, dr.perturbations);
  s.missing_step_prob = dr.missing_step_prob;
  Rng rng(derive_seed({seed, 0xc0u}));
  for (int i = 0; i < 3; ++i) s.com_offset[i] = uniform(rng, -dr.com_offset_range, dr.com_offset_range);
  return s;
}

EpisodeResult run_episode(const Checkpoint& checkpoint, const EnvConfig& env, const EpisodeSetup& setup,
                          const EpisodeOptions& options) {
  const Variant variant = checkpoint.variant;
  if (checkpoint.policy.input_size() != observation_length(variant))
    throw DimensionMismatch("checkpoint policy does not match its variant");

  SimConfig sim_config = env.sim;
  sim_config.com_offset = setup.com_offset;
  Simulator sim(sim_config, env.geometry, setup.terrain, setup.perturbations);
  sim.reset(sim.standing_state(0.0));
  const double nominal = sim.height_above_ground();
  const double start_x = sim.state().position.x();

  FsmControllerConfig fsm_config = env.fsm;
  fsm_config.reflexes_enabled = variant == Variant::kPmFsmReflex;
  std::optional<FsmController> fsm;
  if (uses_fsm(variant)) {
    fsm.emplace(expand_gait_matrix(env.gait), env.geometry, fsm_config);
    fsm->reset(sim.state().joint_angles);
  }
  double tg_phase = 0.0;

  Rng drop_rng(derive_seed({setup.seed, 0xd209u}));
  const double dt = env.sim.control_dt;
  const int max_steps = static_cast<int>(std::lround(setup.episode_seconds / dt));

  EpisodeResult result;
  if (options.collect_observations) result.observation_stats = ObsNormalizer(observation_length(variant));
  JointVector targets = sim.state().joint_angles;
  double velocity_error_sum = 0.0;
  ModulationParams rho;

  for (int k = 0; k < max_steps; ++k) {
    const double t = k * dt;
    const double v_t = setup.profile.at(t);
    const RobotState& state = sim.state();

    const bool dropped = setup.missing_step_prob > 0.0 && uniform(drop_rng, 0.0, 1.0) < setup.missing_step_prob;
    if (!dropped) {
      ObservationExtras extras;
      if (fsm) {
        extras.fsm = &fsm->snapshot();
      } else {
        extras.tg_phase = tg_phase;
      }
      const ObsVector obs = observe(state, v_t, variant, extras);
      if (options.collect_observations) result.observation_stats.update(obs);
      DecodedAction action;
      if (options.fixed_rho) {
        action.rho = *options.fixed_rho;
      } else {
        action = decode_action(checkpoint.policy.forward(checkpoint.normalizer.normalize(obs)), checkpoint.ranges);
      }
      rho = action.rho;
      JointVector base;
      if (fsm) {
        base = fsm->update(state.contact_flags, state.joint_angles, rho);
      } else {
        tg_phase = tg_step(tg_phase, rho.frequency, dt);
        base = tg_targets(tg_phase, rho.amplitude, rho.height, env.geometry);
      }
      targets = base + action.u_fb;
    }

    const StepResult step = sim.step(targets);
    const bool fell = step.diverged || is_fallen(sim.state(), sim.height_above_ground(), nominal, env.fall);
    const RewardBreakdown r = reward(sim.state(), v_t, step.torque_rms, fell, env.reward);
    result.total_return += r.total;
    velocity_error_sum += std::abs(sim.state().linear_velocity.x() - v_t);
    ++result.steps;

    if (options.on_step) {
      StepRecord rec;
      rec.step = k;
      rec.time = (k + 1) * dt;
      rec.state = &sim.state();
      for (int leg = 0; leg < kNumLegs; ++leg) rec.feet[leg] = sim.foot_position(leg);
      rec.targets = targets;
      rec.v_target = v_t;
      rec.reward = r;
      if (fsm) {
        rec.fsm_state = fsm->snapshot().state_index;
        rec.reflex = fsm->snapshot().reflex.kind;
      }
      rec.rho = rho;
      options.on_step(rec);
    }
    if (fell) {
      result.fell = true;
      result.diverged = step.diverged;
      break;
    }
  }

  if (!result.diverged) {
    result.distance = std::clamp(sim.state().position.x() - start_x, 0.0, setup.terrain.length);
  }
  result.mean_velocity_error = result.steps > 0 ? velocity_error_sum / result.steps : 0.0;
  if (fsm) {
    result.watchdog_transitions = fsm->watchdog_count();
    for (int i = 1; i < 4; ++i) result.reflex_counts[i] = fsm->reflex_count(static_cast<ReflexKind>(i));
  }
  return result;
}

}  // namespace pmfsm
