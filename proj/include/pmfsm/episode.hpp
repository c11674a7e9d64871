#pragma once

// The closed control loop: observe, policy, decode, gait generator, simulate.

#include <cstdint>
#include <functional>
#include <optional>

#include "pmfsm/controller.hpp"
#include "pmfsm/gait_fsm.hpp"
#include "pmfsm/policy.hpp"
#include "pmfsm/simulator.hpp"
#include "pmfsm/task.hpp"
#include "pmfsm/terrain.hpp"

namespace pmfsm {

struct DomainRandomization {
  double missing_step_prob = 0.05;
  double com_offset_range = 0.02;  // m, half-width of the uniform box
  PerturbationConfig perturbations{true, 10.0, 30.0, 2.0, 0.2};

  void validate() const;
};

/// Everything about the robot and the task that is fixed across episodes.
struct EnvConfig {
  SimConfig sim;
  LegGeometry geometry;
  FsmControllerConfig fsm;
  GaitMatrix gait = trot_gait();
  RewardConfig reward;
  FallConfig fall;
  VelocityRange velocity;
  StairsConfig stairs;
  PerturbationConfig test_perturbations{true, 10.0, 20.0, 2.0, 0.2};
  double episode_seconds = 25.0;

  void validate() const;
};

/// Per-episode draw: terrain, forces, target profile and randomization.
struct EpisodeSetup {
  Terrain terrain;
  PerturbationSchedule perturbations;
  VelocityProfile profile;
  double episode_seconds = 25.0;
  double missing_step_prob = 0.0;
  Eigen::Vector3d com_offset = Eigen::Vector3d::Zero();
  std::uint64_t seed = 0;
};

/// Evaluation setup for a task: VEL and PER on flat ground, STR on stairs.
EpisodeSetup make_task_setup(TaskKind task, const EnvConfig& env, std::uint64_t seed);

enum class TrainingTerrain : std::uint8_t { kFlat = 0, kStairs = 1 };

/// Training setup with domain randomization. Flat terrain samples the VEL
/// velocity range; stairs use the STR course with perturbations.
EpisodeSetup make_training_setup(TrainingTerrain terrain, const EnvConfig& env, const DomainRandomization& dr,
                                 std::uint64_t seed);

struct StepRecord {
  int step = 0;
  double time = 0.0;
  const RobotState* state = nullptr;
  std::array<Eigen::Vector3d, kNumLegs> feet{};
  JointVector targets = JointVector::Zero();
  double v_target = 0.0;
  RewardBreakdown reward;
  int fsm_state = 0;
  ReflexKind reflex = ReflexKind::kNone;
  ModulationParams rho;
};

struct EpisodeResult {
  double total_return = 0.0;
  int steps = 0;
  bool fell = false;
  bool diverged = false;
  double distance = 0.0;               // net forward displacement, capped at terrain length
  double mean_velocity_error = 0.0;    // mean |v_R - v_T| over steps
  int watchdog_transitions = 0;
  std::array<int, 4> reflex_counts{};  // indexed by ReflexKind
  ObsNormalizer observation_stats;     // filled when collect_observations is set
};

struct EpisodeOptions {
  bool collect_observations = false;
  std::function<void(const StepRecord&)> on_step;
  /// Overrides the policy output with fixed modulation and zero feedback.
  std::optional<ModulationParams> fixed_rho;
};

EpisodeResult run_episode(const Checkpoint& checkpoint, const EnvConfig& env, const EpisodeSetup& setup,
                          const EpisodeOptions& options = {});

}  // namespace pmfsm
