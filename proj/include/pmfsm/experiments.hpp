#pragma once

// Evaluation protocol: seeded task trials, metric aggregation, ablation grids,
// foot trajectory dumps and the CSV tables they are exported as.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmfsm/episode.hpp"
#include "pmfsm/optimizer.hpp"

namespace pmfsm {

struct TaskSpec {
  TaskKind task = TaskKind::kVel;
  Variant variant = Variant::kPmFsm;
  int num_trials = 10;
  double episode_seconds = 25.0;
  double expected_distance = 15.0;  // m, cap on the reported distance
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

class CheckpointMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  double v_target = 0.0;
  double velocity_error = 0.0;  // mean |v_R - v_T| over steps
  double distance = 0.0;        // net forward displacement, capped
  bool fell = false;
  double total_return = 0.0;
  int steps = 0;
};

struct MetricsReport {
  TaskSpec spec;
  std::vector<TrialRecord> trials;
  double mean_velocity_error = 0.0;
  double mean_distance = 0.0;
  double fall_rate = 0.0;
  double mean_return = 0.0;
  double std_velocity_error = 0.0;
  double std_distance = 0.0;

  /// Ē_v for VEL, D̄ otherwise.
  double headline() const;
  double headline_std() const;
};

/// Seed of trial i. Depends only on (base, i).
std::uint64_t trial_seed(std::uint64_t base, int trial);

/// Arithmetic means (and population standard deviations) of the records.
MetricsReport aggregate(const TaskSpec& spec, std::vector<TrialRecord> trials);

/// Runs a single trial; used by run_task and usable on its own.
TrialRecord run_trial(const TaskSpec& spec, const Checkpoint& checkpoint, const EnvConfig& env, int trial);

MetricsReport run_task(const TaskSpec& spec, const Checkpoint& checkpoint, const EnvConfig& env);

struct AblationCell {
  double mean = 0.0;
  double std = 0.0;
};

struct AblationRow {
  std::string label;
  std::vector<AblationCell> cells;  // one per column
};

struct AblationTable {
  std::vector<TaskKind> tasks;
  std::vector<AblationRow> rows;

  std::vector<std::string> headers() const;
};

/// "Ē_v (VEL)", "D̄ (PER)", "D̄ (STR)".
std::string metric_header(TaskKind task);

struct LabeledCheckpoint {
  std::string label;
  Checkpoint checkpoint;
};

/// One row per checkpoint in input order; one column per task.
AblationTable compare_variants(const std::vector<TaskKind>& tasks, const std::vector<LabeledCheckpoint>& checkpoints,
                               const TaskSpec& base, const EnvConfig& env);

std::string format_ablation_table(const AblationTable& table);

struct TrajectoryRow {
  double t = 0.0;
  double x = 0.0;
  double z = 0.0;
  int fsm_state = 0;
  int reflex = 0;
};

struct DumpSpec {
  TaskKind terrain = TaskKind::kVel;
  int leg = 1;  // FR
  std::uint64_t seed = 1;
  double seconds = 5.0;
  /// Overrides the policy with fixed modulation and zero feedback.
  std::optional<ModulationParams> fixed_rho;
};

/// World (x, z) of one foot per control step.
std::vector<TrajectoryRow> dump_foot_trajectory(const Checkpoint& checkpoint, const EnvConfig& env, const DumpSpec& spec);

// CSV tables. Each starts with "# pmfsm <version> seed=<s> config=<hash>",
// then a column header line.

struct TableHeader {
  std::string version;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

class TableFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string tool_version();

void write_trials_csv(std::ostream& out, const TableHeader& header, const std::vector<TrialRecord>& trials);
std::vector<TrialRecord> read_trials_csv(std::istream& in, TableHeader* header = nullptr);

void write_ablation_csv(std::ostream& out, const TableHeader& header, const AblationTable& table);
AblationTable read_ablation_csv(std::istream& in, TableHeader* header = nullptr);

void write_trajectory_csv(std::ostream& out, const TableHeader& header, const std::vector<TrajectoryRow>& rows);
std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in, TableHeader* header = nullptr);

void write_curve_csv(std::ostream& out, const TableHeader& header, const std::vector<IterationStats>& curve);
std::vector<IterationStats> read_curve_csv(std::istream& in, TableHeader* header = nullptr);

}  // namespace pmfsm
