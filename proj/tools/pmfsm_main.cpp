// pmfsm command-line front end: train, eval, compare, gait check, dump-traj.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmfsm/config.hpp"
#include "pmfsm/experiments.hpp"

namespace fs = std::filesystem;
using namespace pmfsm;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// Errors a user can fix by changing the command line, config or input files.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool quiet = false;
};

RunConfig load_run_config(const Globals& g) {
  RunConfig c;
  if (!g.config_path.empty()) {
    c = load_config(g.config_path);
  } else {
    c.validate();
  }
  if (g.seed) c.ars.seed = *g.seed;
  return c;
}

std::uint64_t run_seed(const Globals& g, const RunConfig& c) { return g.seed.value_or(c.ars.seed); }

TableHeader table_header(const Globals& g, const RunConfig& c) {
  return {tool_version(), run_seed(g, c), config_hash(c)};
}

fs::path output_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

template <typename Parse>
auto parse_name(Parse parse, const std::string& text, const std::string& what) {
  try {
    return parse(text);
  } catch (const std::exception&) {
    throw ValidationError("unknown " + what + " '" + text + "'");
  }
}

int parse_leg(const std::string& text) {
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (kLegNames[static_cast<std::size_t>(leg)] == text) return leg;
  throw ValidationError("unknown leg '" + text + "', expected FL, FR, RL or RR");
}

TaskSpec task_spec(const RunConfig& c, const Globals& g, TaskKind task, Variant variant, int trials) {
  TaskSpec spec;
  spec.task = task;
  spec.variant = variant;
  spec.num_trials = trials > 0 ? trials : c.experiments.num_trials;
  spec.episode_seconds = c.env.episode_seconds;
  spec.expected_distance = c.experiments.expected_distance;
  spec.seed = run_seed(g, c);
  spec.threads = c.experiments.threads;
  return spec;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string variant = "PM-FSM";
  std::string terrain = "flat";
  int iterations = 0;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  const RunConfig c = load_run_config(g);
  TrainOptions opt;
  opt.variant = parse_name([](const std::string& s) { return parse_variant(s); }, a.variant, "variant");
  if (a.terrain == "flat") {
    opt.terrain = TrainingTerrain::kFlat;
  } else if (a.terrain == "stairs") {
    opt.terrain = TrainingTerrain::kStairs;
  } else {
    throw ValidationError("unknown terrain '" + a.terrain + "', expected flat or stairs");
  }
  opt.env = c.env;
  opt.randomization = c.randomization;
  opt.ranges = c.ranges;
  opt.ars = c.ars;
  if (a.iterations > 0) opt.ars.total_iterations = a.iterations;
  opt.on_iteration = [&](const IterationStats& s) {
    if (!g.quiet)
      std::cout << "iter " << s.iteration << "  return " << s.mean_return << "  eval " << s.eval_return << "  |dθ| "
                << s.update_norm << "  " << s.wall_seconds << " s" << std::endl;
  };
  const TrainResult result = train(opt);

  const std::string stem = std::string(variant_name(opt.variant)) + "_" + a.terrain + "_seed" +
                           std::to_string(opt.ars.seed);
  const fs::path ck_path = output_path(g, stem + ".ckpt");
  save_checkpoint(ck_path.string(), result.checkpoint);
  const fs::path curve_path = output_path(g, stem + "_curve.csv");
  auto out = open_output(curve_path);
  write_curve_csv(out, table_header(g, c), result.curve);
  if (!g.quiet) std::cout << "wrote " << ck_path.string() << " and " << curve_path.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string task;
  std::string checkpoint;
  int trials = 0;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  const RunConfig c = load_run_config(g);
  const TaskKind task = parse_name([](const std::string& s) { return parse_task(s); }, a.task, "task");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const TaskSpec spec = task_spec(c, g, task, ck.variant, a.trials);
  const MetricsReport report = run_task(spec, ck, c.env);

  const fs::path path = output_path(g, "eval_" + std::string(task_name(task)) + ".csv");
  auto out = open_output(path);
  write_trials_csv(out, table_header(g, c), report.trials);
  if (!g.quiet) {
    std::cout << variant_name(ck.variant) << " on " << task_name(task) << ", " << spec.num_trials << " trials\n";
    std::cout << "  " << metric_header(task) << " = " << report.headline() << " ± " << report.headline_std() << '\n';
    std::cout << "  fall rate = " << report.fall_rate << ", mean return = " << report.mean_return << '\n';
    std::cout << "wrote " << path.string() << '\n';
  }
  return 0;
}

struct CompareArgs {
  std::vector<std::string> tasks;
  std::vector<std::string> checkpoints;
  int trials = 0;
};

int cmd_compare(const Globals& g, const CompareArgs& a) {
  const RunConfig c = load_run_config(g);
  std::vector<TaskKind> tasks;
  for (const auto& t : a.tasks) tasks.push_back(parse_name([](const std::string& s) { return parse_task(s); }, t, "task"));
  if (tasks.empty()) tasks = {TaskKind::kVel, TaskKind::kPer, TaskKind::kStr};
  std::vector<LabeledCheckpoint> cks;
  for (const auto& path : a.checkpoints) {
    Checkpoint ck = load_checkpoint(path);
    cks.push_back({std::string(variant_name(ck.variant)) + " [" + fs::path(path).filename().string() + "]", std::move(ck)});
  }
  const TaskSpec base = task_spec(c, g, tasks.front(), Variant::kPmFsm, a.trials);
  const AblationTable table = compare_variants(tasks, cks, base, c.env);

  const fs::path path = output_path(g, "compare.csv");
  auto out = open_output(path);
  write_ablation_csv(out, table_header(g, c), table);
  if (!g.quiet) std::cout << format_ablation_table(table) << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_gait_check(const std::string& file) {
  GaitMatrix gait;
  try {
    gait = load_gait_matrix(file);
  } catch (const std::exception& e) {
    throw ValidationError(e.what());
  }
  if (const auto error = validate_gait_matrix(gait)) {
    std::cerr << "invalid gait matrix: " << error->message << '\n';
    return kExitValidation;
  }
  const SubAutomataMatrix m = expand_gait_matrix(gait);
  std::cout << "gait matrix, " << gait.rows.size() << " rows:\n"
            << format_gait_matrix(gait) << "valid\n"
            << "sub-automata expansion, " << m.num_states() << " states:\n"
            << format_sub_automata(m);
  return 0;
}

struct DumpArgs {
  std::string checkpoint;
  std::string terrain = "VEL";
  std::string leg = "FR";
  double seconds = 5.0;
};

int cmd_dump(const Globals& g, const DumpArgs& a) {
  const RunConfig c = load_run_config(g);
  DumpSpec spec;
  spec.terrain = parse_name([](const std::string& s) { return parse_task(s); }, a.terrain, "terrain");
  spec.leg = parse_leg(a.leg);
  spec.seed = run_seed(g, c);
  spec.seconds = a.seconds;
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const auto rows = dump_foot_trajectory(ck, c.env, spec);
  const fs::path path = output_path(g, "traj_" + a.leg + "_" + a.terrain + ".csv");
  auto out = open_output(path);
  write_trajectory_csv(out, table_header(g, c), rows);
  if (!g.quiet) std::cout << rows.size() << " steps, wrote " << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gait state machine locomotion: training, evaluation and trajectory export"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", tool_version());

  Globals g;
  app.add_option("--config", g.config_path, "INI configuration file")->check(CLI::ExistingFile);
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Base seed");
  app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a policy with augmented random search");
  train_cmd->add_option("--variant", train_args.variant, "PMTG, PMTG-contact, PM-FSM or PM-FSM-reflex")
      ->capture_default_str();
  train_cmd->add_option("--terrain", train_args.terrain, "flat or stairs")->capture_default_str();
  train_cmd->add_option("--iterations", train_args.iterations, "Override ars.total_iterations");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a task");
  eval_cmd->add_option("--task", eval_args.task, "VEL, PER or STR")->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--trials", eval_args.trials, "Override experiments.num_trials");

  CompareArgs compare_args;
  auto* compare_cmd = app.add_subcommand("compare", "Ablation grid over checkpoints");
  compare_cmd->add_option("--task", compare_args.tasks, "Task column, repeatable (default: all)");
  compare_cmd->add_option("--trials", compare_args.trials, "Override experiments.num_trials");
  compare_cmd->add_option("checkpoints", compare_args.checkpoints, "Two or more checkpoint files")
      ->required()
      ->expected(2, -1);

  std::string gait_file;
  auto* gait_cmd = app.add_subcommand("gait", "Gait matrix tools");
  gait_cmd->require_subcommand(1);
  gait_cmd->fallthrough();
  auto* check_cmd = gait_cmd->add_subcommand("check", "Validate a gait matrix and print its expansion");
  check_cmd->add_option("file", gait_file, "Gait matrix file")->required()->check(CLI::ExistingFile);

  DumpArgs dump_args;
  auto* dump_cmd = app.add_subcommand("dump-traj", "Export one foot's trajectory");
  dump_cmd->add_option("--checkpoint", dump_args.checkpoint, "Checkpoint file")->required();
  dump_cmd->add_option("--terrain", dump_args.terrain, "VEL (flat), PER or STR")->capture_default_str();
  dump_cmd->add_option("--leg", dump_args.leg, "FL, FR, RL or RR")->capture_default_str();
  dump_cmd->add_option("--seconds", dump_args.seconds, "Episode length")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    while (!failing->get_subcommands().empty()) failing = failing->get_subcommands().front();
    std::cerr << failing->help();
    return kExitValidation;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*train_cmd) return cmd_train(g, train_args);
    if (*eval_cmd) return cmd_eval(g, eval_args);
    if (*compare_cmd) return cmd_compare(g, compare_args);
    if (*check_cmd) return cmd_gait_check(gait_file);
    if (*dump_cmd) return cmd_dump(g, dump_args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const GaitMatrixError& e) {
    std::cerr << "invalid gait matrix: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CheckpointMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}
