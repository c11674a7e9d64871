#include "pmfsm/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "pmfsm/rng.hpp"

#ifndef PMFSM_VERSION
#define PMFSM_VERSION "0.0.0"
#endif

namespace pmfsm {

void TaskSpec::validate() const {
  if (num_trials < 1) throw std::invalid_argument("num_trials must be at least 1");
  if (!(episode_seconds > 0.0)) throw std::invalid_argument("episode_seconds must be positive");
  if (!(expected_distance > 0.0)) throw std::invalid_argument("expected_distance must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

double MetricsReport::headline() const {
  return spec.task == TaskKind::kVel ? mean_velocity_error : mean_distance;
}

double MetricsReport::headline_std() const {
  return spec.task == TaskKind::kVel ? std_velocity_error : std_distance;
}

std::uint64_t trial_seed(std::uint64_t base, int trial) {
  return derive_seed({base, 0x7a5cu, static_cast<std::uint64_t>(trial)});
}

namespace {

double mean_of(const std::vector<TrialRecord>& trials, double TrialRecord::*field) {
  double sum = 0.0;
  for (const auto& t : trials) sum += t.*field;
  return sum / static_cast<double>(trials.size());
}

double std_of(const std::vector<TrialRecord>& trials, double TrialRecord::*field, double mean) {
  double sum = 0.0;
  for (const auto& t : trials) sum += (t.*field - mean) * (t.*field - mean);
  return std::sqrt(sum / static_cast<double>(trials.size()));
}

template <typename Fn>
void parallel_for(int count, int threads, Fn fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

MetricsReport aggregate(const TaskSpec& spec, std::vector<TrialRecord> trials) {
  MetricsReport r;
  r.spec = spec;
  r.trials = std::move(trials);
  if (r.trials.empty()) return r;
  r.mean_velocity_error = mean_of(r.trials, &TrialRecord::velocity_error);
  r.mean_distance = mean_of(r.trials, &TrialRecord::distance);
  r.mean_return = mean_of(r.trials, &TrialRecord::total_return);
  r.std_velocity_error = std_of(r.trials, &TrialRecord::velocity_error, r.mean_velocity_error);
  r.std_distance = std_of(r.trials, &TrialRecord::distance, r.mean_distance);
  int falls = 0;
  for (const auto& t : r.trials) falls += t.fell ? 1 : 0;
  r.fall_rate = static_cast<double>(falls) / static_cast<double>(r.trials.size());
  return r;
}

TrialRecord run_trial(const TaskSpec& spec, const Checkpoint& checkpoint, const EnvConfig& env, int trial) {
  EnvConfig trial_env = env;
  trial_env.episode_seconds = spec.episode_seconds;
  const std::uint64_t seed = trial_seed(spec.seed, trial);
  const EpisodeSetup setup = make_task_setup(spec.task, trial_env, seed);
  const EpisodeResult result = run_episode(checkpoint, trial_env, setup);

  TrialRecord rec;
  rec.trial = trial;
  rec.seed = seed;
  rec.v_target = setup.profile.v_target;
  rec.velocity_error = result.mean_velocity_error;
  rec.distance = std::clamp(result.distance, 0.0, spec.expected_distance);
  rec.fell = result.fell || result.diverged;
  rec.total_return = result.total_return;
  rec.steps = result.steps;
  return rec;
}

MetricsReport run_task(const TaskSpec& spec, const Checkpoint& checkpoint, const EnvConfig& env) {
  spec.validate();
  if (checkpoint.variant != spec.variant)
    throw CheckpointMismatch("checkpoint is " + std::string(variant_name(checkpoint.variant)) + ", task expects " +
                             std::string(variant_name(spec.variant)));
  std::vector<TrialRecord> trials(static_cast<std::size_t>(spec.num_trials));
  parallel_for(spec.num_trials, spec.threads,
               [&](int i) { trials[static_cast<std::size_t>(i)] = run_trial(spec, checkpoint, env, i); });
  return aggregate(spec, std::move(trials));
}

std::string metric_header(TaskKind task) {
  const std::string name(task_name(task));
  return (task == TaskKind::kVel ? "Ē_v (" : "D̄ (") + name + ")";
}

std::vector<std::string> AblationTable::headers() const {
  std::vector<std::string> h;
  for (TaskKind t : tasks) h.push_back(metric_header(t));
  return h;
}

AblationTable compare_variants(const std::vector<TaskKind>& tasks, const std::vector<LabeledCheckpoint>& checkpoints,
                               const TaskSpec& base, const EnvConfig& env) {
  AblationTable table;
  table.tasks = tasks;
  for (const auto& [label, checkpoint] : checkpoints) {
    AblationRow row;
    row.label = label;
    for (TaskKind task : tasks) {
      TaskSpec spec = base;
      spec.task = task;
      spec.variant = checkpoint.variant;
      const MetricsReport report = run_task(spec, checkpoint, env);
      row.cells.push_back({report.headline(), report.headline_std()});
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string format_ablation_table(const AblationTable& table) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"variant"};
  for (const auto& h : table.headers()) header.push_back(h);
  cells.push_back(header);
  for (const auto& row : table.rows) {
    std::vector<std::string> line{row.label};
    for (const auto& c : row.cells) {
      std::ostringstream os;
      os << std::fixed << std::setprecision(3) << c.mean << " ± " << c.std;
      line.push_back(os.str());
    }
    cells.push_back(line);
  }
  // Column widths in code points so the multibyte headers line up.
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xc0) != 0x80; }));
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], width(line[i]));
  std::ostringstream os;
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      os << line[i];
      if (i + 1 < line.size()) os << std::string(widths[i] - width(line[i]) + 2, ' ');
    }
    os << '\n';
  }
  return os.str();
}

std::vector<TrajectoryRow> dump_foot_trajectory(const Checkpoint& checkpoint, const EnvConfig& env, const DumpSpec& spec) {
  if (spec.leg < 0 || spec.leg >= kNumLegs) throw std::invalid_argument("leg must be in [0, 3]");
  if (!(spec.seconds > 0.0)) throw std::invalid_argument("seconds must be positive");
  EnvConfig dump_env = env;
  dump_env.episode_seconds = spec.seconds;
  const EpisodeSetup setup = make_task_setup(spec.terrain, dump_env, spec.seed);
  std::vector<TrajectoryRow> rows;
  EpisodeOptions options;
  options.fixed_rho = spec.fixed_rho;
  options.on_step = [&](const StepRecord& r) {
    const auto& foot = r.feet[static_cast<std::size_t>(spec.leg)];
    rows.push_back({r.time, foot.x(), foot.z(), r.fsm_state, static_cast<int>(r.reflex)});
  };
  run_episode(checkpoint, dump_env, setup, options);
  return rows;
}

std::string tool_version() { return PMFSM_VERSION; }

namespace {

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_preamble(std::ostream& out, const TableHeader& h, const std::vector<std::string>& columns) {
  out << "# pmfsm " << h.version << " seed=" << h.seed << " config=" << std::hex << std::setw(16)
      << std::setfill('0') << h.config_hash << std::dec << std::setfill(' ') << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

TableHeader parse_comment(const std::string& line) {
  TableHeader h;
  std::istringstream is(line);
  std::string hash, tool, seed, config;
  is >> hash >> tool >> h.version >> seed >> config;
  if (hash != "#" || tool != "pmfsm" || seed.rfind("seed=", 0) != 0 || config.rfind("config=", 0) != 0)
    throw TableFormatError("missing or malformed table header comment");
  try {
    h.seed = std::stoull(seed.substr(5));
    h.config_hash = std::stoull(config.substr(7), nullptr, 16);
  } catch (const std::exception&) {
    throw TableFormatError("malformed table header comment");
  }
  return h;
}

/// Reads the comment and column lines, then calls `row` with each data line's fields.
template <typename RowFn>
void read_table(std::istream& in, const std::vector<std::string>& expected, TableHeader* header, RowFn row) {
  std::string line;
  if (!std::getline(in, line)) throw TableFormatError("empty table");
  const TableHeader h = parse_comment(line);
  if (header) *header = h;
  if (!std::getline(in, line) || split(line) != expected) throw TableFormatError("unexpected column header: " + line);
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != expected.size())
      throw TableFormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(expected.size()) +
                             " fields");
    try {
      row(fields);
    } catch (const TableFormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw TableFormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw TableFormatError("bad number '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw TableFormatError("bad integer '" + s + "'");
  return v;
}

const std::vector<std::string> kTrialColumns{"trial",    "seed", "v_target", "velocity_error",
                                             "distance", "fell", "return",   "steps"};
const std::vector<std::string> kTrajectoryColumns{"t", "x", "z", "fsm_state", "reflex"};
const std::vector<std::string> kCurveColumns{"iteration", "wall_seconds", "mean_return", "eval_return", "update_norm"};

}  // namespace

void write_trials_csv(std::ostream& out, const TableHeader& header, const std::vector<TrialRecord>& trials) {
  write_preamble(out, header, kTrialColumns);
  for (const auto& t : trials)
    out << t.trial << ',' << t.seed << ',' << num(t.v_target) << ',' << num(t.velocity_error) << ','
        << num(t.distance) << ',' << (t.fell ? 1 : 0) << ',' << num(t.total_return) << ',' << t.steps << '\n';
}

std::vector<TrialRecord> read_trials_csv(std::istream& in, TableHeader* header) {
  std::vector<TrialRecord> out;
  read_table(in, kTrialColumns, header, [&](const std::vector<std::string>& f) {
    TrialRecord t;
    t.trial = to_int(f[0]);
    t.seed = std::stoull(f[1]);
    t.v_target = to_double(f[2]);
    t.velocity_error = to_double(f[3]);
    t.distance = to_double(f[4]);
    t.fell = to_int(f[5]) != 0;
    t.total_return = to_double(f[6]);
    t.steps = to_int(f[7]);
    out.push_back(t);
  });
  return out;
}

void write_ablation_csv(std::ostream& out, const TableHeader& header, const AblationTable& table) {
  std::vector<std::string> columns{"variant"};
  for (TaskKind t : table.tasks) {
    columns.push_back(std::string(task_name(t)) + "_mean");
    columns.push_back(std::string(task_name(t)) + "_std");
  }
  write_preamble(out, header, columns);
  for (const auto& row : table.rows) {
    std::string label = row.label;
    std::replace(label.begin(), label.end(), ',', ';');
    out << label;
    for (const auto& c : row.cells) out << ',' << num(c.mean) << ',' << num(c.std);
    out << '\n';
  }
}

AblationTable read_ablation_csv(std::istream& in, TableHeader* header) {
  // The column line determines the tasks, so peek at it before the shared reader.
  std::string comment, columns;
  if (!std::getline(in, comment) || !std::getline(in, columns)) throw TableFormatError("truncated ablation table");
  const auto names = split(columns);
  if (names.empty() || names[0] != "variant" || names.size() % 2 != 1)
    throw TableFormatError("unexpected column header: " + columns);
  AblationTable table;
  for (std::size_t i = 1; i < names.size(); i += 2) {
    const std::string task = names[i].substr(0, names[i].find('_'));
    try {
      table.tasks.push_back(parse_task(task));
    } catch (const std::exception&) {
      throw TableFormatError("unknown task column '" + names[i] + "'");
    }
  }
  std::istringstream rest(comment + '\n' + columns + '\n' + std::string(std::istreambuf_iterator<char>(in), {}));
  read_table(rest, names, header, [&](const std::vector<std::string>& f) {
    AblationRow row;
    row.label = f[0];
    for (std::size_t i = 1; i < f.size(); i += 2) row.cells.push_back({to_double(f[i]), to_double(f[i + 1])});
    table.rows.push_back(std::move(row));
  });
  return table;
}

void write_trajectory_csv(std::ostream& out, const TableHeader& header, const std::vector<TrajectoryRow>& rows) {
  write_preamble(out, header, kTrajectoryColumns);
  for (const auto& r : rows)
    out << num(r.t) << ',' << num(r.x) << ',' << num(r.z) << ',' << r.fsm_state << ',' << r.reflex << '\n';
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in, TableHeader* header) {
  std::vector<TrajectoryRow> out;
  read_table(in, kTrajectoryColumns, header, [&](const std::vector<std::string>& f) {
    out.push_back({to_double(f[0]), to_double(f[1]), to_double(f[2]), to_int(f[3]), to_int(f[4])});
  });
  return out;
}

void write_curve_csv(std::ostream& out, const TableHeader& header, const std::vector<IterationStats>& curve) {
  write_preamble(out, header, kCurveColumns);
  for (const auto& s : curve)
    out << s.iteration << ',' << num(s.wall_seconds) << ',' << num(s.mean_return) << ',' << num(s.eval_return) << ','
        << num(s.update_norm) << '\n';
}

std::vector<IterationStats> read_curve_csv(std::istream& in, TableHeader* header) {
  std::vector<IterationStats> out;
  read_table(in, kCurveColumns, header, [&](const std::vector<std::string>& f) {
    IterationStats s;
    s.iteration = to_int(f[0]);
    s.wall_seconds = to_double(f[1]);
    s.mean_return = to_double(f[2]);
    s.eval_return = to_double(f[3]);
    s.update_norm = to_double(f[4]);
    out.push_back(s);
  });
  return out;
}

}  // namespace pmfsm
