#include <cmath>
#include <sstream>

#include <doctest.h>

#include "pmfsm/experiments.hpp"

using namespace pmfsm;

namespace {

TaskSpec short_spec(TaskKind task, int trials) {
  TaskSpec s;
  s.task = task;
  s.variant = Variant::kPmFsm;
  s.num_trials = trials;
  s.episode_seconds = 3.0;
  s.seed = 11;
  return s;
}

Checkpoint checkpoint(Variant v = Variant::kPmFsm) { return make_checkpoint(v, 5, {}, 0.5); }

TableHeader header() { return {tool_version(), 11, 0x0123456789abcdefull}; }

bool same(const TrialRecord& a, const TrialRecord& b) {
  return a.trial == b.trial && a.seed == b.seed && a.v_target == b.v_target && a.velocity_error == b.velocity_error &&
         a.distance == b.distance && a.fell == b.fell && a.total_return == b.total_return && a.steps == b.steps;
}

}  // namespace

TEST_CASE("aggregates recomputed from the emitted records match exactly") {
  const EnvConfig env;
  const MetricsReport report = run_task(short_spec(TaskKind::kVel, 4), checkpoint(), env);
  REQUIRE(report.trials.size() == 4);
  std::stringstream csv;
  write_trials_csv(csv, header(), report.trials);
  const MetricsReport again = aggregate(report.spec, read_trials_csv(csv));
  CHECK(again.mean_velocity_error == report.mean_velocity_error);
  CHECK(again.mean_distance == report.mean_distance);
  CHECK(again.mean_return == report.mean_return);
  CHECK(again.fall_rate == report.fall_rate);
  CHECK(report.mean_velocity_error >= 0.0);
  CHECK(report.mean_distance >= 0.0);
  double sum = 0.0;
  for (const auto& t : report.trials) sum += t.velocity_error;
  CHECK(report.mean_velocity_error == sum / 4.0);
}

TEST_CASE("trial outcomes do not depend on the other trials") {
  const EnvConfig env;
  const Checkpoint ck = checkpoint();
  const auto three = run_task(short_spec(TaskKind::kPer, 3), ck, env);
  auto five_spec = short_spec(TaskKind::kPer, 5);
  five_spec.threads = 3;
  const auto five = run_task(five_spec, ck, env);
  for (int i = 0; i < 3; ++i) CHECK(same(three.trials[i], five.trials[i]));
  CHECK(same(run_trial(five_spec, ck, env, 4), five.trials[4]));
  CHECK(three.trials[0].seed != three.trials[1].seed);
}

TEST_CASE("VEL trials sample their targets from the velocity range") {
  const EnvConfig env;
  const auto report = run_task(short_spec(TaskKind::kVel, 6), checkpoint(), env);
  for (const auto& t : report.trials) {
    CHECK(t.v_target >= env.velocity.lo);
    CHECK(t.v_target <= env.velocity.hi);
  }
}

TEST_CASE("distances are capped at the expected distance") {
  const EnvConfig env;
  auto spec = short_spec(TaskKind::kPer, 2);
  spec.expected_distance = 0.05;
  for (const auto& t : run_task(spec, checkpoint(), env).trials) {
    CHECK(t.distance >= 0.0);
    CHECK(t.distance <= 0.05);
  }
}

TEST_CASE("mismatched checkpoints are rejected") {
  const EnvConfig env;
  CHECK_THROWS_AS(run_task(short_spec(TaskKind::kVel, 1), checkpoint(Variant::kPmtg), env), CheckpointMismatch);
  auto bad = short_spec(TaskKind::kVel, 0);
  CHECK_THROWS_AS(run_task(bad, checkpoint(), env), std::invalid_argument);
}

TEST_CASE("a shared checkpoint passed twice yields identical rows in input order") {
  const EnvConfig env;
  const Checkpoint ck = checkpoint();
  const Checkpoint tg = checkpoint(Variant::kPmtg);
  auto base = short_spec(TaskKind::kVel, 2);
  base.episode_seconds = 2.0;
  const auto table = compare_variants({TaskKind::kVel, TaskKind::kPer, TaskKind::kStr},
                                      {{"a", ck}, {"tg", tg}, {"b", ck}}, base, env);
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0].label == "a");
  CHECK(table.rows[1].label == "tg");
  CHECK(table.rows[2].label == "b");
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(table.rows[0].cells[c].mean == table.rows[2].cells[c].mean);
    CHECK(table.rows[0].cells[c].std == table.rows[2].cells[c].std);
  }
  CHECK(table.headers() == std::vector<std::string>{"Ē_v (VEL)", "D̄ (PER)", "D̄ (STR)"});
  const std::string text = format_ablation_table(table);
  CHECK(text.find("Ē_v (VEL)") != std::string::npos);
  CHECK(text.find(" ± ") != std::string::npos);

  std::stringstream csv;
  write_ablation_csv(csv, header(), table);
  TableHeader h;
  const auto back = read_ablation_csv(csv, &h);
  CHECK(h.config_hash == 0x0123456789abcdefull);
  CHECK(back.tasks == table.tasks);
  REQUIRE(back.rows.size() == 3);
  CHECK(back.rows[1].label == "tg");
  CHECK(back.rows[1].cells[2].mean == table.rows[1].cells[2].mean);
}

TEST_CASE("flat trot foot heights stay between the ground and the clearance") {
  const EnvConfig env;
  DumpSpec spec;
  spec.seconds = 4.0;
  spec.fixed_rho = ModulationParams{2.0, 0.5, 0.05};
  const auto rows = dump_foot_trajectory(checkpoint(), env, spec);
  REQUIRE(rows.size() == 160);
  double lo = 1e9, hi = -1e9;
  for (const auto& r : rows) {
    lo = std::min(lo, r.z);
    hi = std::max(hi, r.z);
    CHECK(r.fsm_state >= 1);
    CHECK(r.fsm_state <= 4);
  }
  CHECK(lo > -0.01);
  CHECK(lo < 0.01);
  CHECK(hi > 0.02);
  CHECK(hi < 2 * 0.05);
  CHECK(rows[1].t > rows[0].t);
}

TEST_CASE("a standing gait keeps the foot on the ground") {
  EnvConfig env;
  env.gait = stand_gait();
  DumpSpec spec;
  spec.seconds = 3.0;
  spec.leg = 2;
  for (const auto& r : dump_foot_trajectory(checkpoint(), env, spec)) {
    CHECK(std::abs(r.z) < 0.005);
    CHECK(r.reflex == 0);
  }
}

TEST_CASE("trajectory and curve tables round trip") {
  const std::vector<TrajectoryRow> rows{{0.025, 0.1, 1.0 / 3.0, 2, 0}, {0.05, -0.2, 1e-17, 4, 3}};
  std::stringstream a;
  write_trajectory_csv(a, header(), rows);
  CHECK(a.str().rfind("# pmfsm " + tool_version() + " seed=11 config=0123456789abcdef\nt,x,z,fsm_state,reflex\n", 0) ==
        0);
  const auto back = read_trajectory_csv(a);
  REQUIRE(back.size() == 2);
  CHECK(back[0].z == rows[0].z);
  CHECK(back[1].z == rows[1].z);
  CHECK(back[1].reflex == 3);

  std::vector<IterationStats> curve(2);
  curve[0].iteration = 0;
  curve[0].mean_return = 12.5;
  curve[1].iteration = 1;
  curve[1].eval_return = -0.1;
  curve[1].update_norm = 2.0 / 7.0;
  std::stringstream b;
  write_curve_csv(b, header(), curve);
  TableHeader h;
  const auto c = read_curve_csv(b, &h);
  CHECK(h.seed == 11);
  REQUIRE(c.size() == 2);
  CHECK(c[1].update_norm == curve[1].update_norm);
  CHECK(c[0].mean_return == 12.5);
}

TEST_CASE("malformed tables are rejected") {
  std::istringstream no_comment("t,x,z,fsm_state,reflex\n");
  CHECK_THROWS_AS(read_trajectory_csv(no_comment), TableFormatError);
  std::istringstream wrong_columns("# pmfsm 0.1.0 seed=1 config=00\nt,x,z\n");
  CHECK_THROWS_AS(read_trajectory_csv(wrong_columns), TableFormatError);
  std::istringstream short_row("# pmfsm 0.1.0 seed=1 config=00\nt,x,z,fsm_state,reflex\n1,2,3\n");
  CHECK_THROWS_AS(read_trajectory_csv(short_row), TableFormatError);
  std::istringstream bad_number("# pmfsm 0.1.0 seed=1 config=00\nt,x,z,fsm_state,reflex\n1,2,x,1,0\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad_number), TableFormatError);
}
