#include <cmath>
#include <limits>
#include <sstream>

#include <doctest.h>

#include "pmfsm/rng.hpp"
#include "pmfsm/simulator.hpp"
#include "pmfsm/task.hpp"

using namespace pmfsm;

namespace {

JointVector stance_targets(const LegGeometry& g) {
  JointVector q;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    q[hip_index(leg)] = g.default_stance.hip;
    q[knee_index(leg)] = g.default_stance.knee;
  }
  return q;
}

double total_normal_force(const StepResult& r) {
  double n = 0.0;
  for (const auto& f : r.foot_forces) n += f.z();
  return n;
}

}  // namespace

TEST_CASE("zero gravity free body stays at rest") {
  SimConfig cfg;
  cfg.gravity = 0.0;
  LegGeometry g;
  Simulator sim(cfg, g, flat_terrain());
  RobotState s = sim.standing_state();
  s.position.z() += 1.0;
  sim.reset(s);
  for (int i = 0; i < 40; ++i) sim.step(s.joint_angles);
  CHECK((sim.state().position - s.position).norm() == 0.0);
  CHECK(sim.state().linear_velocity.norm() == 0.0);
  CHECK(sim.state().angular_velocity.norm() == 0.0);
  CHECK((sim.state().joint_angles - s.joint_angles).norm() == 0.0);
  CHECK(sim.state().orientation.coeffs() == s.orientation.coeffs());
}

TEST_CASE("drop from 1 cm settles to static force balance") {
  SimConfig cfg;
  LegGeometry g;
  Simulator sim(cfg, g, flat_terrain());
  RobotState s = sim.standing_state();
  s.position.z() += 0.01;
  sim.reset(s);
  StepResult r;
  for (int i = 0; i < 20; ++i) r = sim.step(stance_targets(g));
  CHECK(sim.time() == doctest::Approx(0.5));
  const double weight = cfg.mass * cfg.gravity;
  CHECK(std::abs(total_normal_force(r) - weight) / weight < 0.02);
}

TEST_CASE("drop with straight-leg targets also balances") {
  SimConfig cfg;
  LegGeometry g;
  Simulator sim(cfg, g, flat_terrain());
  RobotState s = sim.standing_state();
  s.position.z() += 0.01;
  sim.reset(s);
  StepResult r;
  for (int i = 0; i < 40; ++i) r = sim.step(JointVector::Zero());
  const double weight = cfg.mass * cfg.gravity;
  CHECK(std::abs(total_normal_force(r) - weight) / weight < 0.02);
  CHECK_FALSE(r.diverged);
}

TEST_CASE("friction cone and normal force sign over random rollouts") {
  SimConfig cfg;
  LegGeometry g;
  long samples = 0, violations = 0, pulling = 0, phantom = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Terrain terrain = seed % 2 ? make_stairs(seed, {}) : flat_terrain();
    Simulator sim(cfg, g, terrain, make_perturbations(seed, 2.0, {true, 10.0, 30.0, 2.0, 0.2}));
    sim.set_contact_monitor([&](const ContactSample& c) {
      ++samples;
      if (c.tangential_force > c.friction * c.normal_force * (1.0 + 1e-12) + 1e-12) ++violations;
      if (c.normal_force < 0.0) ++pulling;
      if (c.penetration <= 0.0 && c.normal_force != 0.0) ++phantom;
    });
    Rng rng(seed);
    RobotState s = sim.standing_state(terrain.steps.size() > 1 ? 0.5 : 0.0);
    s.linear_velocity.x() = uniform(rng, -0.5, 1.0);
    sim.reset(s);
    for (int i = 0; i < 80; ++i) {
      JointVector q = stance_targets(g);
      for (int j = 0; j < kNumJoints; ++j) q[j] += uniform(rng, -0.4, 0.4);
      if (sim.step(q).diverged) break;
    }
  }
  CHECK(samples > 100000);
  CHECK(violations == 0);
  CHECK(pulling == 0);
  CHECK(phantom == 0);
}

TEST_CASE("standing holds for 25 seconds") {
  SimConfig cfg;
  LegGeometry g;
  Simulator sim(cfg, g, flat_terrain());
  sim.reset(sim.standing_state());
  const double nominal = sim.height_above_ground();
  for (int i = 0; i < 1000; ++i) {
    REQUIRE_FALSE(sim.step(stance_targets(g)).diverged);
    REQUIRE_FALSE(is_fallen(sim.state(), sim.height_above_ground(), nominal, {}));
  }
  CHECK(std::abs(sim.state().position.x()) < 0.03);
}

TEST_CASE("energy does not grow without actuation") {
  SimConfig cfg;
  LegGeometry g;
  Simulator sim(cfg, g, flat_terrain());
  RobotState s = sim.standing_state();
  s.position.z() += 0.03;
  s.linear_velocity = {0.3, 0.0, 0.0};
  sim.reset(s);
  double prev = sim.mechanical_energy();
  const double start = prev;
  double worst = 0.0;
  for (int i = 0; i < 80; ++i) {
    sim.step(sim.state().joint_angles);
    const double e = sim.mechanical_energy();
    worst = std::max(worst, e - prev);
    prev = e;
  }
  CHECK(worst <= 1e-3 * start);
  CHECK(prev < start);
}

TEST_CASE("rollouts are bitwise deterministic") {
  auto run = [] {
    SimConfig cfg;
    LegGeometry g;
    Terrain t = make_stairs(4, {});
    Simulator sim(cfg, g, t, make_perturbations(4, 5.0, {true, 10.0, 30.0, 2.0, 0.2}));
    sim.reset(sim.standing_state(1.0));
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
      JointVector q = stance_targets(g);
      for (int j = 0; j < kNumJoints; ++j) q[j] += uniform(rng, -0.3, 0.3);
      sim.step(q);
    }
    return sim.state();
  };
  const RobotState a = run(), b = run();
  CHECK(a.position == b.position);
  CHECK(a.orientation.coeffs() == b.orientation.coeffs());
  CHECK(a.joint_angles == b.joint_angles);
  CHECK(a.linear_velocity == b.linear_velocity);
}

TEST_CASE("non-finite targets report divergence") {
  SimConfig cfg;
  LegGeometry g;
  Simulator sim(cfg, g, flat_terrain());
  sim.reset(sim.standing_state());
  JointVector q = stance_targets(g);
  q[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK(sim.step(q).diverged);
}

TEST_CASE("quaternion stays normalized") {
  SimConfig cfg;
  LegGeometry g;
  Simulator sim(cfg, g, flat_terrain());
  RobotState s = sim.standing_state();
  s.angular_velocity = {0.5, 1.0, -0.7};
  s.position.z() += 0.05;
  sim.reset(s);
  for (int i = 0; i < 40; ++i) {
    sim.step(stance_targets(g));
    CHECK(std::abs(sim.state().orientation.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("invalid configuration is rejected") {
  SimConfig cfg;
  cfg.mass = 0.0;
  CHECK_THROWS(cfg.validate());
  SimConfig c2;
  c2.substeps = 0;
  CHECK_THROWS(c2.validate());
}

TEST_CASE("terrain contact against steps") {
  Terrain t;
  t.steps = {{0.0, 0.0}, {1.0, 0.05}};
  auto top = terrain_contact(t, 1.5, 0.04);
  CHECK(top.depth == doctest::Approx(0.01));
  CHECK(top.normal.z() == doctest::Approx(1.0));
  auto riser = terrain_contact(t, 1.002, 0.01);
  CHECK(riser.depth == doctest::Approx(0.002));
  CHECK(riser.normal.x() == doctest::Approx(-1.0));
  CHECK(terrain_contact(t, 0.5, 0.01).depth <= 0.0);
}

TEST_CASE("flat stairs when altitude change is zero") {
  StairsConfig cfg;
  cfg.max_altitude_change = 0.0;
  const Terrain t = make_stairs(3, cfg);
  for (const auto& s : t.steps) CHECK(s.height == 0.0);
}

TEST_CASE("stairs are deterministic and bounded") {
  StairsConfig cfg;
  const Terrain a = make_stairs(42, cfg), b = make_stairs(42, cfg);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].start_x == b.steps[i].start_x);
    CHECK(a.steps[i].height == b.steps[i].height);
  }
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Terrain t = make_stairs(seed, cfg);
    REQUIRE(t.steps.front().height == 0.0);
    REQUIRE(t.steps.front().start_x <= 0.0);
    const double stair_start = cfg.approach_length;
    const double stair_end = cfg.approach_length + cfg.stair_zone_length;
    for (std::size_t i = 1; i < t.steps.size(); ++i) {
      REQUIRE(t.steps[i].start_x > t.steps[i - 1].start_x);
      REQUIRE(std::abs(t.steps[i].height - t.steps[i - 1].height) <= 0.05 + 1e-12);
      const double lo = t.steps[i - 1].start_x, hi = t.steps[i].start_x;
      if (lo >= stair_start - 1e-9 && hi <= stair_end + 1e-9) REQUIRE(hi - lo <= 1.0 + 1e-12);
    }
    REQUIRE(t.height_at(stair_end + 0.5) == t.height_at(t.length));
  }
}

TEST_CASE("terrain text round trip") {
  const Terrain t = make_stairs(8, {});
  std::stringstream ss;
  write_terrain(ss, t);
  const Terrain r = read_terrain(ss);
  REQUIRE(r.steps.size() == t.steps.size());
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    CHECK(r.steps[i].start_x == t.steps[i].start_x);
    CHECK(r.steps[i].height == t.steps[i].height);
  }
  CHECK(r.friction == t.friction);
  CHECK(r.length == t.length);
}

TEST_CASE("perturbation bounds") {
  PerturbationConfig cfg{true, 10.0, 20.0, 2.0, 0.2};
  int events = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto s = make_perturbations(seed, 25.0, cfg);
    for (const auto& e : s.events) {
      ++events;
      CHECK(e.force.head<2>().norm() <= 10.0 + 1e-12);
      CHECK(std::abs(e.force.z()) <= 20.0 + 1e-12);
      CHECK(e.start_time >= 0.0);
      CHECK(e.start_time <= 25.0);
      CHECK(s.force_at(e.start_time + 0.5 * e.duration).norm() > 0.0);
    }
  }
  CHECK(events == doctest::Approx(1000).epsilon(0.15));
  CHECK(make_perturbations(1, 25.0, {}).events.empty());
}
