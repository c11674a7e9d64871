#include <cmath>
#include <numbers>

#include <doctest.h>

#include "pmfsm/leg_model.hpp"
#include "pmfsm/rng.hpp"

using namespace pmfsm;

TEST_CASE("forward kinematics of straight and horizontal legs") {
  LegGeometry g;
  auto down = forward_kinematics({0.0, 0.0}, g);
  CHECK(down.x == doctest::Approx(0.0));
  CHECK(down.z == doctest::Approx(0.4));
  auto flat = forward_kinematics({std::numbers::pi / 2, 0.0}, g);
  CHECK(flat.x == doctest::Approx(0.4));
  CHECK(std::abs(flat.z) < 1e-12);
}

TEST_CASE("inverse kinematics round trip over the workspace") {
  LegGeometry g;
  Rng rng(7);
  int checked = 0;
  while (checked < 1000) {
    const LegPose q{uniform(rng, -1.0, 2.0), uniform(rng, -2.7, -0.05)};
    const auto foot = forward_kinematics(q, g);
    const LegPose back = inverse_kinematics(foot, g);
    CHECK(std::abs(back.hip - q.hip) < 1e-9);
    CHECK(std::abs(back.knee - q.knee) < 1e-9);
    const auto again = forward_kinematics(back, g);
    CHECK(std::abs(again.x - foot.x) < 1e-9);
    CHECK(std::abs(again.z - foot.z) < 1e-9);
    ++checked;
  }
}

TEST_CASE("inverse kinematics near the reach boundary") {
  LegGeometry g;
  const LegPose q = inverse_kinematics({0.0, 0.4 - 1e-6}, g);
  CHECK(std::abs(q.hip) < 1e-2);
  CHECK(std::abs(q.knee) < 1e-2);
  CHECK(q.knee <= 0.0);
  CHECK_THROWS_AS(inverse_kinematics({0.4 + 1e-6, 0.0}, g), OutOfWorkspace);
  CHECK_THROWS_AS(inverse_kinematics({0.0, 0.0}, g), OutOfWorkspace);
}

TEST_CASE("jacobian matches finite differences") {
  LegGeometry g;
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const LegPose q{uniform(rng, -1.0, 2.0), uniform(rng, -2.7, 0.0)};
    const Eigen::Matrix2d J = leg_jacobian(q, g);
    const double eps = 1e-6;
    const auto xp = forward_kinematics({q.hip + eps, q.knee}, g), xm = forward_kinematics({q.hip - eps, q.knee}, g);
    const auto kp = forward_kinematics({q.hip, q.knee + eps}, g), km = forward_kinematics({q.hip, q.knee - eps}, g);
    CHECK(J(0, 0) == doctest::Approx((xp.x - xm.x) / (2 * eps)).epsilon(1e-6));
    CHECK(J(1, 0) == doctest::Approx((xp.z - xm.z) / (2 * eps)).epsilon(1e-6));
    CHECK(J(0, 1) == doctest::Approx((kp.x - km.x) / (2 * eps)).epsilon(1e-6));
    CHECK(J(1, 1) == doctest::Approx((kp.z - km.z) / (2 * eps)).epsilon(1e-6));
  }
}

TEST_CASE("nominal height at the default stance") {
  LegGeometry g;
  CHECK(nominal_height(g) == doctest::Approx(0.2 * std::cos(0.9) + 0.2 * std::cos(-0.9)));
  CHECK(foot_clearance(g.default_stance, g) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("knee for depth hits the requested depth") {
  LegGeometry g;
  for (double hip : {0.4, 0.9, 1.2}) {
    for (double z : {0.18, 0.22, 0.2486}) {
      const auto s = knee_for_depth(hip, z, g);
      REQUIRE_FALSE(s.clamped);
      CHECK(s.knee <= 0.0);
      CHECK(forward_kinematics({hip, s.knee}, g).z == doctest::Approx(z).epsilon(1e-12));
    }
  }
  CHECK(knee_for_depth(0.9, 1.0, g).clamped);
}

TEST_CASE("termination poses with zero amplitude and height equal the default stance") {
  LegGeometry g;
  const auto t = sub_automata_targets({2.0, 0.0, 0.0}, g, 0);
  CHECK_FALSE(t.clamped);
  for (const LegPose* p : {&t.e_s1, &t.e_s2, &t.e_s3}) {
    CHECK(p->hip == doctest::Approx(g.default_stance.hip));
    CHECK(p->knee == doctest::Approx(g.default_stance.knee));
  }
}

TEST_CASE("swing apex clearance equals h") {
  LegGeometry g;
  const auto t = sub_automata_targets({2.0, 0.4, 0.04}, g, 1);
  REQUIRE_FALSE(t.clamped);
  CHECK(std::abs(foot_clearance(t.e_s1, g) - 0.04) < 1e-6);
  CHECK(std::abs(foot_clearance(t.e_s2, g)) < 1e-9);
  CHECK(std::abs(foot_clearance(t.e_s3, g)) < 1e-9);
}

TEST_CASE("hip difference between rear and apex is -A over random samples") {
  LegGeometry g;
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const ModulationParams rho{2.0, uniform(rng, 0.2, 0.8), uniform(rng, 0.02, 0.08)};
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const auto t = sub_automata_targets(rho, g, leg);
      CHECK(t.e_s3.hip - t.e_s1.hip == doctest::Approx(-rho.amplitude).epsilon(1e-12));
      CHECK(t.e_s2.hip == doctest::Approx(t.e_s1.hip));
      if (!t.clamped) CHECK(std::abs(foot_clearance(t.e_s1, g) - rho.height) < 1e-6);
    }
  }
}

TEST_CASE("termination poses are continuous in A and h") {
  LegGeometry g;
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const ModulationParams rho{2.0, uniform(rng, 0.2, 0.8), uniform(rng, 0.02, 0.08)};
    const auto a = sub_automata_targets(rho, g, 0);
    for (auto d : {ModulationParams{2.0, rho.amplitude + 1e-6, rho.height},
                   ModulationParams{2.0, rho.amplitude, rho.height + 1e-6}}) {
      const auto b = sub_automata_targets(d, g, 0);
      for (int ph = 1; ph <= 3; ++ph) {
        CHECK(std::abs(a.for_phase(ph).hip - b.for_phase(ph).hip) < 1e-3);
        CHECK(std::abs(a.for_phase(ph).knee - b.for_phase(ph).knee) < 1e-3);
      }
    }
  }
}

TEST_CASE("clamp to limits") {
  LegGeometry g;
  const LegPose c = clamp_to_limits({5.0, 1.0}, g);
  CHECK(c.hip == 2.0);
  CHECK(c.knee == 0.0);
}
