#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "aemcarl/orca.hpp"
#include "aemcarl/policy.hpp"
#include "aemcarl/sim.hpp"

using namespace aemcarl;
using namespace aemcarl::orca;

namespace {

constexpr double kDt = 0.25;

// Brute-force oracle: the feasible grid point closest to `preferred`, or
// nothing when no grid point is feasible.
struct GridBest {
  bool found = false;
  Vec2 v;
  double dist = 1e300;
};

GridBest grid_search(const std::vector<HalfPlane>& planes, const Vec2& preferred, double max_speed,
                     int n = 400) {
  GridBest best;
  const double step = 2.0 * max_speed / (n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 v{-max_speed + i * step, -max_speed + j * step};
      if (abs_sq(v) > max_speed * max_speed) continue;
      bool ok = true;
      for (const auto& h : planes) ok = ok && h.signed_distance(v) >= 0.0;
      if (!ok) continue;
      const double d = norm(v - preferred);
      if (d < best.dist) best = {true, v, d};
    }
  }
  return best;
}

}  // namespace

TEST(Orca, EmptyConstraintsClampPreferred) {
  const auto inside = solve_lp2({}, {0.3, 0.4}, 1.0);
  EXPECT_TRUE(inside.feasible());
  EXPECT_EQ(inside.velocity.x, 0.3);
  EXPECT_EQ(inside.velocity.y, 0.4);
  const auto outside = solve_lp2({}, {3.0, 4.0}, 1.0);
  EXPECT_NEAR(outside.velocity.x, 0.6, 1e-15);
  EXPECT_NEAR(outside.velocity.y, 0.8, 1e-15);
}

TEST(Orca, SatisfiedHalfPlaneLeavesPreferred) {
  const std::vector<HalfPlane> planes{{{0.0, -0.5}, {0.0, 1.0}}};  // y >= -0.5
  const auto r = solve_lp2(planes, {0.2, 0.1}, 1.0);
  EXPECT_TRUE(r.feasible());
  EXPECT_EQ(r.velocity.x, 0.2);
  EXPECT_EQ(r.velocity.y, 0.1);
}

TEST(Orca, InfeasibleIsReported) {
  // y >= 0.5 and y <= -0.5 cannot both hold.
  const std::vector<HalfPlane> planes{{{0.0, 0.5}, {0.0, 1.0}}, {{0.0, -0.5}, {0.0, -1.0}}};
  const auto r = solve_lp2(planes, {0.0, 0.0}, 1.0);
  EXPECT_FALSE(r.feasible());
  EXPECT_EQ(r.failed_index, 1u);
  // The fallback balances both violations.
  const Vec2 v = solve_lp3(planes, r, 1.0);
  EXPECT_NEAR(v.y, 0.0, 1e-9);
}

TEST(Orca, LpMatchesGridOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  const double max_speed = 1.0;
  const double cell = 2.0 * max_speed / 399.0;
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    // Every half-plane keeps a random anchor strictly feasible.
    Vec2 anchor{0.5 * u(rng), 0.5 * u(rng)};
    std::vector<HalfPlane> planes;
    const int k = 1 + static_cast<int>(trial % 5);
    for (int i = 0; i < k; ++i) {
      const double a = ang(rng);
      const Vec2 n{std::cos(a), std::sin(a)};
      const double slack = 0.05 + 0.3 * (u(rng) + 1.0) / 2.0;
      planes.push_back({anchor - n * slack, n});
    }
    const Vec2 preferred{1.5 * u(rng), 1.5 * u(rng)};
    const auto lp = solve_lp2(planes, preferred, max_speed);
    ASSERT_TRUE(lp.feasible()) << "trial " << trial;
    for (const auto& h : planes) EXPECT_GE(h.signed_distance(lp.velocity), -1e-9);
    EXPECT_LE(norm(lp.velocity), max_speed + 1e-9);
    const GridBest grid = grid_search(planes, preferred, max_speed);
    ASSERT_TRUE(grid.found);
    const double d = norm(lp.velocity - preferred);
    EXPECT_LE(d, grid.dist + 1e-9) << "trial " << trial;           // never worse than any grid point
    EXPECT_GE(d, grid.dist - std::sqrt(2.0) * cell) << "trial " << trial;  // within grid resolution
    ++checked;
  }
  EXPECT_EQ(checked, 60);
}

TEST(Orca, NoNeighborsGivesPreferredVelocity) {
  OrcaAgent a;
  a.position = {0.0, 0.0};
  a.goal = {3.0, 4.0};
  const Vec2 v = compute_velocity(a, {}, {}, kDt);
  EXPECT_EQ(v.x, 0.6);
  EXPECT_EQ(v.y, 0.8);
}

TEST(Orca, PreferredSpeedSlowsNearGoal) {
  OrcaAgent a;
  a.goal = {0.1, 0.0};
  const Vec2 v = preferred_velocity(a, kDt);
  EXPECT_NEAR(v.x, 0.4, 1e-15);  // dist / dt
  a.goal = a.position;
  const Vec2 z = compute_velocity(a, {}, {}, kDt);
  EXPECT_EQ(z.x, 0.0);
  EXPECT_EQ(z.y, 0.0);
}

TEST(Orca, HeadOnSidestepsAreReciprocal) {
  OrcaAgent a;
  a.position = {-2.0, 0.0};
  a.velocity = {1.0, 0.0};
  a.goal = {2.0, 0.0};
  OrcaAgent b;
  b.position = {2.0, 0.0};
  b.velocity = {-1.0, 0.0};
  b.goal = {-2.0, 0.0};
  const std::vector<OrcaNeighbor> na{{b.position, b.velocity, b.radius}};
  const std::vector<OrcaNeighbor> nb{{a.position, a.velocity, a.radius}};
  const Vec2 va = compute_velocity(a, na, {}, kDt);
  const Vec2 vb = compute_velocity(b, nb, {}, kDt);
  // Point reflection through the midpoint: each sidestep mirrors the other.
  EXPECT_NEAR(va.x, -vb.x, 1e-9);
  EXPECT_NEAR(va.y, -vb.y, 1e-9);
  EXPECT_GT(std::fabs(va.y), 1e-3);  // the tie was broken into a real sidestep
}

TEST(Orca, FrontalWallForcesLateralMotion) {
  OrcaAgent robot;
  robot.position = {0.0, 0.0};
  robot.velocity = {0.0, 1.0};
  robot.goal = {0.0, 5.0};
  std::vector<OrcaNeighbor> wall;
  // A closed three-agent wall ending just left of the robot's path; the way
  // around is to the right.
  for (double x : {0.0, -0.65, -1.3}) wall.push_back({{x, 1.5}, {0.0, 0.0}, 0.3});
  const Vec2 v = demo_action(robot, wall, {}, kDt);
  EXPECT_GT(v.x, 1e-3);
  const Vec2 again = demo_action(robot, wall, {}, kDt);
  EXPECT_EQ(v.x, again.x);
  EXPECT_EQ(v.y, again.y);
}

TEST(Orca, SpeedNeverExceedsVPref) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    OrcaAgent a;
    a.position = {u(rng), u(rng)};
    a.velocity = {u(rng) / 3, u(rng) / 3};
    a.goal = {u(rng), u(rng)};
    std::vector<OrcaNeighbor> ns;
    for (int i = 0; i < 6; ++i) ns.push_back({{u(rng), u(rng)}, {u(rng) / 3, u(rng) / 3}, 0.3});
    const Vec2 v = compute_velocity(a, ns, {}, kDt);
    EXPECT_LE(norm(v), a.v_pref + 1e-12);
  }
}

TEST(Orca, NeighborLimit) {
  OrcaAgent a;
  std::vector<OrcaNeighbor> ns;
  for (int i = 0; i < 15; ++i) ns.push_back({{1.0 + i, 0.0}, {0.0, 0.0}, 0.3});
  OrcaParams p;
  p.neighbor_dist = 100.0;
  EXPECT_EQ(build_constraints(a, ns, p, kDt).size(), 10u);
  p.neighbor_dist = 3.5;
  EXPECT_EQ(build_constraints(a, ns, p, kDt).size(), 3u);
}

TEST(Orca, HalfPlaneNormalsAreUnit) {
  OrcaAgent a;
  a.velocity = {0.5, 0.2};
  std::vector<OrcaNeighbor> ns{{{1.0, 0.1}, {-0.4, 0.0}, 0.3}, {{0.4, 0.3}, {0.0, 0.0}, 0.3}};
  for (const auto& h : build_constraints(a, ns, {}, kDt)) EXPECT_NEAR(norm(h.normal), 1.0, 1e-9);
}

TEST(Orca, ParamsValidation) {
  OrcaParams p;
  p.time_horizon = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.neighbor_dist = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Orca, VisibleAllOrcaEpisodesAreCollisionFree) {
  sim::SimConfig c;
  c.visibility = sim::Visibility::Visible;
  policy::OrcaPolicy robot;
  int collisions = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    sim::SimState s = sim::reset(c, seed);
    sim::OutcomeKind kind = sim::OutcomeKind::None;
    while (kind == sim::OutcomeKind::None) {
      kind = sim::step(s, robot.act(s).action).terminal();
      for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
        for (std::size_t j = i + 1; j < s.obstacles.size(); ++j) {
          const auto& p = s.obstacles[i];
          const auto& q = s.obstacles[j];
          if (std::hypot(p.px - q.px, p.py - q.py) < p.radius + q.radius) ++collisions;
        }
      }
    }
    if (kind == sim::OutcomeKind::Collision) ++collisions;
  }
  EXPECT_EQ(collisions, 0);
}
