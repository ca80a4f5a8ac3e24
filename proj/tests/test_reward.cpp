#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "aemcarl/reward.hpp"
#include "oracles.hpp"

using namespace aemcarl;
using namespace aemcarl::reward;

namespace {

sim::ObstacleState obstacle(double px, double py, double vx, double vy) {
  sim::ObstacleState o;
  o.px = px;
  o.py = py;
  o.vx = vx;
  o.vy = vy;
  return o;
}

sim::AgentState agent_at(double px, double py) {
  sim::AgentState a;
  a.px = px;
  a.py = py;
  return a;
}

}  // namespace

TEST(Reward, Headings) {
  EXPECT_EQ(obstacle_heading({1.0, 0.0}).angle, 0.0);
  EXPECT_NEAR(obstacle_heading({0.0, 1.0}).angle, M_PI / 2.0, 1e-15);
  EXPECT_NEAR(obstacle_heading({-1.0, -1.0}).angle, -3.0 * M_PI / 4.0, 1e-15);
  EXPECT_TRUE(obstacle_heading({0.0, 0.0}).degenerate);
  EXPECT_EQ(obstacle_heading({0.0, 0.0}).angle, 0.0);
  EXPECT_FALSE(obstacle_heading({0.0, 1.0}).degenerate);
}

TEST(Reward, EmptyField) {
  const RewardField f = build_grid({}, RewardHyper{});
  EXPECT_TRUE(f.empty());
  EXPECT_EQ(f.at(0, 0), 0.0);
  EXPECT_EQ(f.disc_sum({0.0, 0.0}, 5.0), 0.0);
  EXPECT_EQ(collision_probability(agent_at(0, 0), {1.0, 0.0}, 0.25, f, RewardHyper{}), 0.0);
}

TEST(Reward, UnitMassPerObstacle) {
  const RewardHyper h;
  for (const auto& o : {obstacle(0.37, -1.2, 0.8, 0.3), obstacle(2.0, 2.0, 0.0, 0.0),
                        obstacle(-1.0, 0.55, 0.0, -1.0)}) {
    const std::vector<sim::ObstacleState> one{o};
    const RewardField f = build_grid(one, h);
    EXPECT_NEAR(f.total(), 1.0, 1e-9);
    // No mass outside the spread disc.
    const double r = spread_radius(o, h);
    for (std::int64_t iy = f.min_iy(); iy < f.min_iy() + f.height(); ++iy) {
      for (std::int64_t ix = f.min_ix(); ix < f.min_ix() + f.width(); ++ix) {
        if (f.at(ix, iy) > 0.0) {
          EXPECT_LE(norm(f.cell_center(ix, iy) - o.position()), r + f.resolution() * std::sqrt(0.5));
        }
        EXPECT_GE(f.at(ix, iy), 0.0);
      }
    }
  }
}

TEST(Reward, StillObstacleUsesBodyRadius) {
  const auto o = obstacle(0.0, 0.0, 0.0, 0.0);
  EXPECT_EQ(spread_radius(o, RewardHyper{}), o.radius);
  // The angular factor is dropped, so the field is symmetric in x.
  const std::vector<sim::ObstacleState> one{o};
  const RewardField f = build_grid(one, RewardHyper{});
  EXPECT_NEAR(f.at_point({0.15, 0.05}), f.at_point({-0.15, 0.05}), 1e-15);
}

TEST(Reward, HeadingConcentratesMass) {
  RewardHyper h;
  h.delta_theta = 0.5;
  const std::vector<sim::ObstacleState> one{obstacle(0.0, 0.0, 1.0, 0.0)};
  const RewardField f = build_grid(one, h);
  EXPECT_GT(f.disc_sum({0.5, 0.0}, 0.4), f.disc_sum({-0.5, 0.0}, 0.4));
}

TEST(Reward, Superposition) {
  const RewardHyper h;
  const auto a = obstacle(0.3, 0.1, 0.5, 0.5);
  const auto b = obstacle(-0.8, 1.4, -0.7, 0.0);
  const std::vector<sim::ObstacleState> twice{a, a};
  const std::vector<sim::ObstacleState> once{a};
  const RewardField fa = build_grid(once, h);
  const RewardField f2 = build_grid(twice, h);
  for (std::int64_t iy = fa.min_iy(); iy < fa.min_iy() + fa.height(); ++iy) {
    for (std::int64_t ix = fa.min_ix(); ix < fa.min_ix() + fa.width(); ++ix) {
      EXPECT_EQ(f2.at(ix, iy), 2.0 * fa.at(ix, iy));
    }
  }
  const std::vector<sim::ObstacleState> both{a, b};
  const std::vector<sim::ObstacleState> only_b{b};
  const RewardField fab = build_grid(both, h);
  const RewardField fb = build_grid(only_b, h);
  for (std::int64_t iy = fab.min_iy(); iy < fab.min_iy() + fab.height(); ++iy) {
    for (std::int64_t ix = fab.min_ix(); ix < fab.min_ix() + fab.width(); ++ix) {
      EXPECT_NEAR(fab.at(ix, iy), fa.at(ix, iy) + fb.at(ix, iy), 1e-15);
    }
  }
}

TEST(Reward, FarAgentSeesNothing) {
  const std::vector<sim::ObstacleState> one{obstacle(0.0, 0.0, 1.0, 0.0)};
  const RewardField f = build_grid(one, RewardHyper{});
  EXPECT_EQ(collision_probability(agent_at(10.0, 10.0), {1.0, 0.0}, 0.25, f, RewardHyper{}), 0.0);
  // A standing robot covers nothing.
  EXPECT_EQ(collision_probability(agent_at(0.0, 0.0), {0.0, 0.0}, 0.25, f, RewardHyper{}), 0.0);
}

TEST(Reward, ContainmentGivesFullMass) {
  RewardHyper h;
  h.dt_agent = 3.0;  // coverage radius 3 m swallows a 1 m spread disc
  const std::vector<sim::ObstacleState> one{obstacle(0.5, 0.25, 0.0, 1.0)};
  const RewardField f = build_grid(one, h);
  EXPECT_NEAR(collision_probability(agent_at(0.0, 0.0), {1.0, 0.0}, 0.25, f, h), 1.0, 1e-9);
}

TEST(Reward, MonteCarloAgreement) {
  const RewardHyper h;
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> pos(-1.5, 1.5);
  std::uniform_real_distribution<double> speed(0.0, 1.0);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  std::uniform_int_distribution<int> count(1, 3);
  double worst = 0.0;
  int partial = 0;
  for (int scene = 0; scene < 20; ++scene) {
    std::vector<sim::ObstacleState> obs;
    for (int i = count(rng); i > 0; --i) {
      const double v = scene % 5 == 0 && i == 1 ? 0.0 : speed(rng);
      const double a = ang(rng);
      obs.push_back(obstacle(pos(rng), pos(rng), v * std::cos(a), v * std::sin(a)));
    }
    const auto agent = agent_at(0.0, 0.0);
    const double s = speed(rng);
    const double a = ang(rng);
    const Vec2 action{s * std::cos(a), s * std::sin(a)};
    const RewardField f = build_grid(obs, h);
    const double p = collision_probability(agent, action, 0.25, f, h);
    const double mc = oracle::monte_carlo_probability(obs, agent.position() + action * 0.25,
                                              norm(action) * h.dt_agent, h, rng);
    worst = std::max(worst, std::fabs(p - mc));
    if (mc > 0.02 && mc < 0.98) ++partial;
    EXPECT_NEAR(p, mc, 0.02) << "scene " << scene;
  }
  EXPECT_GE(partial, 5);  // the draw exercises partial overlaps, not only 0 or 1
  RecordProperty("worst_abs_error", std::to_string(worst));
}

TEST(Reward, BranchValues) {
  const RewardHyper h;
  EXPECT_EQ(adaptive_reward(sim::OutcomeKind::Arrival, 0.7, h), 1.0);
  EXPECT_EQ(adaptive_reward(sim::OutcomeKind::Collision, 0.0, h), -0.25);
  EXPECT_EQ(adaptive_reward(sim::OutcomeKind::None, 0.0, h), 0.0);
  EXPECT_NEAR(adaptive_reward(sim::OutcomeKind::None, 0.1, h), -0.05, 1e-15);
  EXPECT_EQ(adaptive_reward(sim::OutcomeKind::Timeout, 0.0, h), 0.0);
  // -0.25 * p * beta, floored at the collision value.
  EXPECT_EQ(adaptive_reward(sim::OutcomeKind::None, 0.9, h), -0.25);
}

TEST(Reward, VanillaValues) {
  EXPECT_EQ(vanilla_reward(sim::OutcomeKind::Arrival, 0.0), 1.0);
  EXPECT_EQ(vanilla_reward(sim::OutcomeKind::Collision, 0.5), -0.25);
  EXPECT_NEAR(vanilla_reward(sim::OutcomeKind::None, 0.1), -0.05, 1e-15);
  EXPECT_EQ(vanilla_reward(sim::OutcomeKind::None, 0.5), 0.0);
}

TEST(Reward, BetaMonotoneAndBounded) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double p = u(rng);
    RewardHyper lo;
    RewardHyper hi;
    lo.beta = 0.1 + 3.0 * u(rng);
    hi.beta = lo.beta + 3.0 * u(rng);
    const double r_lo = adaptive_reward(sim::OutcomeKind::None, p, lo);
    const double r_hi = adaptive_reward(sim::OutcomeKind::None, p, hi);
    EXPECT_LE(r_hi, r_lo);
    for (double r : {r_lo, r_hi}) {
      EXPECT_GE(r, -0.25);
      EXPECT_LE(r, 1.0);
    }
  }
}

TEST(Reward, StepRewardUsesPreStepField) {
  sim::SimConfig c;
  c.n_obstacles = 0;
  sim::SimState before = sim::reset(c, 0);
  before.obstacles.push_back(obstacle(0.0, -3.0, 0.0, 0.0));
  const Vec2 action{0.0, 1.0};
  const RewardHyper h;
  const RewardField f = build_grid(before.obstacles, h);
  sim::SimState after = before;
  const auto kind = sim::step(after, action).terminal();
  const double r = step_reward(RewardMode::Adaptive, h, before, action, after, kind, f);
  const double p = collision_probability(before.robot, action, c.dt, f, h);
  EXPECT_GT(p, 0.0);
  EXPECT_EQ(r, adaptive_reward(kind, p, h));
  EXPECT_EQ(step_reward(RewardMode::Vanilla, h, before, action, after, kind, f),
            vanilla_reward(kind, sim::min_separation(after)));
}

TEST(Reward, FieldCsv) {
  const std::vector<sim::ObstacleState> one{obstacle(0.0, 0.0, 0.0, 0.0)};
  const RewardField f = build_grid(one, RewardHyper{});
  std::ostringstream out;
  f.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "ix,iy,x,y,value");
  double sum = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    sum += std::stod(line.substr(line.rfind(',') + 1));
    ++rows;
  }
  EXPECT_GT(rows, 10);
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Reward, HyperValidation) {
  RewardHyper h;
  h.beta = 0.0;
  EXPECT_THROW(h.validate(), std::invalid_argument);
  h = {};
  h.grid_resolution = -0.1;
  EXPECT_THROW(h.validate(), std::invalid_argument);
}
