#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "aemcarl/geometry.hpp"
#include "aemcarl/sim.hpp"

namespace aemcarl::reward {

inline constexpr double kArrivalReward = 1.0;
inline constexpr double kCollisionReward = -0.25;

struct RewardHyper {
  double dt_agent = 1.0;     // s, coverage horizon of the robot
  double dt_obstacle = 1.0;  // s, spread horizon of each obstacle
  double delta_xy = 2.0;     // m, std of the positional Gaussians
  double delta_theta = 2.0;  // rad, std of the heading Gaussian
  double beta = 2.0;
  double grid_resolution = 0.1;  // m per cell

  void validate() const;
};

enum class RewardMode { Adaptive, Vanilla };

struct Heading {
  double angle = 0.0;
  bool degenerate = false;  // zero velocity: no preferred direction
};

Heading obstacle_heading(const Vec2& velocity);

// Radius of the disc an obstacle may reach: |v| * dt_obstacle, never smaller
// than its body radius.
double spread_radius(const sim::ObstacleState& o, const RewardHyper& hyper);

// Occupancy probability on a world-aligned grid. Cell (i, j) covers
// [i*res, (i+1)*res) x [j*res, (j+1)*res) and holds the probability mass
// integrated over it.
class RewardField {
 public:
  RewardField() = default;
  explicit RewardField(double resolution) : resolution_(resolution) {}

  double resolution() const { return resolution_; }
  bool empty() const { return cells_.empty(); }
  std::int64_t min_ix() const { return ix0_; }
  std::int64_t min_iy() const { return iy0_; }
  std::int64_t width() const { return nx_; }
  std::int64_t height() const { return ny_; }

  double at(std::int64_t ix, std::int64_t iy) const;
  double at_point(const Vec2& p) const;
  Vec2 cell_center(std::int64_t ix, std::int64_t iy) const;
  double total() const;

  // Cell masses weighted by the fraction of each cell inside the disc,
  // measured on a 4x4 sub-lattice.
  double disc_sum(const Vec2& center, double radius) const;

  // Rows "ix,iy,x,y,value" for every non-zero cell.
  void write_csv(std::ostream& out) const;

  void resize_to(std::int64_t ix0, std::int64_t iy0, std::int64_t ix1, std::int64_t iy1);
  double& cell(std::int64_t ix, std::int64_t iy);

 private:
  double resolution_ = 0.1;
  std::int64_t ix0_ = 0, iy0_ = 0, nx_ = 0, ny_ = 0;
  std::vector<double> cells_;
};

// Accumulates every obstacle's Gaussian-product density over its spread disc,
// each normalized to unit mass. Cell mass is a 4x4 sub-lattice quadrature.
RewardField build_grid(std::span<const sim::ObstacleState> obstacles, const RewardHyper& hyper);

// Unnormalized density of one obstacle at point p (zero outside its disc).
double obstacle_density(const sim::ObstacleState& o, const Vec2& p, const RewardHyper& hyper);

// Probability mass inside the robot's coverage disc of radius
// |action| * dt_agent centred at its next position p + action * dt.
double collision_probability(const sim::AgentState& agent, const Vec2& action, double dt,
                             const RewardField& field, const RewardHyper& hyper);

// 1 on arrival, -0.25 on collision, otherwise -0.25 * p * beta (floored at -0.25).
double adaptive_reward(sim::OutcomeKind kind, double p_collision, const RewardHyper& hyper);

// Nearest-obstacle discomfort penalty: -0.1 + d_min / 2 when d_min < 0.2.
double vanilla_reward(sim::OutcomeKind kind, double d_min);

// Reward of moving from `before` under `action` into `after` with the given
// terminal kind. `field` must be built from `before` (adaptive mode only).
double step_reward(RewardMode mode, const RewardHyper& hyper, const sim::SimState& before,
                   const Vec2& action, const sim::SimState& after, sim::OutcomeKind kind,
                   const RewardField& field);

}  // namespace aemcarl::reward
