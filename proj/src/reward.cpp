#include "aemcarl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace aemcarl::reward {

namespace {

constexpr double kStillSpeed = 1e-9;
constexpr double kVanillaDiscomfort = 0.2;
// Sub-samples per cell axis. Cell masses and disc coverage are integrated on
// this finer lattice so that p_collision does not jump by whole cells.
constexpr int kSub = 4;

double gaussian(double x, double sigma) {
  return std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2.0 * M_PI));
}

std::int64_t cell_index(double coord, double res) {
  return static_cast<std::int64_t>(std::floor(coord / res));
}

}  // namespace

void RewardHyper::validate() const {
  if (!(dt_agent > 0.0 && dt_obstacle > 0.0 && delta_xy > 0.0 && delta_theta > 0.0 &&
        beta > 0.0 && grid_resolution > 0.0)) {
    throw std::invalid_argument("reward: hyper-parameters must all be positive");
  }
}

Heading obstacle_heading(const Vec2& velocity) {
  if (norm(velocity) < kStillSpeed) return {0.0, true};
  return {std::atan2(velocity.y, velocity.x), false};
}

double spread_radius(const sim::ObstacleState& o, const RewardHyper& hyper) {
  return std::max(norm(o.velocity()) * hyper.dt_obstacle, o.radius);
}

double RewardField::at(std::int64_t ix, std::int64_t iy) const {
  const std::int64_t x = ix - ix0_;
  const std::int64_t y = iy - iy0_;
  if (x < 0 || y < 0 || x >= nx_ || y >= ny_) return 0.0;
  return cells_[static_cast<std::size_t>(y * nx_ + x)];
}

double RewardField::at_point(const Vec2& p) const {
  return at(cell_index(p.x, resolution_), cell_index(p.y, resolution_));
}

Vec2 RewardField::cell_center(std::int64_t ix, std::int64_t iy) const {
  return {(static_cast<double>(ix) + 0.5) * resolution_, (static_cast<double>(iy) + 0.5) * resolution_};
}

double RewardField::total() const {
  double sum = 0.0;
  for (double v : cells_) sum += v;
  return sum;
}

double RewardField::disc_sum(const Vec2& center, double radius) const {
  if (cells_.empty() || radius <= 0.0) return 0.0;
  const std::int64_t x_lo = std::max(cell_index(center.x - radius, resolution_), ix0_);
  const std::int64_t x_hi = std::min(cell_index(center.x + radius, resolution_), ix0_ + nx_ - 1);
  const std::int64_t y_lo = std::max(cell_index(center.y - radius, resolution_), iy0_);
  const std::int64_t y_hi = std::min(cell_index(center.y + radius, resolution_), iy0_ + ny_ - 1);
  const double r_sq = radius * radius;
  const double half = 0.5 * resolution_;
  const double step = resolution_ / kSub;
  double sum = 0.0;
  for (std::int64_t iy = y_lo; iy <= y_hi; ++iy) {
    for (std::int64_t ix = x_lo; ix <= x_hi; ++ix) {
      const double v = cells_[static_cast<std::size_t>((iy - iy0_) * nx_ + (ix - ix0_))];
      if (v == 0.0) continue;
      const Vec2 c = cell_center(ix, iy);
      // Nearest and farthest points of the cell decide the easy cases.
      const double nx = std::max(std::fabs(c.x - center.x) - half, 0.0);
      const double ny = std::max(std::fabs(c.y - center.y) - half, 0.0);
      if (nx * nx + ny * ny > r_sq) continue;
      const double fx = std::fabs(c.x - center.x) + half;
      const double fy = std::fabs(c.y - center.y) + half;
      if (fx * fx + fy * fy <= r_sq) {
        sum += v;
        continue;
      }
      int inside = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const Vec2 q{c.x - half + (sx + 0.5) * step, c.y - half + (sy + 0.5) * step};
          if (abs_sq(q - center) <= r_sq) ++inside;
        }
      }
      sum += v * inside / (kSub * kSub);
    }
  }
  return sum;
}

void RewardField::write_csv(std::ostream& out) const {
  out << "ix,iy,x,y,value\n";
  out.precision(17);
  for (std::int64_t y = 0; y < ny_; ++y) {
    for (std::int64_t x = 0; x < nx_; ++x) {
      const double v = cells_[static_cast<std::size_t>(y * nx_ + x)];
      if (v == 0.0) continue;
      const Vec2 c = cell_center(ix0_ + x, iy0_ + y);
      out << ix0_ + x << ',' << iy0_ + y << ',' << c.x << ',' << c.y << ',' << v << '\n';
    }
  }
}

void RewardField::resize_to(std::int64_t ix0, std::int64_t iy0, std::int64_t ix1, std::int64_t iy1) {
  ix0_ = ix0;
  iy0_ = iy0;
  nx_ = ix1 - ix0 + 1;
  ny_ = iy1 - iy0 + 1;
  cells_.assign(static_cast<std::size_t>(nx_ * ny_), 0.0);
}

double& RewardField::cell(std::int64_t ix, std::int64_t iy) {
  return cells_[static_cast<std::size_t>((iy - iy0_) * nx_ + (ix - ix0_))];
}

double obstacle_density(const sim::ObstacleState& o, const Vec2& p, const RewardHyper& hyper) {
  const Vec2 d = p - o.position();
  if (norm(d) > spread_radius(o, hyper)) return 0.0;
  double density = gaussian(d.x, hyper.delta_xy) * gaussian(d.y, hyper.delta_xy);
  const Heading heading = obstacle_heading(o.velocity());
  if (!heading.degenerate) {
    const double theta = std::atan2(d.y, d.x);
    density *= gaussian(wrap_angle(theta - heading.angle), hyper.delta_theta);
  }
  return density;
}

RewardField build_grid(std::span<const sim::ObstacleState> obstacles, const RewardHyper& hyper) {
  hyper.validate();
  const double res = hyper.grid_resolution;
  RewardField field(res);
  if (obstacles.empty()) return field;

  constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
  constexpr auto kMin = std::numeric_limits<std::int64_t>::min();
  std::int64_t x0 = kMax, y0 = kMax, x1 = kMin, y1 = kMin;
  for (const auto& o : obstacles) {
    const double r = spread_radius(o, hyper);
    x0 = std::min(x0, cell_index(o.px - r, res));
    y0 = std::min(y0, cell_index(o.py - r, res));
    x1 = std::max(x1, cell_index(o.px + r, res));
    y1 = std::max(y1, cell_index(o.py + r, res));
  }
  field.resize_to(x0, y0, x1, y1);

  std::vector<std::pair<std::int64_t, std::int64_t>> cells;
  std::vector<double> weights;
  for (const auto& o : obstacles) {
    const double r = spread_radius(o, hyper);
    cells.clear();
    weights.clear();
    double mass = 0.0;
    for (std::int64_t iy = cell_index(o.py - r, res); iy <= cell_index(o.py + r, res); ++iy) {
      for (std::int64_t ix = cell_index(o.px - r, res); ix <= cell_index(o.px + r, res); ++ix) {
        const Vec2 c = field.cell_center(ix, iy);
        double w = 0.0;
        for (int sy = 0; sy < kSub; ++sy) {
          for (int sx = 0; sx < kSub; ++sx) {
            const Vec2 q{c.x - 0.5 * res + (sx + 0.5) * res / kSub, c.y - 0.5 * res + (sy + 0.5) * res / kSub};
            w += obstacle_density(o, q, hyper);
          }
        }
        if (w <= 0.0) continue;
        cells.emplace_back(ix, iy);
        weights.push_back(w);
        mass += w;
      }
    }
    if (cells.empty()) {
      // Disc smaller than a cell: all mass in the cell holding the obstacle.
      field.cell(cell_index(o.px, res), cell_index(o.py, res)) += 1.0;
      continue;
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      field.cell(cells[i].first, cells[i].second) += weights[i] / mass;
    }
  }
  return field;
}

double collision_probability(const sim::AgentState& agent, const Vec2& action, double dt,
                             const RewardField& field, const RewardHyper& hyper) {
  const Vec2 next = agent.position() + action * dt;
  const double radius = norm(action) * hyper.dt_agent;
  return std::clamp(field.disc_sum(next, radius), 0.0, 1.0);
}

double adaptive_reward(sim::OutcomeKind kind, double p_collision, const RewardHyper& hyper) {
  switch (kind) {
    case sim::OutcomeKind::Arrival: return kArrivalReward;
    case sim::OutcomeKind::Collision: return kCollisionReward;
    default: break;
  }
  return std::max(kCollisionReward, kCollisionReward * p_collision * hyper.beta);
}

double vanilla_reward(sim::OutcomeKind kind, double d_min) {
  switch (kind) {
    case sim::OutcomeKind::Arrival: return kArrivalReward;
    case sim::OutcomeKind::Collision: return kCollisionReward;
    default: break;
  }
  if (d_min < kVanillaDiscomfort) return -0.1 + d_min / 2.0;
  return 0.0;
}

double step_reward(RewardMode mode, const RewardHyper& hyper, const sim::SimState& before,
                   const Vec2& action, const sim::SimState& after, sim::OutcomeKind kind,
                   const RewardField& field) {
  if (mode == RewardMode::Vanilla) return vanilla_reward(kind, sim::min_separation(after));
  if (kind == sim::OutcomeKind::Arrival || kind == sim::OutcomeKind::Collision) {
    return adaptive_reward(kind, 0.0, hyper);
  }
  const double p = collision_probability(before.robot, action, before.config.dt, field, hyper);
  return adaptive_reward(kind, p, hyper);
}

}  // namespace aemcarl::reward
