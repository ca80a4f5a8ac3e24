#include "aemcarl/orca.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aemcarl::orca {

namespace {

constexpr double kEpsilon = 1e-12;
constexpr double kTieBreakRotation = 1e-6;

struct Line {
  Vec2 point;
  Vec2 direction;
};

Line to_line(const HalfPlane& h) { return {h.point, h.direction()}; }

// Point on line `line_no` closest to the optimum, subject to the earlier lines
// and the speed disc. Returns false when the line has no feasible segment.
bool lp1(std::span<const Line> lines, std::size_t line_no, double radius,
         const Vec2& opt, bool direction_opt, Vec2& result) {
  const Line& line = lines[line_no];
  const double dot_product = dot(line.point, line.direction);
  const double discriminant = dot_product * dot_product + radius * radius - abs_sq(line.point);
  if (discriminant < 0.0) return false;

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot_product - sqrt_disc;
  double t_right = -dot_product + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = det(line.direction, lines[i].direction);
    const double numerator = det(lines[i].direction, line.point - lines[i].point);
    if (std::fabs(denominator) <= kEpsilon) {
      if (numerator < 0.0) return false;
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    result = dot(opt, line.direction) > 0.0 ? line.point + t_right * line.direction
                                             : line.point + t_left * line.direction;
  } else {
    const double t = dot(line.direction, opt - line.point);
    if (t < t_left) {
      result = line.point + t_left * line.direction;
    } else if (t > t_right) {
      result = line.point + t_right * line.direction;
    } else {
      result = line.point + t * line.direction;
    }
  }
  return true;
}

std::size_t lp2(std::span<const Line> lines, double radius, const Vec2& opt,
                bool direction_opt, Vec2& result) {
  if (direction_opt) {
    result = opt * radius;
  } else if (abs_sq(opt) > radius * radius) {
    result = opt / norm(opt) * radius;
  } else {
    result = opt;
  }

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) > 0.0) {
      const Vec2 previous = result;
      if (!lp1(lines, i, radius, opt, direction_opt, result)) {
        result = previous;
        return i;
      }
    }
  }
  return lines.size();
}

}  // namespace

void OrcaParams::validate() const {
  if (!(time_horizon > 0.0)) throw std::invalid_argument("orca: time_horizon must be > 0");
  if (!(neighbor_dist > 0.0)) throw std::invalid_argument("orca: neighbor_dist must be > 0");
  if (max_neighbors < 0) throw std::invalid_argument("orca: max_neighbors must be >= 0");
  if (safety_margin < 0.0) throw std::invalid_argument("orca: safety_margin must be >= 0");
}

LpResult solve_lp2(std::span<const HalfPlane> constraints, const Vec2& preferred,
                   double max_speed) {
  if (!(max_speed > 0.0)) throw std::invalid_argument("solve_lp2: max_speed must be > 0");
  std::vector<Line> lines;
  lines.reserve(constraints.size());
  for (const auto& h : constraints) lines.push_back(to_line(h));

  LpResult out;
  out.failed_index = lp2(lines, max_speed, preferred, false, out.velocity);
  out.status = out.failed_index < lines.size() ? LpStatus::Infeasible : LpStatus::Feasible;
  return out;
}

Vec2 solve_lp3(std::span<const HalfPlane> constraints, const LpResult& partial,
               double max_speed) {
  std::vector<Line> lines;
  lines.reserve(constraints.size());
  for (const auto& h : constraints) lines.push_back(to_line(h));

  Vec2 result = partial.velocity;
  double distance = 0.0;
  for (std::size_t i = partial.failed_index; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) <= distance) continue;

    std::vector<Line> projected;
    projected.reserve(i);
    for (std::size_t j = 0; j < i; ++j) {
      Line line;
      const double determinant = det(lines[i].direction, lines[j].direction);
      if (std::fabs(determinant) <= kEpsilon) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;  // same direction
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (det(lines[j].direction, lines[i].point - lines[j].point) / determinant) *
                         lines[i].direction;
      }
      const Vec2 d = lines[j].direction - lines[i].direction;
      line.direction = d / norm(d);
      projected.push_back(line);
    }

    const Vec2 previous = result;
    const Vec2 towards{-lines[i].direction.y, lines[i].direction.x};
    if (lp2(projected, max_speed, towards, true, result) < projected.size()) {
      // Only reachable through floating-point error; keep the last good value.
      result = previous;
    }
    distance = det(lines[i].direction, lines[i].point - result);
  }
  return result;
}

Vec2 preferred_velocity(const OrcaAgent& self, double dt) {
  const Vec2 to_goal = self.goal - self.position;
  const double dist = norm(to_goal);
  if (dist <= 0.0) return {};
  const double speed = std::min(self.v_pref, dist / dt);
  return to_goal / dist * speed;
}

std::vector<HalfPlane> build_constraints(const OrcaAgent& self,
                                         std::span<const OrcaNeighbor> neighbors,
                                         const OrcaParams& params, double dt) {
  std::vector<std::size_t> order;
  std::vector<double> dist_sq(neighbors.size());
  const double range_sq = params.neighbor_dist * params.neighbor_dist;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    dist_sq[i] = abs_sq(neighbors[i].position - self.position);
    if (dist_sq[i] < range_sq) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist_sq[a] < dist_sq[b]; });
  if (order.size() > static_cast<std::size_t>(params.max_neighbors)) {
    order.resize(static_cast<std::size_t>(params.max_neighbors));
  }

  const double inv_horizon = 1.0 / params.time_horizon;
  std::vector<HalfPlane> planes;
  planes.reserve(order.size());
  for (std::size_t idx : order) {
    const OrcaNeighbor& other = neighbors[idx];
    const Vec2 rel_pos = other.position - self.position;
    const Vec2 rel_vel = self.velocity - other.velocity;
    const double d_sq = abs_sq(rel_pos);
    const double combined = self.radius + other.radius + params.safety_margin;
    const double combined_sq = combined * combined;

    Vec2 direction;
    Vec2 u;
    if (d_sq > combined_sq) {
      const Vec2 w = rel_vel - inv_horizon * rel_pos;
      const double w_len_sq = abs_sq(w);
      const double dot_product = dot(w, rel_pos);
      if (dot_product < 0.0 && dot_product * dot_product > combined_sq * w_len_sq) {
        // Project on the cut-off circle.
        const double w_len = std::sqrt(w_len_sq);
        const Vec2 unit_w = w / w_len;
        direction = {unit_w.y, -unit_w.x};
        u = (combined * inv_horizon - w_len) * unit_w;
      } else {
        // Project on the nearer leg of the cone.
        const double leg = std::sqrt(d_sq - combined_sq);
        if (det(rel_pos, w) > 0.0) {
          direction = Vec2{rel_pos.x * leg - rel_pos.y * combined,
                           rel_pos.x * combined + rel_pos.y * leg} /
                      d_sq;
        } else {
          direction = -Vec2{rel_pos.x * leg + rel_pos.y * combined,
                            -rel_pos.x * combined + rel_pos.y * leg} /
                      d_sq;
        }
        u = dot(rel_vel, direction) * direction - rel_vel;
      }
    } else {
      // Already overlapping: resolve within one time step.
      const double inv_dt = 1.0 / dt;
      const Vec2 w = rel_vel - inv_dt * rel_pos;
      const double w_len = norm(w);
      const Vec2 unit_w = w_len > 0.0 ? w / w_len : Vec2{1.0, 0.0};
      direction = {unit_w.y, -unit_w.x};
      u = (combined * inv_dt - w_len) * unit_w;
    }

    HalfPlane plane;
    plane.point = self.velocity + 0.5 * u;
    plane.normal = {-direction.y, direction.x};
    const double n = norm(plane.normal);
    plane.normal = plane.normal / n;
    planes.push_back(plane);
  }
  return planes;
}

Vec2 compute_velocity(const OrcaAgent& self, std::span<const OrcaNeighbor> neighbors,
                      const OrcaParams& params, double dt) {
  if (!(self.v_pref > 0.0)) throw std::invalid_argument("orca: v_pref must be > 0");
  const auto planes = build_constraints(self, neighbors, params, dt);
  if (planes.empty()) return preferred_velocity(self, dt);

  const Vec2 preferred = rotate(preferred_velocity(self, dt), kTieBreakRotation);
  const LpResult lp = solve_lp2(planes, preferred, self.v_pref);
  Vec2 v = lp.feasible() ? lp.velocity : solve_lp3(planes, lp, self.v_pref);

  // Guard against round-off pushing the result a hair outside the disc.
  const double speed = norm(v);
  if (speed > self.v_pref) v = v / speed * self.v_pref;
  return v;
}

Vec2 demo_action(const OrcaAgent& robot, std::span<const OrcaNeighbor> obstacles,
                 const OrcaParams& params, double dt) {
  return compute_velocity(robot, obstacles, params, dt);
}

}  // namespace aemcarl::orca
