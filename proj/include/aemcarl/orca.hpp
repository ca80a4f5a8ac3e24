#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aemcarl/geometry.hpp"

namespace aemcarl::orca {

struct OrcaParams {
  double time_horizon = 5.0;   // s
  double neighbor_dist = 10.0; // m
  int max_neighbors = 10;
  double safety_margin = 0.01; // m, added to the combined radius

  void validate() const;
};

// Feasible side is {v : dot(v - point, normal) >= 0}.
struct HalfPlane {
  Vec2 point;
  Vec2 normal;  // unit length

  double signed_distance(const Vec2& v) const { return dot(v - point, normal); }
  // Direction along the boundary with the feasible side on its left.
  Vec2 direction() const { return {normal.y, -normal.x}; }
};

// The controlled agent as ORCA sees it.
struct OrcaAgent {
  Vec2 position;
  Vec2 velocity;
  Vec2 goal;
  double radius = 0.3;
  double v_pref = 1.0;
};

struct OrcaNeighbor {
  Vec2 position;
  Vec2 velocity;
  double radius = 0.3;
};

enum class LpStatus { Feasible, Infeasible };

struct LpResult {
  LpStatus status = LpStatus::Feasible;
  Vec2 velocity;
  // Index of the first constraint that could not be satisfied; equals the
  // constraint count when feasible.
  std::size_t failed_index = 0;

  bool feasible() const { return status == LpStatus::Feasible; }
};

// Closest velocity to `preferred` inside the disc of radius `max_speed`
// satisfying every half-plane. Constraints are added incrementally in the
// given order.
LpResult solve_lp2(std::span<const HalfPlane> constraints, const Vec2& preferred,
                   double max_speed);

// Fallback for infeasible systems: minimizes the largest constraint
// violation, starting from the partial result of solve_lp2.
Vec2 solve_lp3(std::span<const HalfPlane> constraints, const LpResult& partial,
               double max_speed);

// Goal-directed velocity with speed min(v_pref, dist / dt).
Vec2 preferred_velocity(const OrcaAgent& self, double dt);

// Reciprocal half-planes against the nearest `max_neighbors` neighbors
// within `neighbor_dist`, ordered by distance.
std::vector<HalfPlane> build_constraints(const OrcaAgent& self,
                                         std::span<const OrcaNeighbor> neighbors,
                                         const OrcaParams& params, double dt);

Vec2 compute_velocity(const OrcaAgent& self, std::span<const OrcaNeighbor> neighbors,
                      const OrcaParams& params, double dt);

// Demonstration action for imitation learning: the robot runs ORCA with every
// obstacle as a neighbor.
Vec2 demo_action(const OrcaAgent& robot, std::span<const OrcaNeighbor> obstacles,
                 const OrcaParams& params, double dt);

}  // namespace aemcarl::orca
