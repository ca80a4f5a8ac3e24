#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "aemcarl/geometry.hpp"
#include "aemcarl/orca.hpp"
#include "aemcarl/tensor.hpp"

namespace aemcarl::sim {

// Per-row field counts of the joint state.
inline constexpr int kAgentFields = 7;
inline constexpr int kObstacleFields = 5;
inline constexpr int kJointFields = kAgentFields + kObstacleFields;

struct AgentState {
  double px = 0.0, py = 0.0;
  double vx = 0.0, vy = 0.0;
  double gx = 0.0, gy = 0.0;
  double v_pref = 1.0;
  double radius = 0.3;

  Vec2 position() const { return {px, py}; }
  Vec2 velocity() const { return {vx, vy}; }
  Vec2 goal() const { return {gx, gy}; }
  double theta() const;
  double goal_distance() const { return norm(goal() - position()); }
};

struct ObstacleState {
  double px = 0.0, py = 0.0;
  double vx = 0.0, vy = 0.0;
  double v_pref = 1.0;
  double radius = 0.3;
  double gx = 0.0, gy = 0.0;  // goal of the obstacle's own ORCA controller

  Vec2 position() const { return {px, py}; }
  Vec2 velocity() const { return {vx, vy}; }
  Vec2 goal() const { return {gx, gy}; }
};

enum class Visibility { Visible, Invisible };

struct SimConfig {
  int n_obstacles = 5;
  double circle_radius = 4.0;
  double dt = 0.25;
  double time_limit = 20.0;
  Visibility visibility = Visibility::Invisible;
  std::uint64_t seed = 0;
  double arrival_threshold = 0.1;
  double danger_threshold = 0.2;

  double robot_radius = 0.3;
  double robot_v_pref = 1.0;
  double obstacle_radius = 0.3;
  double obstacle_v_pref = 1.0;
  double goal_jitter = M_PI / 10.0;  // rad, applied to each obstacle's antipodal goal
  bool robot_centric = true;         // goal-aligned observation frame
  orca::OrcaParams obstacle_orca;

  void validate() const;
};

struct SimState {
  SimConfig config;
  AgentState robot;
  std::vector<ObstacleState> obstacles;
  double time = 0.0;
  int steps = 0;

  bool operator==(const SimState& other) const;
};

enum class OutcomeKind { None, Arrival, Collision, Timeout };

const char* to_string(OutcomeKind kind);

struct StepEvents {
  bool collision = false;
  bool arrival = false;
  bool timeout = false;

  // Collision takes precedence over arrival, arrival over timeout.
  OutcomeKind terminal() const;
  bool done() const { return terminal() != OutcomeKind::None; }
};

struct EpisodeOutcome {
  OutcomeKind kind = OutcomeKind::None;
  double nav_time = 0.0;
  std::vector<double> min_separations;
};

// Circle-crossing scenario: robot at (0, -R) heading to (0, R); obstacles on
// the circle with jittered antipodal goals. Throws std::runtime_error
// "cannot place agents without overlap" when retries are exhausted.
SimState reset(const SimConfig& config, std::uint64_t seed);

// Advances the world by one dt. Obstacles are ORCA-controlled; in invisible
// mode they never see the robot. Mutates `state` in place.
StepEvents step(SimState& state, const Vec2& robot_action);

// Terminal checks on the current configuration without advancing time.
StepEvents check_events(const SimState& state);

// (N+1) x 12 network input. Row 0 is the ego state followed by zeros.
Tensor observe(const SimState& state);
Tensor observe(const SimState& state, bool robot_centric);

// Smallest surface gap between the robot and any obstacle; +inf when N = 0.
double min_separation(const SimState& state);

// ORCA view of the robot and of the obstacles, for demonstration actions.
orca::OrcaAgent robot_view(const SimState& state);
std::vector<orca::OrcaNeighbor> obstacle_views(const SimState& state);

// One row of trajectory output per agent per step. agent_id 0 is the robot.
struct TrajectoryRow {
  int step = 0;
  int agent_id = 0;
  double px = 0.0, py = 0.0, vx = 0.0, vy = 0.0, radius = 0.0;
};

void append_trajectory(const SimState& state, std::vector<TrajectoryRow>& rows);
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

inline constexpr double kNoObstacle = std::numeric_limits<double>::infinity();

}  // namespace aemcarl::sim
