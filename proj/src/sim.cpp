#include "aemcarl/sim.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

namespace aemcarl::sim {

namespace {

constexpr int kPlacementRetries = 1000;
// Extra clearance between initial positions, and between goals. Kept small so
// 20 obstacles still fit on a 4 m circle.
constexpr double kPlacementGap = 0.05;
constexpr double kTimeTolerance = 1e-9;

bool clear_of(const Vec2& p, double r, const std::vector<std::pair<Vec2, double>>& taken) {
  for (const auto& [q, rq] : taken) {
    if (norm(p - q) <= r + rq + kPlacementGap) return false;
  }
  return true;
}

}  // namespace

double AgentState::theta() const { return std::atan2(vy, vx); }

void SimConfig::validate() const {
  if (n_obstacles < 0) throw std::invalid_argument("sim: n_obstacles must be >= 0");
  if (!(circle_radius > 0.0)) throw std::invalid_argument("sim: circle_radius must be > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("sim: dt must be > 0");
  if (!(time_limit >= dt)) throw std::invalid_argument("sim: time_limit must be >= dt");
  if (!(arrival_threshold > 0.0)) throw std::invalid_argument("sim: arrival_threshold must be > 0");
  if (!(robot_radius > 0.0) || !(obstacle_radius > 0.0)) {
    throw std::invalid_argument("sim: radii must be > 0");
  }
  if (!(robot_v_pref > 0.0) || !(obstacle_v_pref > 0.0)) {
    throw std::invalid_argument("sim: v_pref must be > 0");
  }
  obstacle_orca.validate();
}

bool SimState::operator==(const SimState& o) const {
  auto same_agent = [](const AgentState& a, const AgentState& b) {
    return a.px == b.px && a.py == b.py && a.vx == b.vx && a.vy == b.vy && a.gx == b.gx &&
           a.gy == b.gy && a.v_pref == b.v_pref && a.radius == b.radius;
  };
  auto same_obstacle = [](const ObstacleState& a, const ObstacleState& b) {
    return a.px == b.px && a.py == b.py && a.vx == b.vx && a.vy == b.vy && a.gx == b.gx &&
           a.gy == b.gy && a.v_pref == b.v_pref && a.radius == b.radius;
  };
  if (!same_agent(robot, o.robot) || time != o.time || steps != o.steps) return false;
  if (obstacles.size() != o.obstacles.size()) return false;
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    if (!same_obstacle(obstacles[i], o.obstacles[i])) return false;
  }
  return true;
}

const char* to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::None: return "none";
    case OutcomeKind::Arrival: return "arrival";
    case OutcomeKind::Collision: return "collision";
    case OutcomeKind::Timeout: return "timeout";
  }
  return "unknown";
}

OutcomeKind StepEvents::terminal() const {
  if (collision) return OutcomeKind::Collision;
  if (arrival) return OutcomeKind::Arrival;
  if (timeout) return OutcomeKind::Timeout;
  return OutcomeKind::None;
}

SimState reset(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  SimState state;
  state.config = config;
  state.config.seed = seed;

  const double r = config.circle_radius;
  state.robot.px = 0.0;
  state.robot.py = -r;
  state.robot.gx = 0.0;
  state.robot.gy = r;
  state.robot.v_pref = config.robot_v_pref;
  state.robot.radius = config.robot_radius;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle_dist(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> jitter_dist(-config.goal_jitter, config.goal_jitter);

  std::vector<std::pair<Vec2, double>> starts{{state.robot.position(), state.robot.radius}};
  std::vector<std::pair<Vec2, double>> goals{{state.robot.goal(), state.robot.radius}};

  for (int i = 0; i < config.n_obstacles; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      const double angle = angle_dist(rng);
      const double goal_angle = angle + M_PI + jitter_dist(rng);
      const Vec2 start{r * std::cos(angle), r * std::sin(angle)};
      const Vec2 goal{r * std::cos(goal_angle), r * std::sin(goal_angle)};
      const double radius = config.obstacle_radius;
      if (!clear_of(start, radius, starts) || !clear_of(goal, radius, goals)) continue;

      ObstacleState o;
      o.px = start.x;
      o.py = start.y;
      o.gx = goal.x;
      o.gy = goal.y;
      o.v_pref = config.obstacle_v_pref;
      o.radius = radius;
      state.obstacles.push_back(o);
      starts.emplace_back(start, radius);
      goals.emplace_back(goal, radius);
      placed = true;
    }
    if (!placed) throw std::runtime_error("cannot place agents without overlap");
  }
  return state;
}

orca::OrcaAgent robot_view(const SimState& state) {
  const auto& a = state.robot;
  return {a.position(), a.velocity(), a.goal(), a.radius, a.v_pref};
}

std::vector<orca::OrcaNeighbor> obstacle_views(const SimState& state) {
  std::vector<orca::OrcaNeighbor> out;
  out.reserve(state.obstacles.size());
  for (const auto& o : state.obstacles) out.push_back({o.position(), o.velocity(), o.radius});
  return out;
}

StepEvents check_events(const SimState& state) {
  StepEvents ev;
  const auto& a = state.robot;
  for (const auto& o : state.obstacles) {
    if (norm(o.position() - a.position()) < a.radius + o.radius) {
      ev.collision = true;
      break;
    }
  }
  ev.arrival = a.goal_distance() < state.config.arrival_threshold;
  ev.timeout = state.time >= state.config.time_limit - kTimeTolerance;
  return ev;
}

StepEvents step(SimState& state, const Vec2& robot_action) {
  auto& robot = state.robot;
  if (norm(robot_action) > robot.v_pref + 1e-9) {
    throw std::invalid_argument("sim::step: action speed exceeds v_pref");
  }
  const double dt = state.config.dt;
  const bool visible = state.config.visibility == Visibility::Visible;

  // Obstacle velocities are decided synchronously from the pre-step state.
  std::vector<Vec2> next_velocity(state.obstacles.size());
  std::vector<orca::OrcaNeighbor> neighbors;
  neighbors.reserve(state.obstacles.size());
  for (std::size_t i = 0; i < state.obstacles.size(); ++i) {
    const auto& self = state.obstacles[i];
    neighbors.clear();
    for (std::size_t j = 0; j < state.obstacles.size(); ++j) {
      if (j == i) continue;
      const auto& o = state.obstacles[j];
      neighbors.push_back({o.position(), o.velocity(), o.radius});
    }
    if (visible) neighbors.push_back({robot.position(), robot.velocity(), robot.radius});
    const orca::OrcaAgent view{self.position(), self.velocity(), self.goal(), self.radius,
                               self.v_pref};
    next_velocity[i] = orca::compute_velocity(view, neighbors, state.config.obstacle_orca, dt);
  }

  for (std::size_t i = 0; i < state.obstacles.size(); ++i) {
    auto& o = state.obstacles[i];
    o.vx = next_velocity[i].x;
    o.vy = next_velocity[i].y;
    o.px += o.vx * dt;
    o.py += o.vy * dt;
  }
  robot.vx = robot_action.x;
  robot.vy = robot_action.y;
  robot.px += robot.vx * dt;
  robot.py += robot.vy * dt;

  state.steps += 1;
  state.time = state.steps * dt;
  return check_events(state);
}

Tensor observe(const SimState& state) { return observe(state, state.config.robot_centric); }

Tensor observe(const SimState& state, bool robot_centric) {
  const auto& a = state.robot;
  const auto n = static_cast<Eigen::Index>(state.obstacles.size());
  Tensor s = Tensor::Zero(n + 1, kJointFields);

  Vec2 vel = a.velocity();
  Vec2 pos = a.position();
  Vec2 goal = a.goal();
  double angle = 0.0;
  if (robot_centric) {
    const Vec2 to_goal = goal - pos;
    angle = std::atan2(to_goal.y, to_goal.x);
    vel = rotate(vel, -angle);
    pos = {0.0, 0.0};
    goal = {norm(to_goal), 0.0};
  }
  const double ego[kAgentFields] = {vel.x, vel.y, pos.x, pos.y, goal.x, goal.y, a.v_pref};

  for (Eigen::Index row = 0; row <= n; ++row) {
    for (int c = 0; c < kAgentFields; ++c) s(row, c) = ego[c];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = state.obstacles[static_cast<std::size_t>(i)];
    Vec2 ov = o.velocity();
    Vec2 op = o.position();
    if (robot_centric) {
      ov = rotate(ov, -angle);
      op = rotate(op - a.position(), -angle);
    }
    s(i + 1, kAgentFields + 0) = ov.x;
    s(i + 1, kAgentFields + 1) = ov.y;
    s(i + 1, kAgentFields + 2) = op.x;
    s(i + 1, kAgentFields + 3) = op.y;
    s(i + 1, kAgentFields + 4) = o.v_pref;
  }
  return s;
}

double min_separation(const SimState& state) {
  double best = kNoObstacle;
  const auto& a = state.robot;
  for (const auto& o : state.obstacles) {
    best = std::min(best, norm(o.position() - a.position()) - a.radius - o.radius);
  }
  return best;
}

void append_trajectory(const SimState& state, std::vector<TrajectoryRow>& rows) {
  const auto& a = state.robot;
  rows.push_back({state.steps, 0, a.px, a.py, a.vx, a.vy, a.radius});
  int id = 1;
  for (const auto& o : state.obstacles) {
    rows.push_back({state.steps, id++, o.px, o.py, o.vx, o.vy, o.radius});
  }
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
  out << "step,agent_id,px,py,vx,vy,radius\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.step << ',' << r.agent_id << ',' << r.px << ',' << r.py << ',' << r.vx << ','
        << r.vy << ',' << r.radius << '\n';
  }
}

}  // namespace aemcarl::sim
