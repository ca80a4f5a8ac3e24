#include "aemcarl/policy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace aemcarl::policy {

ActionSpace ActionSpace::build(double v_pref, int n_speeds, int n_headings) {
  if (!(v_pref > 0.0)) throw std::invalid_argument("action space: v_pref must be > 0");
  if (n_speeds < 1 || n_headings < 1) throw std::invalid_argument("action space: empty grid");
  ActionSpace space;
  for (int k = 1; k <= n_speeds; ++k) {
    const double speed = k == n_speeds
                             ? v_pref
                             : v_pref * (std::exp(static_cast<double>(k) / n_speeds) - 1.0) /
                                   (M_E - 1.0);
    space.speeds.push_back(speed);
  }
  for (int j = 0; j < n_headings; ++j) {
    space.headings.push_back(2.0 * M_PI * static_cast<double>(j) / n_headings);
  }
  for (double speed : space.speeds) {
    for (double heading : space.headings) {
      space.actions.push_back({speed * std::cos(heading), speed * std::sin(heading)});
    }
  }
  return space;
}

sim::SimState propagate(const sim::SimState& state, const Vec2& action, double dt) {
  sim::SimState next = state;
  next.robot.vx = action.x;
  next.robot.vy = action.y;
  next.robot.px += action.x * dt;
  next.robot.py += action.y * dt;
  for (auto& o : next.obstacles) {
    o.px += o.vx * dt;
    o.py += o.vy * dt;
  }
  next.time += dt;
  return next;
}

double step_discount(double gamma, double dt, double v_pref) { return std::pow(gamma, dt * v_pref); }

ValuePolicy::ValuePolicy(ValueNetwork& net, ValuePolicyConfig config)
    : net_(&net), config_(std::move(config)), rng_(config_.seed) {}

void ValuePolicy::reset(const sim::SimState& initial) {
  if (actions_.size() == 0) actions_ = ActionSpace::build(initial.robot.v_pref);
  hidden_.resize(0, 0);
}

std::vector<double> ValuePolicy::scores(const sim::SimState& state, Decision* best) {
  if (actions_.size() == 0) actions_ = ActionSpace::build(state.robot.v_pref);
  const double dt = state.config.dt;
  const double discount = step_discount(config_.gamma, dt, state.robot.v_pref);

  reward::RewardField field;
  if (config_.reward_mode == reward::RewardMode::Adaptive) {
    field = reward::build_grid(state.obstacles, config_.hyper);
  }

  std::vector<double> score(actions_.size());
  std::vector<std::size_t> pending;  // candidates needing a value estimate
  StateBatch batch;
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    const Vec2& a = actions_.actions[i];
    const sim::SimState next = propagate(state, a, dt);
    sim::StepEvents ev = sim::check_events(next);
    ev.timeout = false;
    const sim::OutcomeKind kind = ev.terminal();
    score[i] = reward::step_reward(config_.reward_mode, config_.hyper, state, a, next, kind, field);
    if (kind == sim::OutcomeKind::None) {
      batch.add(sim::observe(next));
      pending.push_back(i);
    }
  }

  const bool carry = net_->config().aem.persistent_hidden && hidden_.rows() > 0;
  Tensor h_init;
  if (carry && !pending.empty()) {
    h_init.resize(batch.rows.rows(), hidden_.cols());
    for (Eigen::Index s = 0; s < batch.size(); ++s) {
      h_init.middleRows(batch.segments.begin(s), batch.segments.size(s)) = hidden_;
    }
  }

  nn::Graph g(false);
  ValueNetwork::Forward fwd;
  if (!pending.empty()) {
    fwd = net_->forward(g, batch, carry ? &h_init : nullptr, config_.fixed_n);
    const Tensor& v = g.value(fwd.values);
    for (std::size_t j = 0; j < pending.size(); ++j) {
      score[pending[j]] += discount * v(static_cast<Eigen::Index>(j), 0);
    }
  }

  if (best != nullptr) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < score.size(); ++i) {
      if (score[i] > score[arg]) arg = i;
    }
    best->action = actions_.actions[arg];
    best->action_index = static_cast<int>(arg);
    for (std::size_t j = 0; j < pending.size(); ++j) {
      if (pending[j] != arg) continue;
      const auto s = static_cast<Eigen::Index>(j);
      best->n_used = fwd.aem.n_used[j];
      if (net_->config().aem.persistent_hidden) {
        hidden_ = fwd.aem.final_hidden.middleRows(batch.segments.begin(s), batch.segments.size(s));
      }
      if (config_.record_attention) {
        for (const nn::Var head : fwd.attention) {
          const Tensor& w = g.attention_weights(head)[j];
          best->attention.emplace_back(w.data(), w.data() + w.cols());
        }
      }
    }
  }
  return score;
}

Decision ValuePolicy::act(const sim::SimState& state) {
  if (actions_.size() == 0) actions_ = ActionSpace::build(state.robot.v_pref);
  if (config_.epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng_) < config_.epsilon) {
      std::uniform_int_distribution<std::size_t> pick(0, actions_.size() - 1);
      Decision d;
      d.action_index = static_cast<int>(pick(rng_));
      d.action = actions_.actions[static_cast<std::size_t>(d.action_index)];
      d.explored = true;
      return d;
    }
  }
  Decision d;
  scores(state, &d);
  return d;
}

Decision OrcaPolicy::act(const sim::SimState& state) {
  const auto neighbors = sim::obstacle_views(state);
  Decision d;
  d.action = orca::demo_action(sim::robot_view(state), neighbors, params_, state.config.dt);
  return d;
}

}  // namespace aemcarl::policy
