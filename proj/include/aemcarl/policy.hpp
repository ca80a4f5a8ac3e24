#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "aemcarl/orca.hpp"
#include "aemcarl/reward.hpp"
#include "aemcarl/sim.hpp"
#include "aemcarl/value_network.hpp"

namespace aemcarl::policy {

// Holonomic velocity commands: speeds v_pref * (e^{k/S} - 1) / (e - 1),
// k = 1..S, crossed with R headings 2*pi*j/R. Index = (k - 1) * R + j.
struct ActionSpace {
  std::vector<Vec2> actions;
  std::vector<double> speeds;
  std::vector<double> headings;

  static ActionSpace build(double v_pref, int n_speeds = 5, int n_headings = 16);
  std::size_t size() const { return actions.size(); }
};

// Constant-velocity lookahead: the robot moves under `action`, every obstacle
// under its current velocity. Time advances by dt.
sim::SimState propagate(const sim::SimState& state, const Vec2& action, double dt);

// gamma^(dt * v_pref), the per-step discount.
double step_discount(double gamma, double dt, double v_pref);

struct Decision {
  Vec2 action;
  int action_index = -1;  // -1 for policies without a discrete action space
  int n_used = 0;         // AEM iterations behind the chosen lookahead, 0 if none
  bool explored = false;
  std::vector<std::vector<double>> attention;  // per head, row 0 weights of the chosen candidate
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const sim::SimState& /*initial*/) {}
  virtual Decision act(const sim::SimState& state) = 0;
  virtual std::string name() const = 0;
};

struct ValuePolicyConfig {
  double gamma = 0.9;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  reward::RewardMode reward_mode = reward::RewardMode::Adaptive;
  reward::RewardHyper hyper;
  int fixed_n = -1;  // < 0 uses the network's own AEM setting
  bool record_attention = false;
};

// One-step lookahead on a learned value:
//   argmax_a R(s, a) + gamma^(dt * v_pref) * V(observe(propagate(s, a)))
// Terminal lookahead states score R alone. Ties go to the lowest index.
class ValuePolicy : public Policy {
 public:
  ValuePolicy(ValueNetwork& net, ValuePolicyConfig config);

  void reset(const sim::SimState& initial) override;
  Decision act(const sim::SimState& state) override;
  std::string name() const override { return "value"; }

  void set_epsilon(double eps) { config_.epsilon = eps; }
  const ActionSpace& actions() const { return actions_; }
  void set_action_space(ActionSpace space) { actions_ = std::move(space); }
  // Hidden state carried between decisions when the network persists it.
  const Tensor& carried_hidden() const { return hidden_; }

  // Scores of every action for the current state, exposed for inspection.
  std::vector<double> scores(const sim::SimState& state, Decision* best = nullptr);

 private:
  ValueNetwork* net_;
  ValuePolicyConfig config_;
  ActionSpace actions_;
  std::mt19937_64 rng_;
  Tensor hidden_;
};

// Robot driven by ORCA, treating the obstacles as reciprocal agents.
class OrcaPolicy : public Policy {
 public:
  explicit OrcaPolicy(orca::OrcaParams params = {}) : params_(params) {}
  Decision act(const sim::SimState& state) override;
  std::string name() const override { return "orca"; }

 private:
  orca::OrcaParams params_;
};

// Wraps a plain function; used for scripted baselines and tests.
class FunctionPolicy : public Policy {
 public:
  FunctionPolicy(std::string name, std::function<Vec2(const sim::SimState&)> fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}
  Decision act(const sim::SimState& state) override {
    Decision d;
    d.action = fn_(state);
    return d;
  }
  std::string name() const override { return name_; }

 private:
  std::string name_;
  std::function<Vec2(const sim::SimState&)> fn_;
};

}  // namespace aemcarl::policy
