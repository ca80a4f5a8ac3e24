#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "aemcarl/graph.hpp"
#include "aemcarl/orca.hpp"
#include "aemcarl/policy.hpp"
#include "aemcarl/reward.hpp"
#include "aemcarl/sim.hpp"
#include "aemcarl/value_network.hpp"

namespace aemcarl::train {

struct TrainConfig {
  sim::SimConfig sim;
  ModelConfig model;
  reward::RewardHyper hyper;
  reward::RewardMode reward_mode = reward::RewardMode::Adaptive;

  double gamma = 0.9;
  int batch = 100;
  double lr = 1e-3;
  int il_episodes = 2000;
  int il_epochs = 50;
  int rl_episodes = 2000;
  double epsilon_start = 0.5;
  double epsilon_end = 0.1;
  int target_sync = 50;            // episodes between target-network copies
  std::size_t capacity = 100000;
  int batches_per_episode = 1;
  orca::OrcaParams demo_orca;      // demonstrator used for imitation
  std::uint64_t seed = 0;

  double divergence_loss = 1e3;
  int divergence_patience = 100;

  void validate() const;
};

// Decorrelated per-episode seed from a base seed, a stream id and an index.
std::uint64_t episode_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

enum SeedStream : std::uint64_t { kImitationStream = 1, kRlStream = 2, kEvalStream = 3 };

// Linear from epsilon_start to epsilon_end over the first half of training,
// then constant.
double epsilon_at(const TrainConfig& config, int episode);

struct ReplayItem {
  Tensor state;
  Tensor h_init;  // empty unless the network carries hidden state
  double target = 0.0;
};

// Bounded ring buffer; the oldest items are overwritten once full.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(ReplayItem item);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const ReplayItem& operator[](std::size_t i) const { return items_[i]; }
  void clear();

  // Uniform sample without replacement (all items if n >= size()).
  std::vector<std::size_t> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<ReplayItem> items_;
};

// Terminal-backup targets gamma^((T - t) * dt * v_pref) * terminal_reward,
// where T indexes the last stored state of the episode.
std::vector<double> terminal_backup_targets(std::size_t n_states, double terminal_reward,
                                            double gamma, double dt, double v_pref);

// One MSE regression step on the given items. Returns the loss before the update.
double fit_batch(ValueNetwork& net, nn::Adam& adam, const ReplayMemory& memory,
                 const std::vector<std::size_t>& indices);

struct CurveRow {
  int episode = 0;
  double epsilon = 0.0;
  double loss = 0.0;
  double rolling_success = 0.0;
};

void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& rows);

struct ImitationStats {
  int episodes = 0;
  int successes = 0;
  int collisions = 0;
  int timeouts = 0;
  std::size_t samples = 0;
  double final_loss = 0.0;
};

using Progress = std::function<void(const std::string&)>;

// Runs ORCA-driven robot episodes, stores terminal-backup targets for every
// visited state of arrival/collision episodes, then regresses the network for
// il_epochs passes. Throws "imitation set has no successes" when no episode
// reaches the goal.
ImitationStats imitation_bootstrap(const TrainConfig& config, ValueNetwork& net,
                                   ReplayMemory& memory, nn::Adam& adam,
                                   const Progress& progress = {});

struct TrainResult {
  ValueNetwork net;
  ImitationStats imitation;
  std::vector<CurveRow> curve;
};

// Imitation bootstrap followed by rl_episodes of epsilon-greedy value
// iteration with a lagged target network.
TrainResult train(const TrainConfig& config, const Progress& progress = {});

}  // namespace aemcarl::train
