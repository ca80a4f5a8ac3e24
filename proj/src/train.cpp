#include "aemcarl/train.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace aemcarl::train {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stacks per-item initial hidden states, zero-filling items without one.
Tensor stack_hidden(const ReplayMemory& memory, const std::vector<std::size_t>& indices,
                    const StateBatch& batch, Eigen::Index hidden) {
  Tensor h = Tensor::Zero(batch.rows.rows(), hidden);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const ReplayItem& item = memory[indices[j]];
    if (item.h_init.size() == 0) continue;
    h.middleRows(batch.segments.begin(static_cast<Eigen::Index>(j)), item.h_init.rows()) =
        item.h_init;
  }
  return h;
}

}  // namespace

void TrainConfig::validate() const {
  sim.validate();
  model.validate();
  hyper.validate();
  demo_orca.validate();
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("train: gamma must lie in [0, 1]");
  if (batch < 1) throw std::invalid_argument("train: batch must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (il_episodes < 0 || il_epochs < 0 || rl_episodes < 0) {
    throw std::invalid_argument("train: episode and epoch counts must be >= 0");
  }
  if (target_sync < 1) throw std::invalid_argument("train: target_sync must be >= 1");
  if (capacity < 1) throw std::invalid_argument("train: capacity must be >= 1");
  if (batches_per_episode < 0) throw std::invalid_argument("train: batches_per_episode must be >= 0");
}

std::uint64_t episode_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index);
}

double epsilon_at(const TrainConfig& config, int episode) {
  const double decay = std::max(1.0, config.rl_episodes / 2.0);
  if (episode >= decay) return config.epsilon_end;
  return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * (episode / decay);
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay memory: capacity must be > 0");
}

void ReplayMemory::push(ReplayItem item) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(item));
  } else {
    items_[next_] = std::move(item);
  }
  next_ = (next_ + 1) % capacity_;
}

void ReplayMemory::clear() {
  items_.clear();
  next_ = 0;
}

std::vector<std::size_t> ReplayMemory::sample(std::size_t n, std::mt19937_64& rng) const {
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n >= idx.size()) return idx;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

std::vector<double> terminal_backup_targets(std::size_t n_states, double terminal_reward,
                                            double gamma, double dt, double v_pref) {
  std::vector<double> targets(n_states);
  for (std::size_t t = 0; t < n_states; ++t) {
    const auto steps_left = static_cast<double>(n_states - 1 - t);
    targets[t] = std::pow(gamma, steps_left * dt * v_pref) * terminal_reward;
  }
  return targets;
}

double fit_batch(ValueNetwork& net, nn::Adam& adam, const ReplayMemory& memory,
                 const std::vector<std::size_t>& indices) {
  if (indices.empty()) return 0.0;
  StateBatch batch;
  Tensor target(static_cast<Eigen::Index>(indices.size()), 1);
  bool any_hidden = false;
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const ReplayItem& item = memory[indices[j]];
    batch.add(item.state);
    target(static_cast<Eigen::Index>(j), 0) = item.target;
    any_hidden = any_hidden || item.h_init.size() > 0;
  }
  Tensor h_init;
  if (any_hidden) h_init = stack_hidden(memory, indices, batch, net.config().aem.hidden);

  nn::Graph g(true);
  const auto fwd = net.forward(g, batch, any_hidden ? &h_init : nullptr);
  const nn::Var loss = g.mse(fwd.values, target);
  g.backward(loss);
  auto params = net.parameters();
  adam.step(params);
  return g.scalar(loss);
}

void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "episode,epsilon,loss,rolling_success\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.episode << ',' << r.epsilon << ',' << r.loss << ',' << r.rolling_success << '\n';
  }
}

ImitationStats imitation_bootstrap(const TrainConfig& config, ValueNetwork& net,
                                   ReplayMemory& memory, nn::Adam& adam,
                                   const Progress& progress) {
  ImitationStats stats;
  policy::OrcaPolicy demo(config.demo_orca);
  const double dt = config.sim.dt;

  for (int k = 0; k < config.il_episodes; ++k) {
    sim::SimState state =
        sim::reset(config.sim, episode_seed(config.seed, kImitationStream, static_cast<std::uint64_t>(k)));
    std::vector<Tensor> states;
    sim::OutcomeKind kind = sim::OutcomeKind::None;
    while (kind == sim::OutcomeKind::None) {
      states.push_back(sim::observe(state));
      kind = sim::step(state, demo.act(state).action).terminal();
    }
    ++stats.episodes;
    double terminal_reward = 0.0;
    if (kind == sim::OutcomeKind::Arrival) {
      ++stats.successes;
      terminal_reward = reward::kArrivalReward;
    } else if (kind == sim::OutcomeKind::Collision) {
      ++stats.collisions;
      terminal_reward = reward::kCollisionReward;
    } else {
      ++stats.timeouts;
      continue;
    }
    const auto targets =
        terminal_backup_targets(states.size(), terminal_reward, config.gamma, dt, state.robot.v_pref);
    for (std::size_t t = 0; t < states.size(); ++t) {
      memory.push({std::move(states[t]), Tensor(), targets[t]});
    }
    stats.samples += states.size();
  }
  if (config.il_episodes > 0 && stats.successes == 0) {
    throw std::runtime_error("imitation set has no successes");
  }
  if (progress) {
    std::ostringstream os;
    os << "imitation: " << stats.episodes << " episodes, " << stats.successes << " arrivals, "
       << stats.collisions << " collisions, " << stats.timeouts << " timeouts, " << memory.size()
       << " samples";
    progress(os.str());
  }

  std::mt19937_64 rng(episode_seed(config.seed, kImitationStream, 0xfeedULL));
  std::vector<std::size_t> order(memory.size());
  const auto batch = static_cast<std::size_t>(config.batch);
  for (int epoch = 0; epoch < config.il_epochs && !order.empty(); ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(b + batch, order.size())));
      total += fit_batch(net, adam, memory, idx);
      ++batches;
    }
    stats.final_loss = total / static_cast<double>(batches);
    if (progress) {
      std::ostringstream os;
      os << "imitation epoch " << epoch + 1 << "/" << config.il_epochs << " loss " << stats.final_loss;
      progress(os.str());
    }
  }
  return stats;
}

TrainResult train(const TrainConfig& config, const Progress& progress) {
  config.validate();
  TrainResult result{ValueNetwork(config.model), {}, {}};
  ValueNetwork& net = result.net;
  ReplayMemory memory(config.capacity);
  nn::Adam adam(nn::AdamConfig{config.lr});

  result.imitation = imitation_bootstrap(config, net, memory, adam, progress);
  ValueNetwork target = net;

  policy::ValuePolicyConfig pcfg;
  pcfg.gamma = config.gamma;
  pcfg.seed = episode_seed(config.seed, kRlStream, 0xaced0ULL);
  pcfg.reward_mode = config.reward_mode;
  pcfg.hyper = config.hyper;
  policy::ValuePolicy actor(net, pcfg);

  std::mt19937_64 sample_rng(episode_seed(config.seed, kRlStream, 0x5a3b1eULL));
  std::deque<int> recent;
  int successes_in_window = 0;
  int diverged_updates = 0;
  const double dt = config.sim.dt;

  for (int episode = 0; episode < config.rl_episodes; ++episode) {
    const double eps = epsilon_at(config, episode);
    actor.set_epsilon(eps);
    sim::SimState state =
        sim::reset(config.sim, episode_seed(config.seed, kRlStream, static_cast<std::uint64_t>(episode)));
    actor.reset(state);

    std::vector<Tensor> observations;
    std::vector<Tensor> hiddens;
    std::vector<double> rewards;
    sim::OutcomeKind kind = sim::OutcomeKind::None;
    while (kind == sim::OutcomeKind::None) {
      observations.push_back(sim::observe(state));
      hiddens.push_back(actor.carried_hidden());
      const policy::Decision d = actor.act(state);
      const sim::SimState before = state;
      kind = sim::step(state, d.action).terminal();
      reward::RewardField field;
      if (config.reward_mode == reward::RewardMode::Adaptive) {
        field = reward::build_grid(before.obstacles, config.hyper);
      }
      rewards.push_back(reward::step_reward(config.reward_mode, config.hyper, before, d.action,
                                            state, kind, field));
    }
    const bool terminal = kind == sim::OutcomeKind::Arrival || kind == sim::OutcomeKind::Collision;

    // Bootstrapped targets r_t + gamma^(dt v_pref) V_target(s_{t+1}).
    StateBatch next_batch;
    for (std::size_t t = 1; t < observations.size(); ++t) next_batch.add(observations[t]);
    if (!terminal) next_batch.add(sim::observe(state));
    std::vector<double> next_values;
    if (next_batch.size() > 0) next_values = target.values(next_batch);
    const double discount = policy::step_discount(config.gamma, dt, state.robot.v_pref);
    for (std::size_t t = 0; t < observations.size(); ++t) {
      const bool last = t + 1 == observations.size();
      double y = rewards[t];
      if (!(last && terminal)) y += discount * next_values[t];
      memory.push({std::move(observations[t]), std::move(hiddens[t]), y});
    }

    double loss = 0.0;
    for (int b = 0; b < config.batches_per_episode; ++b) {
      loss = fit_batch(net, adam, memory, memory.sample(static_cast<std::size_t>(config.batch), sample_rng));
      if (loss > config.divergence_loss) {
        if (++diverged_updates >= config.divergence_patience) {
          throw std::runtime_error("training diverged: loss above threshold for " +
                                   std::to_string(config.divergence_patience) + " updates");
        }
      } else {
        diverged_updates = 0;
      }
    }

    if ((episode + 1) % config.target_sync == 0) target.copy_weights_from(net);

    const int success = kind == sim::OutcomeKind::Arrival ? 1 : 0;
    recent.push_back(success);
    successes_in_window += success;
    if (recent.size() > 100) {
      successes_in_window -= recent.front();
      recent.pop_front();
    }
    const double rolling = static_cast<double>(successes_in_window) / static_cast<double>(recent.size());
    result.curve.push_back({episode, eps, loss, rolling});
    if (progress && ((episode + 1) % 50 == 0 || episode + 1 == config.rl_episodes)) {
      std::ostringstream os;
      os << "rl episode " << episode + 1 << "/" << config.rl_episodes << " eps " << eps << " loss "
         << loss << " rolling_success " << rolling;
      progress(os.str());
    }
  }
  return result;
}

}  // namespace aemcarl::train
