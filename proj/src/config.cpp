#include "aemcarl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace aemcarl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: " + key + " expects an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

std::string join(const std::vector<Eigen::Index>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

std::vector<Eigen::Index> to_sizes(const std::string& key, const std::string& v) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<Eigen::Index>(to_int(key, trim(item))));
  if (out.empty()) throw std::invalid_argument("config: " + key + " expects a comma-separated list");
  return out;
}

using Setter = std::function<void(train::TrainConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const train::TrainConfig&)>;

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

struct Entry {
  Setter set;
  Getter get;
};

#define DOUBLE_KEY(field) \
  Entry{[](train::TrainConfig& c, const std::string& k, const std::string& v) { c.field = to_double(k, v); }, \
        [](const train::TrainConfig& c) { return fmt(c.field); }}
#define INT_KEY(field) \
  Entry{[](train::TrainConfig& c, const std::string& k, const std::string& v) { \
          c.field = static_cast<decltype(c.field)>(to_int(k, v)); }, \
        [](const train::TrainConfig& c) { return std::to_string(c.field); }}
#define BOOL_KEY(field) \
  Entry{[](train::TrainConfig& c, const std::string& k, const std::string& v) { c.field = to_bool(k, v); }, \
        [](const train::TrainConfig& c) { return std::string(c.field ? "true" : "false"); }}

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> table = {
      {"sim.n_obstacles", INT_KEY(sim.n_obstacles)},
      {"sim.circle_radius", DOUBLE_KEY(sim.circle_radius)},
      {"sim.dt", DOUBLE_KEY(sim.dt)},
      {"sim.time_limit", DOUBLE_KEY(sim.time_limit)},
      {"sim.visibility",
       Entry{[](train::TrainConfig& c, const std::string&, const std::string& v) {
               c.sim.visibility = parse_visibility(v);
             },
             [](const train::TrainConfig& c) { return std::string(to_string(c.sim.visibility)); }}},
      {"sim.arrival_threshold", DOUBLE_KEY(sim.arrival_threshold)},
      {"sim.danger_threshold", DOUBLE_KEY(sim.danger_threshold)},
      {"sim.robot_radius", DOUBLE_KEY(sim.robot_radius)},
      {"sim.robot_v_pref", DOUBLE_KEY(sim.robot_v_pref)},
      {"sim.obstacle_radius", DOUBLE_KEY(sim.obstacle_radius)},
      {"sim.obstacle_v_pref", DOUBLE_KEY(sim.obstacle_v_pref)},
      {"sim.goal_jitter", DOUBLE_KEY(sim.goal_jitter)},
      {"sim.robot_centric", BOOL_KEY(sim.robot_centric)},
      {"sim.orca.time_horizon", DOUBLE_KEY(sim.obstacle_orca.time_horizon)},
      {"sim.orca.neighbor_dist", DOUBLE_KEY(sim.obstacle_orca.neighbor_dist)},
      {"sim.orca.max_neighbors", INT_KEY(sim.obstacle_orca.max_neighbors)},
      {"sim.orca.safety_margin", DOUBLE_KEY(sim.obstacle_orca.safety_margin)},

      {"reward.mode",
       Entry{[](train::TrainConfig& c, const std::string&, const std::string& v) {
               c.reward_mode = parse_reward_mode(v);
             },
             [](const train::TrainConfig& c) { return std::string(to_string(c.reward_mode)); }}},
      {"reward.dt_agent", DOUBLE_KEY(hyper.dt_agent)},
      {"reward.dt_obstacle", DOUBLE_KEY(hyper.dt_obstacle)},
      {"reward.delta_xy", DOUBLE_KEY(hyper.delta_xy)},
      {"reward.delta_theta", DOUBLE_KEY(hyper.delta_theta)},
      {"reward.beta", DOUBLE_KEY(hyper.beta)},
      {"reward.grid_resolution", DOUBLE_KEY(hyper.grid_resolution)},

      {"model.hidden", INT_KEY(model.aem.hidden)},
      {"model.gru_mlp_hidden", INT_KEY(model.aem.mlp_hidden)},
      {"model.max_iters", INT_KEY(model.aem.max_iters)},
      {"model.halt_eps", DOUBLE_KEY(model.aem.eps)},
      {"model.shared_weights", BOOL_KEY(model.aem.shared_weights)},
      {"model.fixed_n", INT_KEY(model.aem.fixed_n)},
      {"model.persistent_hidden", BOOL_KEY(model.aem.persistent_hidden)},
      {"model.tf_dim", INT_KEY(model.tf.model_dim)},
      {"model.tf_heads", INT_KEY(model.tf.heads)},
      {"model.tf_ff", INT_KEY(model.tf.ff_dim)},
      {"model.tf_residual", BOOL_KEY(model.tf.residual)},
      {"model.head_hidden",
       Entry{[](train::TrainConfig& c, const std::string& k, const std::string& v) {
               c.model.head_hidden = to_sizes(k, v);
             },
             [](const train::TrainConfig& c) { return join(c.model.head_hidden); }}},
      {"model.seed",
       Entry{[](train::TrainConfig& c, const std::string& k, const std::string& v) { c.model.seed = to_u64(k, v); },
             [](const train::TrainConfig& c) { return std::to_string(c.model.seed); }}},

      {"train.gamma", DOUBLE_KEY(gamma)},
      {"train.batch", INT_KEY(batch)},
      {"train.lr", DOUBLE_KEY(lr)},
      {"train.il_episodes", INT_KEY(il_episodes)},
      {"train.il_epochs", INT_KEY(il_epochs)},
      {"train.rl_episodes", INT_KEY(rl_episodes)},
      {"train.epsilon_start", DOUBLE_KEY(epsilon_start)},
      {"train.epsilon_end", DOUBLE_KEY(epsilon_end)},
      {"train.target_sync", INT_KEY(target_sync)},
      {"train.capacity", INT_KEY(capacity)},
      {"train.batches_per_episode", INT_KEY(batches_per_episode)},
      {"train.il_safety_margin", DOUBLE_KEY(demo_orca.safety_margin)},
      {"train.il_time_horizon", DOUBLE_KEY(demo_orca.time_horizon)},
      {"train.divergence_loss", DOUBLE_KEY(divergence_loss)},
      {"train.divergence_patience", INT_KEY(divergence_patience)},
      {"train.seed",
       Entry{[](train::TrainConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
             [](const train::TrainConfig& c) { return std::to_string(c.seed); }}},
  };
  return table;
}

#undef DOUBLE_KEY
#undef INT_KEY
#undef BOOL_KEY

}  // namespace

sim::Visibility parse_visibility(const std::string& text) {
  if (text == "visible") return sim::Visibility::Visible;
  if (text == "invisible") return sim::Visibility::Invisible;
  throw std::invalid_argument("unknown visibility '" + text + "' (expected visible or invisible)");
}

const char* to_string(sim::Visibility v) { return v == sim::Visibility::Visible ? "visible" : "invisible"; }

reward::RewardMode parse_reward_mode(const std::string& text) {
  if (text == "adaptive") return reward::RewardMode::Adaptive;
  if (text == "vanilla") return reward::RewardMode::Vanilla;
  throw std::invalid_argument("unknown reward mode '" + text + "' (expected adaptive or vanilla)");
}

const char* to_string(reward::RewardMode m) { return m == reward::RewardMode::Adaptive ? "adaptive" : "vanilla"; }

void apply_setting(train::TrainConfig& config, const std::string& key, const std::string& value) {
  const auto it = registry().find(key);
  if (it == registry().end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second.set(config, key, value);
}

train::TrainConfig parse_train_config(std::istream& in, train::TrainConfig base) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

train::TrainConfig load_train_config(const std::string& path, train::TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_train_config(in, std::move(base));
}

void write_train_config(std::ostream& out, const train::TrainConfig& config) {
  for (const auto& [key, entry] : registry()) out << key << " = " << entry.get(config) << '\n';
}

std::uint64_t config_fingerprint(const train::TrainConfig& config) {
  std::ostringstream os;
  write_train_config(os, config);
  // FNV-1a.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : os.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace aemcarl
