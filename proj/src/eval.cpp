#include "aemcarl/eval.hpp"

#include <iomanip>
#include <ostream>
#include <set>
#include <stdexcept>

#include "aemcarl/train.hpp"

namespace aemcarl::eval {

EpisodeRecord run_episode(policy::Policy& policy, const sim::SimConfig& config, std::uint64_t seed) {
  EpisodeRecord record;
  sim::SimState state = sim::reset(config, seed);
  policy.reset(state);
  record.frames.push_back(state);
  sim::OutcomeKind kind = sim::OutcomeKind::None;
  while (kind == sim::OutcomeKind::None) {
    const policy::Decision d = policy.act(state);
    kind = sim::step(state, d.action).terminal();
    record.actions.push_back(d.action);
    record.n_used.push_back(d.n_used);
    if (!d.attention.empty()) record.attention.push_back(d.attention);
    record.min_separations.push_back(sim::min_separation(state));
    record.frames.push_back(state);
  }
  record.outcome = kind;
  record.nav_time = state.time;
  return record;
}

void Accumulator::add(const EpisodeRecord& record) {
  ++episodes;
  switch (record.outcome) {
    case sim::OutcomeKind::Arrival:
      ++successes;
      nav_time_sum += record.nav_time;
      break;
    case sim::OutcomeKind::Collision: ++collisions; break;
    case sim::OutcomeKind::Timeout: ++timeouts; break;
    case sim::OutcomeKind::None: throw std::logic_error("eval: episode record has no outcome");
  }
  // The final step ended the episode; every earlier step is non-terminal.
  const std::size_t non_terminal = record.min_separations.empty() ? 0 : record.min_separations.size() - 1;
  for (std::size_t t = 0; t < non_terminal; ++t) {
    ++steps;
    if (record.min_separations[t] < danger_threshold) ++danger_steps;
  }
  for (const int n : record.n_used) {
    if (n < 1) continue;
    if (static_cast<std::size_t>(n) > usage.size()) usage.resize(static_cast<std::size_t>(n), 0);
    ++usage[static_cast<std::size_t>(n - 1)];
  }
}

MetricsReport Accumulator::report() const {
  MetricsReport r;
  r.episodes = episodes;
  if (episodes > 0) {
    r.success_rate = static_cast<double>(successes) / episodes;
    r.collision_rate = static_cast<double>(collisions) / episodes;
    r.timeout_rate = static_cast<double>(timeouts) / episodes;
  }
  r.mean_nav_time = successes > 0 ? nav_time_sum / successes : 0.0;
  r.steps = steps;
  r.danger_steps = danger_steps;
  r.danger_frequency = steps > 0 ? static_cast<double>(danger_steps) / static_cast<double>(steps) : 0.0;
  r.gru_usage = usage;
  return r;
}

std::vector<double> MetricsReport::gru_usage_rates() const {
  long total = 0;
  for (long c : gru_usage) total += c;
  std::vector<double> out(gru_usage.size(), 0.0);
  if (total == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(gru_usage[i]) / static_cast<double>(total);
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  return {{"schema_version", kMetricsSchemaVersion},
          {"episodes", episodes},
          {"success_rate", success_rate},
          {"collision_rate", collision_rate},
          {"timeout_rate", timeout_rate},
          {"mean_nav_time", mean_nav_time},
          {"danger_frequency", danger_frequency},
          {"steps", steps},
          {"danger_steps", danger_steps},
          {"gru_usage", gru_usage},
          {"gru_usage_rates", gru_usage_rates()}};
}

MetricsReport run_eval(policy::Policy& policy, const sim::SimConfig& config, int n_episodes,
                       std::uint64_t seed, const EpisodeCallback& on_episode) {
  if (n_episodes < 1) throw std::invalid_argument("run_eval: n_episodes must be >= 1");
  Accumulator acc(config.danger_threshold);
  for (int k = 0; k < n_episodes; ++k) {
    const EpisodeRecord record =
        run_episode(policy, config, train::episode_seed(seed, train::kEvalStream, static_cast<std::uint64_t>(k)));
    acc.add(record);
    if (on_episode) on_episode(k, record);
  }
  return acc.report();
}

void write_metrics_table(std::ostream& out, const MetricsReport& r, const std::string& title) {
  if (!title.empty()) out << title << '\n';
  const auto row = [&](const char* name, double v) {
    out << "  " << std::left << std::setw(18) << name << std::right << std::fixed << std::setprecision(3) << v << '\n';
  };
  out << "  " << std::left << std::setw(18) << "episodes" << r.episodes << '\n';
  row("success_rate", r.success_rate);
  row("collision_rate", r.collision_rate);
  row("timeout_rate", r.timeout_rate);
  row("mean_nav_time", r.mean_nav_time);
  row("danger_frequency", r.danger_frequency);
  const auto rates = r.gru_usage_rates();
  for (std::size_t i = 0; i < rates.size(); ++i) {
    row(("gru_usage_n" + std::to_string(i + 1)).c_str(), rates[i]);
  }
  out.unsetf(std::ios::fixed);
}

nlohmann::json halting_histogram_json(const MetricsReport& report) {
  nlohmann::json n = nlohmann::json::array();
  for (std::size_t i = 0; i < report.gru_usage.size(); ++i) n.push_back(i + 1);
  return {{"schema_version", kMetricsSchemaVersion},
          {"n", n},
          {"counts", report.gru_usage},
          {"rates", report.gru_usage_rates()}};
}

std::vector<SweepRow> sweep(const std::vector<SweepPoint>& grid, const PolicyFactory& make_policy,
                            int n_episodes, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("sweep: grid is empty");
  std::vector<SweepRow> rows;
  for (const auto& point : grid) {
    auto policy = make_policy(point);
    rows.push_back({point, run_eval(*policy, point.sim, n_episodes, seed)});
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  std::set<std::string> keys;
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.point.params) keys.insert(k);
  }
  for (const auto& k : keys) out << k << ',';
  out << "success_rate,collision_rate,timeout_rate,mean_nav_time,danger_frequency\n";
  out.precision(10);
  for (const auto& r : rows) {
    for (const auto& k : keys) {
      const auto it = r.point.params.find(k);
      out << (it == r.point.params.end() ? "" : it->second) << ',';
    }
    const auto& m = r.metrics;
    out << m.success_rate << ',' << m.collision_rate << ',' << m.timeout_rate << ',' << m.mean_nav_time << ','
        << m.danger_frequency << '\n';
  }
}

}  // namespace aemcarl::eval
