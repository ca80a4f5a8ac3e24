#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "aemcarl/policy.hpp"
#include "aemcarl/sim.hpp"

namespace aemcarl::eval {

inline constexpr int kMetricsSchemaVersion = 1;

struct EpisodeRecord {
  std::vector<sim::SimState> frames;  // initial state plus one per step
  std::vector<Vec2> actions;
  std::vector<int> n_used;            // per decision, 0 when the policy has no AEM
  std::vector<double> min_separations;
  // Per decision, per head: row-0 attention weights. Empty unless the policy records them.
  std::vector<std::vector<std::vector<double>>> attention;
  sim::OutcomeKind outcome = sim::OutcomeKind::None;
  double nav_time = 0.0;

  int steps() const { return static_cast<int>(actions.size()); }
};

// Rolls one episode out until a terminal event.
EpisodeRecord run_episode(policy::Policy& policy, const sim::SimConfig& config, std::uint64_t seed);

struct MetricsReport {
  int episodes = 0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_nav_time = 0.0;     // s, over successful episodes; 0 if none
  double danger_frequency = 0.0;  // non-terminal steps closer than the danger threshold
  long steps = 0;
  long danger_steps = 0;
  std::vector<long> gru_usage;    // gru_usage[n - 1] = decisions that used n iterations

  nlohmann::json to_json() const;
  std::vector<double> gru_usage_rates() const;
};

struct Accumulator {
  explicit Accumulator(double danger_threshold, int max_iters = 3)
      : danger_threshold(danger_threshold), usage(static_cast<std::size_t>(max_iters), 0) {}

  void add(const EpisodeRecord& record);
  MetricsReport report() const;

  double danger_threshold;
  int episodes = 0, successes = 0, collisions = 0, timeouts = 0;
  double nav_time_sum = 0.0;
  long steps = 0, danger_steps = 0;
  std::vector<long> usage;
};

using EpisodeCallback = std::function<void(int index, const EpisodeRecord&)>;

// Seeded episodes k = 0..n-1 with seeds episode_seed(seed, eval stream, k).
MetricsReport run_eval(policy::Policy& policy, const sim::SimConfig& config, int n_episodes,
                       std::uint64_t seed, const EpisodeCallback& on_episode = {});

// Human-readable two-column table.
void write_metrics_table(std::ostream& out, const MetricsReport& report, const std::string& title = "");

// {"schema_version", "counts": [..], "rates": [..]} for n = 1..max_iters.
nlohmann::json halting_histogram_json(const MetricsReport& report);

struct SweepPoint {
  std::map<std::string, std::string> params;  // printed as leading CSV columns
  sim::SimConfig sim;
};

struct SweepRow {
  SweepPoint point;
  MetricsReport metrics;
};

using PolicyFactory = std::function<std::unique_ptr<policy::Policy>(const SweepPoint&)>;

// Evaluates (and, through the factory, optionally trains) one policy per grid point.
std::vector<SweepRow> sweep(const std::vector<SweepPoint>& grid, const PolicyFactory& make_policy,
                            int n_episodes, std::uint64_t seed);

// Columns: parameter names (sorted), then success_rate, collision_rate,
// timeout_rate, mean_nav_time, danger_frequency.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace aemcarl::eval
