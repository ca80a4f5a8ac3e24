// Command-line front end: train, evaluate, render and run the ablations.

#include <malloc.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aemcarl/checkpoint.hpp"
#include "aemcarl/config.hpp"
#include "aemcarl/eval.hpp"
#include "aemcarl/policy.hpp"
#include "aemcarl/render.hpp"
#include "aemcarl/reward.hpp"
#include "aemcarl/train.hpp"

using namespace aemcarl;

namespace {

struct PolicyArgs {
  std::string ckpt;
  std::string policy = "value";  // value | orca
  std::string fixed_n = "adaptive";
};

struct SceneArgs {
  int obstacles = -1;            // < 0 keeps the configured count
  std::string visibility;        // empty keeps the configured mode
  std::uint64_t seed = 0;
  int n = 100;
  std::string preset;  // ablation (100 episodes) | table (500); --n wins when given
};

std::string dump_config(const train::TrainConfig& c) {
  std::ostringstream os;
  write_train_config(os, c);
  return os.str();
}

// Training settings stored in a checkpoint, or defaults when absent.
train::TrainConfig config_of(const nlohmann::json& meta) {
  if (meta.contains("train_config")) {
    std::istringstream in(meta["train_config"].get<std::string>());
    return parse_train_config(in);
  }
  return {};
}

int parse_fixed_n(const std::string& text) {
  if (text == "adaptive") return 0;
  if (text == "1" || text == "2" || text == "3") return std::stoi(text);
  throw std::invalid_argument("--fixed-n expects 1, 2, 3 or adaptive, got '" + text + "'");
}

void apply_preset(SceneArgs& scene, const CLI::App* cmd) {
  if (scene.preset.empty() || cmd->count("--n") > 0) return;
  scene.n = scene.preset == "table" ? 500 : 100;
}

void apply_scene(sim::SimConfig& sim, const SceneArgs& scene) {
  if (scene.obstacles >= 0) sim.n_obstacles = scene.obstacles;
  if (!scene.visibility.empty()) sim.visibility = parse_visibility(scene.visibility);
  sim.validate();
}

// Owns whatever the policy points into.
struct LoadedPolicy {
  std::unique_ptr<ValueNetwork> net;
  std::unique_ptr<policy::Policy> policy;
  train::TrainConfig config;
};

LoadedPolicy make_policy(const PolicyArgs& args, bool record_attention = false) {
  LoadedPolicy out;
  if (args.policy == "orca") {
    if (!args.ckpt.empty()) out.config = config_of(load_checkpoint(args.ckpt).meta);
    out.policy = std::make_unique<policy::OrcaPolicy>(out.config.demo_orca);
    return out;
  }
  if (args.policy != "value") throw std::invalid_argument("--policy expects value or orca");
  if (args.ckpt.empty()) throw std::invalid_argument("--ckpt is required for the value policy");
  auto loaded = load_checkpoint(args.ckpt);
  out.config = config_of(loaded.meta);
  out.net = std::make_unique<ValueNetwork>(std::move(loaded.net));
  policy::ValuePolicyConfig pcfg;
  pcfg.gamma = out.config.gamma;
  pcfg.reward_mode = out.config.reward_mode;
  pcfg.hyper = out.config.hyper;
  pcfg.fixed_n = parse_fixed_n(args.fixed_n);
  pcfg.record_attention = record_attention;
  out.policy = std::make_unique<policy::ValuePolicy>(*out.net, pcfg);
  return out;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

train::TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  train::TrainConfig c = path.empty() ? train::TrainConfig{} : load_train_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();
  return c;
}

train::Progress progress_sink(bool quiet) {
  if (quiet) return {};
  return [](const std::string& line) { std::cerr << line << std::endl; };
}

train::TrainResult train_to(const train::TrainConfig& config, const std::string& out, const std::string& curve,
                            bool quiet) {
  auto result = train::train(config, progress_sink(quiet));
  nlohmann::json meta = {{"train_config", dump_config(config)},
                         {"imitation",
                          {{"episodes", result.imitation.episodes},
                           {"successes", result.imitation.successes},
                           {"samples", result.imitation.samples}}}};
  if (!out.empty()) save_checkpoint(out, result.net, meta);
  if (!curve.empty()) {
    std::ofstream c(curve);
    if (!c) throw std::runtime_error("cannot write '" + curve + "'");
    train::write_curve_csv(c, result.curve);
  }
  return result;
}

void add_scene_options(CLI::App* cmd, SceneArgs& scene) {
  cmd->add_option("--n", scene.n, "Evaluation episodes")->check(CLI::PositiveNumber);
  cmd->add_option("--preset", scene.preset, "ablation (100 episodes) | table (500)")
      ->check(CLI::IsMember({"ablation", "table"}));
  cmd->add_option("--obstacles", scene.obstacles, "Obstacle count (default: from checkpoint)");
  cmd->add_option("--visibility", scene.visibility, "visible | invisible")
      ->check(CLI::IsMember({"visible", "invisible"}));
  cmd->add_option("--seed", scene.seed, "Evaluation seed");
}

void add_policy_options(CLI::App* cmd, PolicyArgs& pol) {
  cmd->add_option("--ckpt", pol.ckpt, "Checkpoint file");
  cmd->add_option("--policy", pol.policy, "value | orca")->check(CLI::IsMember({"value", "orca"}));
  cmd->add_option("--fixed-n", pol.fixed_n, "1 | 2 | 3 | adaptive")
      ->check(CLI::IsMember({"1", "2", "3", "adaptive"}));
}

}  // namespace

int main(int argc, char** argv) {
  // Graph buffers are large and short-lived; keep glibc from mapping and
  // unmapping them on every forward pass.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"AEM crowd-navigation toolkit"};
  app.require_subcommand(1);

  // train
  std::string train_config, train_out, train_curve;
  std::vector<std::string> train_set;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "Imitation bootstrap plus RL training");
  train_cmd->add_option("--config", train_config, "Config file (key = value)");
  train_cmd->add_option("--set", train_set, "Override key=value (repeatable)");
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--curve", train_curve, "Training-curve CSV path");
  train_cmd->add_flag("--quiet", quiet, "No progress output");
  bool world_frame = false, tf_residual = false, persistent_hidden = false, shared_weights = false;
  train_cmd->add_flag("--world-frame", world_frame, "Encode states in world coordinates (sim.robot_centric = false)");
  train_cmd->add_flag("--tf-residual", tf_residual, "Residual + layer-norm encoder variant");
  train_cmd->add_flag("--persistent-hidden", persistent_hidden, "Carry the AEM hidden state across steps");
  train_cmd->add_flag("--shared-weights", shared_weights, "One GRU cell iterated instead of one per layer");

  // eval
  PolicyArgs eval_pol;
  SceneArgs eval_scene;
  std::string eval_json, eval_hist;
  auto* eval_cmd = app.add_subcommand("eval", "Batch evaluation");
  add_policy_options(eval_cmd, eval_pol);
  add_scene_options(eval_cmd, eval_scene);
  eval_cmd->add_option("--json", eval_json, "Metrics JSON path");
  eval_cmd->add_option("--halting-json", eval_hist, "Halting histogram JSON path");

  // demo
  PolicyArgs demo_pol;
  SceneArgs demo_scene;
  std::string demo_svg, demo_traj, demo_field, demo_field_dir, demo_attention;
  bool demo_heatmap = false;
  int demo_keyframes = 4;
  auto* demo_cmd = app.add_subcommand("demo", "Run one episode and export it");
  add_policy_options(demo_cmd, demo_pol);
  add_scene_options(demo_cmd, demo_scene);
  demo_cmd->add_option("--render", demo_svg, "SVG path");
  demo_cmd->add_flag("--heatmap", demo_heatmap, "Underlay the reward field of the initial state");
  demo_cmd->add_option("--keyframes", demo_keyframes, "Disc keyframe interval in steps (0: final only)");
  demo_cmd->add_option("--trajectory", demo_traj, "Trajectory CSV path");
  demo_cmd->add_option("--field", demo_field, "Reward-field CSV of the initial state");
  demo_cmd->add_option("--field-dir", demo_field_dir, "Directory for one reward-field CSV per step");
  demo_cmd->add_option("--attention-json", demo_attention, "Per-decision attention weights (value policy)");

  // ablate-reward
  std::string ar_config, ar_dir = "ablate_reward";
  std::vector<std::string> ar_set;
  SceneArgs ar_scene;
  auto* ar_cmd = app.add_subcommand("ablate-reward", "Train with adaptive and vanilla rewards and compare");
  ar_cmd->add_option("--config", ar_config, "Base config file");
  ar_cmd->add_option("--set", ar_set, "Override key=value (repeatable)");
  ar_cmd->add_option("--out-dir", ar_dir, "Directory for checkpoints, curves and results");
  add_scene_options(ar_cmd, ar_scene);
  ar_cmd->add_flag("--quiet", quiet, "No progress output");

  // ablate-gru
  PolicyArgs ag_pol;
  SceneArgs ag_scene;
  std::string ag_modes = "all", ag_csv, ag_json;
  auto* ag_cmd = app.add_subcommand("ablate-gru", "Adaptive halting versus fixed GRU counts");
  ag_cmd->add_option("--ckpt", ag_pol.ckpt, "Checkpoint file")->required();
  ag_cmd->add_option("--fixed-n", ag_modes, "1 | 2 | 3 | adaptive | all")
      ->check(CLI::IsMember({"1", "2", "3", "adaptive", "all"}));
  add_scene_options(ag_cmd, ag_scene);
  ag_cmd->add_option("--csv", ag_csv, "Comparison table CSV path");
  ag_cmd->add_option("--json", ag_json, "Comparison JSON path");

  // sweep
  PolicyArgs sw_pol;
  SceneArgs sw_scene;
  std::string sw_config, sw_csv;
  std::vector<std::string> sw_grid, sw_set;
  auto* sw_cmd = app.add_subcommand(
      "sweep", "Grid over config keys; evaluates --ckpt/--policy orca, or trains one model per point");
  add_policy_options(sw_cmd, sw_pol);
  add_scene_options(sw_cmd, sw_scene);
  sw_cmd->add_option("--config", sw_config, "Base config file (training sweeps)");
  sw_cmd->add_option("--set", sw_set, "Override key=value (repeatable)");
  sw_cmd->add_option("--grid", sw_grid, "key=v1,v2,... (repeatable; points are the cross product)")->required();
  sw_cmd->add_option("--csv", sw_csv, "Sweep CSV path");
  sw_cmd->add_flag("--quiet", quiet, "No progress output");

  CLI11_PARSE(app, argc, argv);
  apply_preset(eval_scene, eval_cmd);
  apply_preset(demo_scene, demo_cmd);
  apply_preset(ar_scene, ar_cmd);
  apply_preset(ag_scene, ag_cmd);
  apply_preset(sw_scene, sw_cmd);

  try {
    if (*train_cmd) {
      auto overrides = train_set;
      if (world_frame) overrides.push_back("sim.robot_centric=false");
      if (tf_residual) overrides.push_back("model.tf_residual=true");
      if (persistent_hidden) overrides.push_back("model.persistent_hidden=true");
      if (shared_weights) overrides.push_back("model.shared_weights=true");
      const auto config = load_config(train_config, overrides);
      const auto result = train_to(config, train_out, train_curve, quiet);
      std::cout << "saved " << train_out << " (" << result.curve.size() << " rl episodes)\n";
      return 0;
    }

    if (*eval_cmd) {
      auto loaded = make_policy(eval_pol);
      apply_scene(loaded.config.sim, eval_scene);
      const auto report = eval::run_eval(*loaded.policy, loaded.config.sim, eval_scene.n, eval_scene.seed);
      eval::write_metrics_table(std::cout, report, loaded.policy->name() + " policy");
      if (!eval_json.empty()) write_json(eval_json, report.to_json());
      if (!eval_hist.empty()) write_json(eval_hist, eval::halting_histogram_json(report));
      return 0;
    }

    if (*demo_cmd) {
      auto loaded = make_policy(demo_pol, !demo_attention.empty());
      apply_scene(loaded.config.sim, demo_scene);
      const auto record = eval::run_episode(
          *loaded.policy, loaded.config.sim,
          train::episode_seed(demo_scene.seed, train::kEvalStream, 0));
      std::cout << "outcome " << sim::to_string(record.outcome) << " after " << record.nav_time << " s\n";
      const auto field = reward::build_grid(record.frames.front().obstacles, loaded.config.hyper);
      if (!demo_svg.empty()) {
        render::RenderOptions opt;
        opt.keyframe_every = demo_keyframes;
        if (demo_heatmap) opt.heatmap = &field;
        render::render_episode(record, demo_svg, opt);
      }
      if (!demo_traj.empty()) {
        std::vector<sim::TrajectoryRow> rows;
        for (const auto& frame : record.frames) sim::append_trajectory(frame, rows);
        std::ofstream out(demo_traj);
        if (!out) throw std::runtime_error("cannot write '" + demo_traj + "'");
        sim::write_trajectory_csv(out, rows);
      }
      if (!demo_field.empty()) {
        std::ofstream out(demo_field);
        if (!out) throw std::runtime_error("cannot write '" + demo_field + "'");
        field.write_csv(out);
      }
      if (!demo_field_dir.empty()) {
        // Fields of the pre-step states, the ones each step's reward is scored on.
        std::filesystem::create_directories(demo_field_dir);
        for (int t = 0; t < record.steps(); ++t) {
          char name[32];
          std::snprintf(name, sizeof(name), "field_%04d.csv", t);
          const auto path = (std::filesystem::path(demo_field_dir) / name).string();
          std::ofstream out(path);
          if (!out) throw std::runtime_error("cannot write '" + path + "'");
          reward::build_grid(record.frames[static_cast<std::size_t>(t)].obstacles, loaded.config.hyper)
              .write_csv(out);
        }
      }
      if (!demo_attention.empty()) {
        if (record.attention.empty()) throw std::invalid_argument("--attention-json needs the value policy");
        nlohmann::json steps = nlohmann::json::array();
        for (std::size_t t = 0; t < record.attention.size(); ++t) {
          steps.push_back({{"step", t}, {"n_used", record.n_used[t]}, {"heads", record.attention[t]}});
        }
        write_json(demo_attention, {{"schema_version", 1}, {"steps", steps}});
      }
      return 0;
    }

    if (*ar_cmd) {
      std::filesystem::create_directories(ar_dir);
      auto base = load_config(ar_config, ar_set);
      apply_scene(base.sim, ar_scene);
      std::vector<eval::SweepRow> rows;
      for (const auto mode : {reward::RewardMode::Adaptive, reward::RewardMode::Vanilla}) {
        auto config = base;
        config.reward_mode = mode;
        const std::string tag = to_string(mode);
        auto result = train_to(config, ar_dir + "/" + tag + ".ckpt", ar_dir + "/" + tag + "_curve.csv", quiet);
        policy::ValuePolicyConfig pcfg;
        pcfg.gamma = config.gamma;
        pcfg.reward_mode = mode;
        pcfg.hyper = config.hyper;
        policy::ValuePolicy pol(result.net, pcfg);
        eval::SweepPoint point{{{"reward", tag}}, config.sim};
        rows.push_back({point, eval::run_eval(pol, config.sim, ar_scene.n, ar_scene.seed)});
        eval::write_metrics_table(std::cout, rows.back().metrics, tag + " reward");
      }
      std::ofstream out(ar_dir + "/results.csv");
      eval::write_sweep_csv(out, rows);
      return 0;
    }

    if (*ag_cmd) {
      std::vector<std::string> modes;
      if (ag_modes == "all") {
        modes = {"adaptive", "1", "2", "3"};
      } else {
        modes = {ag_modes};
      }
      std::vector<eval::SweepRow> rows;
      nlohmann::json j = nlohmann::json::object();
      for (const auto& mode : modes) {
        PolicyArgs args = ag_pol;
        args.fixed_n = mode;
        auto loaded = make_policy(args);
        apply_scene(loaded.config.sim, ag_scene);
        const auto report = eval::run_eval(*loaded.policy, loaded.config.sim, ag_scene.n, ag_scene.seed);
        rows.push_back({{{{"gru_mode", mode}}, loaded.config.sim}, report});
        j[mode] = report.to_json();
        eval::write_metrics_table(std::cout, report, "gru mode " + mode);
      }
      if (!ag_csv.empty()) {
        std::ofstream out(ag_csv);
        if (!out) throw std::runtime_error("cannot write '" + ag_csv + "'");
        eval::write_sweep_csv(out, rows);
      }
      if (!ag_json.empty()) write_json(ag_json, j);
      return 0;
    }

    if (*sw_cmd) {
      const bool evaluate_only = !sw_pol.ckpt.empty() || sw_pol.policy == "orca";
      train::TrainConfig base;
      if (evaluate_only) {
        base = make_policy(sw_pol).config;
      } else {
        base = load_config(sw_config, sw_set);
      }
      apply_scene(base.sim, sw_scene);

      // Cross product of the grid axes.
      std::vector<std::map<std::string, std::string>> points{{}};
      for (const auto& axis : sw_grid) {
        const auto eq = axis.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--grid expects key=v1,v2,...");
        const std::string key = axis.substr(0, eq);
        if (evaluate_only && key.rfind("sim.", 0) != 0) {
          throw std::invalid_argument("evaluation-only sweeps accept sim.* keys, got '" + key + "'");
        }
        std::vector<std::map<std::string, std::string>> next;
        std::stringstream ss(axis.substr(eq + 1));
        std::string v;
        std::vector<std::string> values;
        while (std::getline(ss, v, ',')) values.push_back(v);
        for (const auto& p : points) {
          for (const auto& value : values) {
            auto q = p;
            q[key] = value;
            next.push_back(q);
          }
        }
        points = std::move(next);
      }

      std::vector<eval::SweepPoint> grid;
      std::vector<train::TrainConfig> configs;
      for (const auto& p : points) {
        auto c = base;
        for (const auto& [k, v] : p) apply_setting(c, k, v);
        c.validate();
        configs.push_back(c);
        grid.push_back({p, c.sim});
      }
      std::vector<std::unique_ptr<ValueNetwork>> nets;
      std::size_t index = 0;
      const auto factory = [&](const eval::SweepPoint&) -> std::unique_ptr<policy::Policy> {
        const auto& c = configs[index++];
        if (evaluate_only) {
          auto loaded = make_policy(sw_pol);
          nets.push_back(std::move(loaded.net));
          return std::move(loaded.policy);
        }
        nets.push_back(std::make_unique<ValueNetwork>(train::train(c, progress_sink(quiet)).net));
        policy::ValuePolicyConfig pcfg;
        pcfg.gamma = c.gamma;
        pcfg.reward_mode = c.reward_mode;
        pcfg.hyper = c.hyper;
        return std::make_unique<policy::ValuePolicy>(*nets.back(), pcfg);
      };
      const auto rows = eval::sweep(grid, factory, sw_scene.n, sw_scene.seed);
      eval::write_sweep_csv(std::cout, rows);
      if (!sw_csv.empty()) {
        std::ofstream out(sw_csv);
        if (!out) throw std::runtime_error("cannot write '" + sw_csv + "'");
        eval::write_sweep_csv(out, rows);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
