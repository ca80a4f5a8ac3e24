#pragma once

#include <random>
#include <vector>

#include "aemcarl/graph.hpp"

namespace aemcarl::aem {

struct AemConfig {
  Eigen::Index input_dim = 12;
  Eigen::Index hidden = 50;
  Eigen::Index mlp_hidden = 100;
  int max_iters = 3;
  double eps = 0.05;           // halt once cumulative confidence >= 1 - eps
  bool shared_weights = false; // one GRU cell iterated instead of one per layer
  int fixed_n = 0;             // > 0 bypasses halting with exactly this many iterations
  bool persistent_hidden = false;

  void validate() const;
};

// GRU whose gates are two-layer MLPs over [h_prev, s]:
//   z = sigma(MLP_z([h, s])), r = sigma(MLP_r([h, s])),
//   q = tanh(MLP_q([r * h, s])), h' = (1 - z) * h + z * q.
struct GruCell {
  nn::Mlp z_gate;
  nn::Mlp r_gate;
  nn::Mlp q_gate;
  Eigen::Index hidden = 0;

  GruCell() = default;
  GruCell(const std::string& name, Eigen::Index input_dim, Eigen::Index hidden,
          Eigen::Index mlp_hidden, std::mt19937_64& rng);

  nn::Var operator()(nn::Graph& g, nn::Var h_prev, nn::Var s);
  void collect(std::vector<nn::Parameter*>& out);
};

// Per-row confidence sigma(h W + b); one column.
struct HaltingUnit {
  nn::Linear linear;

  HaltingUnit() = default;
  HaltingUnit(const std::string& name, Eigen::Index hidden, std::mt19937_64& rng);

  nn::Var operator()(nn::Graph& g, nn::Var h);
  void collect(std::vector<nn::Parameter*>& out);
};

struct AemOutput {
  nn::Var y;                               // rows x hidden, pooled feature
  std::vector<int> n_used;                 // iterations per sample
  std::vector<std::vector<double>> probs;  // per sample, one confidence per executed iteration
  Tensor final_hidden;                     // rows x hidden, h at each sample's last used iteration
};

class Aem {
 public:
  Aem() = default;
  Aem(const AemConfig& config, std::mt19937_64& rng);

  const AemConfig& config() const { return config_; }

  // Adaptive forward over a stacked batch. `h_init` (rows x hidden) replaces
  // the zero initial state when valid. `fixed_n` > 0 overrides the halting
  // rule for ablations; < 0 defers to the config.
  AemOutput forward(nn::Graph& g, nn::Var s, const nn::Segments& segs, nn::Var h_init = {},
                    int fixed_n = -1);

  GruCell& cell(int layer);
  HaltingUnit& halting() { return halting_; }
  void collect(std::vector<nn::Parameter*>& out);

 private:
  AemConfig config_;
  std::vector<GruCell> cells_;
  HaltingUnit halting_;
};

}  // namespace aemcarl::aem
