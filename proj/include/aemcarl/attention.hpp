#pragma once

#include <random>
#include <vector>

#include "aemcarl/graph.hpp"

namespace aemcarl::attention {

struct TfConfig {
  Eigen::Index input_dim = 50;
  Eigen::Index model_dim = 150;
  int heads = 2;
  Eigen::Index ff_dim = 150;
  bool residual = false;  // residual connections with row-wise layer norm

  Eigen::Index head_dim() const { return model_dim / heads; }
  void validate() const;
};

// Single self-attention encoder layer without positional encoding, so row
// order is preserved and rows are treated as a set.
//   x = relu(y W_in + b_in)
//   head_h = softmax(Q_h K_h^T / sqrt(d_k)) V_h
//   o = concat(heads) W_o + b_o
//   out = relu(o W_ff + b_ff)
class TfEncoder {
 public:
  TfEncoder() = default;
  TfEncoder(const TfConfig& config, std::mt19937_64& rng);

  const TfConfig& config() const { return config_; }

  // `attention` receives one node per head; each holds per-sample weights.
  nn::Var operator()(nn::Graph& g, nn::Var y, const nn::Segments& segs,
                     std::vector<nn::Var>* attention = nullptr);
  void collect(std::vector<nn::Parameter*>& out);

 private:
  TfConfig config_;
  nn::Linear input_proj_;
  nn::Linear query_;
  nn::Linear key_;
  nn::Linear value_;
  nn::Linear output_proj_;
  nn::Linear feed_forward_;
};

// MLP over [f_TF row 0, raw agent fields] producing one value per sample.
struct ValueHead {
  nn::Mlp mlp;

  ValueHead() = default;
  ValueHead(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden, std::mt19937_64& rng);

  nn::Var operator()(nn::Graph& g, nn::Var features) { return mlp(g, features); }
  void collect(std::vector<nn::Parameter*>& out) { mlp.collect(out); }
};

}  // namespace aemcarl::attention
