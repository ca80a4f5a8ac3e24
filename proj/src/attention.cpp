#include "aemcarl/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace aemcarl::attention {

using nn::Graph;
using nn::Var;

void TfConfig::validate() const {
  if (input_dim <= 0 || model_dim <= 0 || ff_dim <= 0) {
    throw std::invalid_argument("tf: layer sizes must be positive");
  }
  if (heads < 1 || model_dim % heads != 0) {
    throw std::invalid_argument("tf: heads must divide model_dim");
  }
  if (residual && ff_dim != model_dim) {
    throw std::invalid_argument("tf: residual variant needs ff_dim == model_dim");
  }
}

TfEncoder::TfEncoder(const TfConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  input_proj_ = nn::Linear("tf.input", config_.input_dim, config_.model_dim, rng);
  query_ = nn::Linear("tf.query", config_.model_dim, config_.model_dim, rng);
  key_ = nn::Linear("tf.key", config_.model_dim, config_.model_dim, rng);
  value_ = nn::Linear("tf.value", config_.model_dim, config_.model_dim, rng);
  output_proj_ = nn::Linear("tf.output", config_.model_dim, config_.model_dim, rng);
  feed_forward_ = nn::Linear("tf.ff", config_.model_dim, config_.ff_dim, rng);
}

Var TfEncoder::operator()(Graph& g, Var y, const nn::Segments& segs, std::vector<Var>* attention) {
  const Var x = g.relu(input_proj_(g, y));
  const Var q = query_(g, x);
  const Var k = key_(g, x);
  const Var v = value_(g, x);

  const Eigen::Index d = config_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Var heads;
  for (int h = 0; h < config_.heads; ++h) {
    const Eigen::Index start = h * d;
    const Var att = g.segment_attention(g.slice_cols(q, start, d), g.slice_cols(k, start, d),
                                        g.slice_cols(v, start, d), segs, scale);
    if (attention != nullptr) attention->push_back(att);
    heads = heads.valid() ? g.concat_cols(heads, att) : att;
  }
  const Var o = output_proj_(g, heads);
  if (!config_.residual) return g.relu(feed_forward_(g, o));

  const Var x1 = g.layer_norm_rows(g.add(x, o));
  return g.layer_norm_rows(g.add(x1, g.relu(feed_forward_(g, x1))));
}

void TfEncoder::collect(std::vector<nn::Parameter*>& out) {
  input_proj_.collect(out);
  query_.collect(out);
  key_.collect(out);
  value_.collect(out);
  output_proj_.collect(out);
  feed_forward_.collect(out);
}

ValueHead::ValueHead(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden,
                     std::mt19937_64& rng) {
  std::vector<Eigen::Index> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  mlp = nn::Mlp("head", sizes, rng);
}

}  // namespace aemcarl::attention
