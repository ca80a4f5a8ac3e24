#include "aemcarl/value_network.hpp"

#include <random>
#include <stdexcept>

namespace aemcarl {

using nn::Graph;
using nn::Var;

void ModelConfig::validate() const {
  aem.validate();
  tf.validate();
  if (tf.input_dim != aem.hidden) throw std::invalid_argument("model: tf input must match aem hidden");
  if (agent_fields <= 0 || agent_fields > aem.input_dim) {
    throw std::invalid_argument("model: agent_fields out of range");
  }
}

void StateBatch::add(const Tensor& joint_state) {
  if (rows.size() == 0) {
    rows = joint_state;
  } else {
    if (joint_state.cols() != rows.cols()) throw std::invalid_argument("StateBatch: column mismatch");
    rows.conservativeResize(rows.rows() + joint_state.rows(), Eigen::NoChange);
    rows.bottomRows(joint_state.rows()) = joint_state;
  }
  segments.push(joint_state.rows());
}

StateBatch StateBatch::of(std::span<const Tensor> states) {
  StateBatch b;
  Eigen::Index total = 0;
  for (const auto& s : states) total += s.rows();
  if (states.empty()) return b;
  b.rows.resize(total, states.front().cols());
  for (const auto& s : states) {
    if (s.cols() != b.rows.cols()) throw std::invalid_argument("StateBatch: column mismatch");
    b.rows.middleRows(b.segments.rows(), s.rows()) = s;
    b.segments.push(s.rows());
  }
  return b;
}

ValueNetwork::ValueNetwork(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  aem_ = aem::Aem(config_.aem, rng);
  encoder_ = attention::TfEncoder(config_.tf, rng);
  head_ = attention::ValueHead(config_.tf.model_dim + config_.agent_fields, config_.head_hidden, rng);
}

ValueNetwork::ValueNetwork(const ValueNetwork& other) = default;
ValueNetwork& ValueNetwork::operator=(const ValueNetwork& other) = default;

ValueNetwork::Forward ValueNetwork::forward(Graph& g, const StateBatch& batch, const Tensor* h_init,
                                            int fixed_n) {
  if (batch.rows.cols() != config_.aem.input_dim) {
    throw std::invalid_argument("value network: expected " + std::to_string(config_.aem.input_dim) +
                                " input columns");
  }
  Forward out;
  const Var s = g.input(batch.rows);
  const Var h0 = h_init != nullptr ? g.input(*h_init) : Var{};
  out.aem = aem_.forward(g, s, batch.segments, h0, fixed_n);
  const Var encoded = encoder_(g, out.aem.y, batch.segments, &out.attention);

  std::vector<Eigen::Index> first_rows;
  first_rows.reserve(static_cast<std::size_t>(batch.size()));
  for (Eigen::Index i = 0; i < batch.size(); ++i) first_rows.push_back(batch.segments.begin(i));
  const Var f_tf = g.gather_rows(encoded, first_rows);
  const Var agent = g.slice_cols(g.gather_rows(s, first_rows), 0, config_.agent_fields);
  out.values = head_(g, g.concat_cols(f_tf, agent));
  return out;
}

double ValueNetwork::value(const Tensor& joint_state) {
  StateBatch b;
  b.add(joint_state);
  return values(b).front();
}

std::vector<double> ValueNetwork::values(const StateBatch& batch, int fixed_n) {
  Graph g(false);
  const auto f = forward(g, batch, nullptr, fixed_n);
  const Tensor& v = g.value(f.values);
  return {v.data(), v.data() + v.size()};
}

std::vector<nn::Parameter*> ValueNetwork::parameters() {
  std::vector<nn::Parameter*> out;
  aem_.collect(out);
  encoder_.collect(out);
  head_.collect(out);
  return out;
}

void ValueNetwork::copy_weights_from(ValueNetwork& other) {
  auto mine = parameters();
  auto theirs = other.parameters();
  if (mine.size() != theirs.size()) throw std::invalid_argument("copy_weights_from: architecture mismatch");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->value.rows() != theirs[i]->value.rows() ||
        mine[i]->value.cols() != theirs[i]->value.cols()) {
      throw std::invalid_argument("copy_weights_from: shape mismatch at " + mine[i]->name);
    }
    mine[i]->value = theirs[i]->value;
  }
}

std::size_t ValueNetwork::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

}  // namespace aemcarl
