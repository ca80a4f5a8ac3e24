#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "aemcarl/tensor.hpp"

namespace aemcarl::nn {

// Trainable tensor with its gradient accumulator and Adam moments.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;

  Parameter() = default;
  Parameter(std::string name_, Tensor value_);

  void zero_grad() { grad.setZero(); }
};

// Row ranges of a stacked batch: sample s owns rows [offsets[s], offsets[s+1]).
struct Segments {
  std::vector<Eigen::Index> offsets{0};

  Eigen::Index count() const { return static_cast<Eigen::Index>(offsets.size()) - 1; }
  Eigen::Index rows() const { return offsets.back(); }
  Eigen::Index begin(Eigen::Index s) const { return offsets[static_cast<std::size_t>(s)]; }
  Eigen::Index size(Eigen::Index s) const {
    return offsets[static_cast<std::size_t>(s) + 1] - offsets[static_cast<std::size_t>(s)];
  }
  void push(Eigen::Index n) { offsets.push_back(offsets.back() + n); }

  static Segments single(Eigen::Index rows);
};

// Handle to a node on a Graph tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run tape for reverse-mode differentiation. Every op appends a node
// whose value is computed eagerly; backward() sweeps the tape once in reverse.
// With requires_grad = false no backward closures are recorded.
class Graph {
 public:
  explicit Graph(bool requires_grad = true);

  bool requires_grad() const { return requires_grad_; }

  Var input(Tensor value);
  Var param(Parameter& p);

  const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const Tensor& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add_bias(Var x, Var bias);  // bias is 1 x cols, added to every row
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                  // elementwise
  Var mul_const(Var a, const Tensor& c);  // elementwise by a constant
  Var affine(Var x, double scale, double shift);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var relu(Var x);
  Var softmax_rows(Var x);
  Var layer_norm_rows(Var x, double eps = 1e-5);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
  Var gather_rows(Var x, std::span<const Eigen::Index> rows);
  Var scale_rows(Var x, Var w);                    // w is rows x 1
  Var segment_mean(Var x, const Segments& segs);   // rows x 1 -> count x 1
  Var expand_segments(Var x, const Segments& segs);  // count x 1 -> rows x 1
  // Per-segment softmax(Q K^T * scale) V. Attention matrices are kept for
  // inspection through attention_weights().
  Var segment_attention(Var q, Var k, Var v, const Segments& segs, double scale);
  Var sum_all(Var x);
  Var mse(Var pred, const Tensor& target);

  const std::vector<Tensor>& attention_weights(Var attention_out) const;

  // Seeds d(loss)/d(loss) = 1 and accumulates into every Parameter::grad.
  void backward(Var loss);

  // Smallest distance to a non-differentiable point seen so far (relu inputs,
  // halting thresholds). Finite-difference checks use this to reject points.
  double kink_margin() const { return kink_margin_; }
  void note_kink(double margin);

  // Optional hash of every branch taken (relu signs, discrete decisions).
  // Two evaluations with equal signatures lie on the same smooth piece.
  void track_branches(bool on) { track_branches_ = on; }
  std::uint64_t branch_signature() const { return signature_; }
  void note_branch(std::uint64_t taken);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Graph&)> backward;
    Parameter* param = nullptr;
    std::vector<Tensor> attention;
  };

  Var push(Tensor value);
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  Tensor& grad_of(Var v) { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  void record(Var out, std::function<void(Graph&)> fn);

  bool requires_grad_;
  std::vector<Node> nodes_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
  bool track_branches_ = false;
  std::uint64_t signature_ = 1469598103934665603ull;
};

// Dense layer y = x W + b with W stored as fan_in x fan_out.
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  // Weights and biases ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)).
  Linear(const std::string& name, Eigen::Index fan_in, Eigen::Index fan_out,
         std::mt19937_64& rng);

  Var operator()(Graph& g, Var x);
  void collect(std::vector<Parameter*>& out);
};

// Stack of Linear layers with relu between them (none after the last).
struct Mlp {
  std::vector<Linear> layers;

  Mlp() = default;
  Mlp(const std::string& name, std::span<const Eigen::Index> sizes, std::mt19937_64& rng);

  Var operator()(Graph& g, Var x);
  void collect(std::vector<Parameter*>& out);
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Zeroes gradients after each step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(std::span<Parameter* const> params);
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
};

void zero_grad(std::span<Parameter* const> params);

struct GradCheckOptions {
  double h = 1e-5;
  // Coordinates sampled per parameter tensor; 0 checks every coordinate.
  std::size_t coords_per_param = 0;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_param;
  double kink_margin = std::numeric_limits<double>::infinity();
  // Coordinates left out because x +/- h crossed a branch of the function.
  std::size_t coords_skipped = 0;
};

// Compares backward gradients of a scalar-valued graph function against
// central differences, rel = |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const std::function<Var(Graph&)>& f,
                           std::span<Parameter* const> params,
                           const GradCheckOptions& options = {});

}  // namespace aemcarl::nn
