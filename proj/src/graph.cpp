#include "aemcarl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace aemcarl::nn {

namespace {

std::string shape(const Tensor& t) {
  std::ostringstream os;
  os << '[' << t.rows() << 'x' << t.cols() << ']';
  return os.str();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape(a) + " vs " +
                                shape(b));
  }
}

}  // namespace

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(Tensor::Zero(value.rows(), value.cols())),
      adam_m(Tensor::Zero(value.rows(), value.cols())),
      adam_v(Tensor::Zero(value.rows(), value.cols())) {}

Segments Segments::single(Eigen::Index rows) {
  Segments s;
  s.push(rows);
  return s;
}

Graph::Graph(bool requires_grad) : requires_grad_(requires_grad) { nodes_.reserve(256); }

Var Graph::push(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Graph::record(Var out, std::function<void(Graph&)> fn) {
  if (requires_grad_) node(out).backward = std::move(fn);
}

void Graph::note_kink(double margin) { kink_margin_ = std::min(kink_margin_, margin); }

void Graph::note_branch(std::uint64_t taken) {
  if (!track_branches_) return;
  signature_ = (signature_ ^ taken) * 1099511628211ull;  // FNV-1a step
}

double Graph::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw std::invalid_argument("Graph::scalar: expected 1x1, got " + shape(t));
  return t(0, 0);
}

Var Graph::input(Tensor value) { return push(std::move(value)); }

Var Graph::param(Parameter& p) {
  Var out = push(p.value);
  node(out).param = &p;
  return out;
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + shape(av) + " x " + shape(bv));
  }
  Tensor out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  Var y = push(std::move(out));
  record(y, [a, b, y](Graph& g) {
    const Tensor& gy = g.grad(y);
    g.grad_of(a).noalias() += gy * g.value(b).transpose();
    g.grad_of(b).noalias() += g.value(a).transpose() * gy;
  });
  return y;
}

Var Graph::add_bias(Var x, Var bias) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw std::invalid_argument("add_bias: shape mismatch " + shape(xv) + " + " + shape(bv));
  }
  Tensor out = xv;
  out.rowwise() += bv.row(0);
  Var y = push(std::move(out));
  record(y, [x, bias, y](Graph& g) {
    const Tensor& gy = g.grad(y);
    g.grad_of(x) += gy;
    g.grad_of(bias) += gy.colwise().sum();
  });
  return y;
}

Var Graph::add(Var a, Var b) {
  require_same_shape("add", value(a), value(b));
  Var y = push(value(a) + value(b));
  record(y, [a, b, y](Graph& g) {
    g.grad_of(a) += g.grad(y);
    g.grad_of(b) += g.grad(y);
  });
  return y;
}

Var Graph::sub(Var a, Var b) {
  require_same_shape("sub", value(a), value(b));
  Var y = push(value(a) - value(b));
  record(y, [a, b, y](Graph& g) {
    g.grad_of(a) += g.grad(y);
    g.grad_of(b) -= g.grad(y);
  });
  return y;
}

Var Graph::mul(Var a, Var b) {
  require_same_shape("mul", value(a), value(b));
  Var y = push(value(a).cwiseProduct(value(b)));
  record(y, [a, b, y](Graph& g) {
    g.grad_of(a) += g.grad(y).cwiseProduct(g.value(b));
    g.grad_of(b) += g.grad(y).cwiseProduct(g.value(a));
  });
  return y;
}

Var Graph::mul_const(Var a, const Tensor& c) {
  require_same_shape("mul_const", value(a), c);
  Var y = push(value(a).cwiseProduct(c));
  record(y, [a, y, c](Graph& g) { g.grad_of(a) += g.grad(y).cwiseProduct(c); });
  return y;
}

Var Graph::affine(Var x, double scale, double shift) {
  Tensor out = (value(x).array() * scale + shift).matrix();
  Var y = push(std::move(out));
  record(y, [x, y, scale](Graph& g) { g.grad_of(x) += g.grad(y) * scale; });
  return y;
}

Var Graph::sigmoid(Var x) {
  Tensor out = (1.0 / (1.0 + (-value(x).array()).exp())).matrix();
  Var y = push(std::move(out));
  record(y, [x, y](Graph& g) {
    const auto s = g.value(y).array();
    g.grad_of(x).array() += g.grad(y).array() * s * (1.0 - s);
  });
  return y;
}

Var Graph::tanh(Var x) {
  Tensor out = value(x).array().tanh().matrix();
  Var y = push(std::move(out));
  record(y, [x, y](Graph& g) {
    const auto t = g.value(y).array();
    g.grad_of(x).array() += g.grad(y).array() * (1.0 - t * t);
  });
  return y;
}

Var Graph::relu(Var x) {
  const Tensor& xv = value(x);
  if (xv.size() > 0) note_kink(xv.cwiseAbs().minCoeff());
  if (track_branches_) {
    for (Eigen::Index i = 0; i < xv.size(); ++i) note_branch(xv.data()[i] > 0.0);
  }
  Var y = push(xv.cwiseMax(0.0));
  record(y, [x, y](Graph& g) {
    g.grad_of(x).array() += (g.value(x).array() > 0.0).select(g.grad(y).array(), 0.0);
  });
  return y;
}

Var Graph::softmax_rows(Var x) {
  const Tensor& xv = value(x);
  Tensor out(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double m = xv.row(r).maxCoeff();
    out.row(r) = (xv.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  Var y = push(std::move(out));
  record(y, [x, y](Graph& g) {
    const Tensor& s = g.value(y);
    const Tensor& gy = g.grad(y);
    const Eigen::VectorXd dots = gy.cwiseProduct(s).rowwise().sum();
    g.grad_of(x).array() += s.array() * (gy.colwise() - dots).array();
  });
  return y;
}

Var Graph::layer_norm_rows(Var x, double eps) {
  const Tensor& xv = value(x);
  const auto cols = static_cast<double>(xv.cols());
  Tensor out(xv.rows(), xv.cols());
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().sum() / cols;
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    out.row(r) = ((xv.row(r).array() - mean) * inv_std(r)).matrix();
  }
  Var y = push(std::move(out));
  record(y, [x, y, inv_std, cols](Graph& g) {
    const Tensor& xh = g.value(y);
    const Tensor& gy = g.grad(y);
    Tensor& gx = g.grad_of(x);
    for (Eigen::Index r = 0; r < xh.rows(); ++r) {
      const double mean_g = gy.row(r).sum() / cols;
      const double mean_gx = gy.row(r).dot(xh.row(r)) / cols;
      gx.row(r).array() +=
          inv_std(r) * (gy.row(r).array() - mean_g - xh.row(r).array() * mean_gx);
    }
  });
  return y;
}

Var Graph::concat_cols(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rows() != bv.rows()) {
    throw std::invalid_argument("concat_cols: row mismatch " + shape(av) + " vs " + shape(bv));
  }
  Tensor out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const Eigen::Index ac = av.cols();
  const Eigen::Index bc = bv.cols();
  Var y = push(std::move(out));
  record(y, [a, b, y, ac, bc](Graph& g) {
    const Tensor& gy = g.grad(y);
    g.grad_of(a) += gy.leftCols(ac);
    g.grad_of(b) += gy.rightCols(bc);
  });
  return y;
}

Var Graph::slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  const Tensor& xv = value(x);
  if (start < 0 || count < 0 || start + count > xv.cols()) {
    throw std::invalid_argument("slice_cols: range out of bounds for " + shape(xv));
  }
  Var y = push(xv.middleCols(start, count));
  record(y, [x, y, start, count](Graph& g) {
    g.grad_of(x).middleCols(start, count) += g.grad(y);
  });
  return y;
}

Var Graph::gather_rows(Var x, std::span<const Eigen::Index> rows) {
  const Tensor& xv = value(x);
  Tensor out(static_cast<Eigen::Index>(rows.size()), xv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= xv.rows()) {
      throw std::invalid_argument("gather_rows: index out of range for " + shape(xv));
    }
    out.row(static_cast<Eigen::Index>(i)) = xv.row(rows[i]);
  }
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  Var y = push(std::move(out));
  record(y, [x, y, idx](Graph& g) {
    const Tensor& gy = g.grad(y);
    Tensor& gx = g.grad_of(x);
    for (std::size_t i = 0; i < idx.size(); ++i) gx.row(idx[i]) += gy.row(static_cast<Eigen::Index>(i));
  });
  return y;
}

Var Graph::scale_rows(Var x, Var w) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  if (wv.cols() != 1 || wv.rows() != xv.rows()) {
    throw std::invalid_argument("scale_rows: shape mismatch " + shape(xv) + " by " + shape(wv));
  }
  Tensor out = xv.array().colwise() * wv.col(0).array();
  Var y = push(std::move(out));
  record(y, [x, w, y](Graph& g) {
    const Tensor& gy = g.grad(y);
    g.grad_of(x).array() += gy.array().colwise() * g.value(w).col(0).array();
    g.grad_of(w).col(0) += gy.cwiseProduct(g.value(x)).rowwise().sum();
  });
  return y;
}

Var Graph::segment_mean(Var x, const Segments& segs) {
  const Tensor& xv = value(x);
  if (xv.cols() != 1 || xv.rows() != segs.rows()) {
    throw std::invalid_argument("segment_mean: expected " + std::to_string(segs.rows()) +
                                "x1, got " + shape(xv));
  }
  Tensor out(segs.count(), 1);
  for (Eigen::Index s = 0; s < segs.count(); ++s) {
    out(s, 0) = xv.col(0).segment(segs.begin(s), segs.size(s)).mean();
  }
  Var y = push(std::move(out));
  record(y, [x, y, segs](Graph& g) {
    const Tensor& gy = g.grad(y);
    Tensor& gx = g.grad_of(x);
    for (Eigen::Index s = 0; s < segs.count(); ++s) {
      gx.col(0).segment(segs.begin(s), segs.size(s)).array() +=
          gy(s, 0) / static_cast<double>(segs.size(s));
    }
  });
  return y;
}

Var Graph::expand_segments(Var x, const Segments& segs) {
  const Tensor& xv = value(x);
  if (xv.cols() != 1 || xv.rows() != segs.count()) {
    throw std::invalid_argument("expand_segments: expected " + std::to_string(segs.count()) +
                                "x1, got " + shape(xv));
  }
  Tensor out(segs.rows(), 1);
  for (Eigen::Index s = 0; s < segs.count(); ++s) {
    out.col(0).segment(segs.begin(s), segs.size(s)).setConstant(xv(s, 0));
  }
  Var y = push(std::move(out));
  record(y, [x, y, segs](Graph& g) {
    const Tensor& gy = g.grad(y);
    Tensor& gx = g.grad_of(x);
    for (Eigen::Index s = 0; s < segs.count(); ++s) {
      gx(s, 0) += gy.col(0).segment(segs.begin(s), segs.size(s)).sum();
    }
  });
  return y;
}

Var Graph::segment_attention(Var q, Var k, Var v, const Segments& segs, double scale) {
  const Tensor& qv = value(q);
  const Tensor& kv = value(k);
  const Tensor& vv = value(v);
  if (qv.rows() != segs.rows() || kv.rows() != segs.rows() || vv.rows() != segs.rows() ||
      qv.cols() != kv.cols()) {
    throw std::invalid_argument("segment_attention: shape mismatch Q" + shape(qv) + " K" +
                                shape(kv) + " V" + shape(vv));
  }
  Tensor out(qv.rows(), vv.cols());
  std::vector<Tensor> weights(static_cast<std::size_t>(segs.count()));
  for (Eigen::Index s = 0; s < segs.count(); ++s) {
    const Eigen::Index b = segs.begin(s);
    const Eigen::Index n = segs.size(s);
    Tensor logits = (qv.middleRows(b, n) * kv.middleRows(b, n).transpose()) * scale;
    Tensor& a = weights[static_cast<std::size_t>(s)];
    a.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const double m = logits.row(r).maxCoeff();
      a.row(r) = (logits.row(r).array() - m).exp().matrix();
      a.row(r) /= a.row(r).sum();
    }
    out.middleRows(b, n).noalias() = a * vv.middleRows(b, n);
  }
  Var y = push(std::move(out));
  node(y).attention = std::move(weights);
  record(y, [q, k, v, y, segs, scale](Graph& g) {
    const Tensor& gy = g.grad(y);
    const auto& weights = g.nodes_[static_cast<std::size_t>(y.id)].attention;
    for (Eigen::Index s = 0; s < segs.count(); ++s) {
      const Eigen::Index b = segs.begin(s);
      const Eigen::Index n = segs.size(s);
      const Tensor& a = weights[static_cast<std::size_t>(s)];
      const auto gys = gy.middleRows(b, n);
      g.grad_of(v).middleRows(b, n).noalias() += a.transpose() * gys;
      Tensor ga = gys * g.value(v).middleRows(b, n).transpose();
      const Eigen::VectorXd dots = ga.cwiseProduct(a).rowwise().sum();
      Tensor gl = (a.array() * (ga.colwise() - dots).array()).matrix() * scale;
      g.grad_of(q).middleRows(b, n).noalias() += gl * g.value(k).middleRows(b, n);
      g.grad_of(k).middleRows(b, n).noalias() += gl.transpose() * g.value(q).middleRows(b, n);
    }
  });
  return y;
}

const std::vector<Tensor>& Graph::attention_weights(Var attention_out) const {
  return nodes_[static_cast<std::size_t>(attention_out.id)].attention;
}

Var Graph::sum_all(Var x) {
  Tensor out(1, 1);
  out(0, 0) = value(x).sum();
  Var y = push(std::move(out));
  record(y, [x, y](Graph& g) { g.grad_of(x).array() += g.grad(y)(0, 0); });
  return y;
}

Var Graph::mse(Var pred, const Tensor& target) {
  require_same_shape("mse", value(pred), target);
  const Tensor diff = value(pred) - target;
  const auto n = static_cast<double>(diff.size());
  Tensor out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  Var y = push(std::move(out));
  record(y, [pred, y, diff, n](Graph& g) { g.grad_of(pred) += diff * (2.0 * g.grad(y)(0, 0) / n); });
  return y;
}

void Graph::backward(Var loss) {
  if (!requires_grad_) throw std::logic_error("Graph::backward on a graph without gradients");
  if (value(loss).size() != 1) throw std::invalid_argument("Graph::backward: loss must be 1x1");
  for (std::size_t i = 0; i <= static_cast<std::size_t>(loss.id); ++i) {
    auto& n = nodes_[i];
    n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
  }
  grad_of(loss)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backward) n.backward(*this);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

Linear::Linear(const std::string& name, Eigen::Index fan_in, Eigen::Index fan_out,
               std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  Tensor b(1, fan_out);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = dist(rng);
  weight = Parameter(name + ".weight", std::move(w));
  bias = Parameter(name + ".bias", std::move(b));
}

Var Linear::operator()(Graph& g, Var x) {
  return g.add_bias(g.matmul(x, g.param(weight)), g.param(bias));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Mlp::Mlp(const std::string& name, std::span<const Eigen::Index> sizes, std::mt19937_64& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    layers.emplace_back(name + "." + std::to_string(i), sizes[i], sizes[i + 1], rng);
  }
}

Var Mlp::operator()(Graph& g, Var x) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](g, x);
    if (i + 1 < layers.size()) x = g.relu(x);
  }
  return x;
}

void Mlp::collect(std::vector<Parameter*>& out) {
  for (auto& l : layers) l.collect(out);
}

void Adam::step(std::span<Parameter* const> params) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (Parameter* p : params) {
    p->adam_m = config_.beta1 * p->adam_m + (1.0 - config_.beta1) * p->grad;
    p->adam_v.array() =
        config_.beta2 * p->adam_v.array() + (1.0 - config_.beta2) * p->grad.array().square();
    p->value.array() -= config_.lr * (p->adam_m.array() / c1) /
                        ((p->adam_v.array() / c2).sqrt() + config_.eps);
    p->zero_grad();
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

GradCheckResult grad_check(const std::function<Var(Graph&)>& f,
                           std::span<Parameter* const> params,
                           const GradCheckOptions& options) {
  zero_grad(params);
  GradCheckResult result;
  std::uint64_t base_signature = 0;
  {
    Graph g(true);
    g.track_branches(true);
    Var loss = f(g);
    g.backward(loss);
    result.kink_margin = g.kink_margin();
    base_signature = g.branch_signature();
  }
  auto eval = [&](bool& same_branch) {
    Graph g(false);
    g.track_branches(true);
    const double v = g.scalar(f(g));
    same_branch = same_branch && g.branch_signature() == base_signature;
    return v;
  };

  std::mt19937_64 rng(options.seed);
  for (Parameter* p : params) {
    const Eigen::Index n = p->value.size();
    std::vector<Eigen::Index> coords;
    if (options.coords_per_param == 0 || static_cast<std::size_t>(n) <= options.coords_per_param) {
      for (Eigen::Index i = 0; i < n; ++i) coords.push_back(i);
    } else {
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
      for (std::size_t i = 0; i < options.coords_per_param; ++i) coords.push_back(pick(rng));
    }
    for (Eigen::Index c : coords) {
      double& x = p->value.data()[c];
      const double saved = x;
      bool same_branch = true;
      x = saved + options.h;
      const double up = eval(same_branch);
      x = saved - options.h;
      const double down = eval(same_branch);
      x = saved;
      if (!same_branch) {
        ++result.coords_skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.h);
      const double analytic = p->grad.data()[c];
      const double abs_err = std::fabs(analytic - numeric);
      const double rel =
          abs_err / std::max({std::fabs(analytic), std::fabs(numeric), options.floor});
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p->name + "[" + std::to_string(c) + "]";
      }
      ++result.coords_checked;
    }
  }
  zero_grad(params);
  return result;
}

}  // namespace aemcarl::nn
