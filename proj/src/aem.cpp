#include "aemcarl/aem.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace aemcarl::aem {

using nn::Graph;
using nn::Var;

void AemConfig::validate() const {
  if (input_dim <= 0 || hidden <= 0 || mlp_hidden <= 0) {
    throw std::invalid_argument("aem: layer sizes must be positive");
  }
  if (max_iters < 1) throw std::invalid_argument("aem: max_iters must be >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("aem: eps must lie in (0, 1)");
  if (fixed_n < 0 || fixed_n > max_iters) {
    throw std::invalid_argument("aem: fixed_n must be 0 (adaptive) or in [1, max_iters]");
  }
}

GruCell::GruCell(const std::string& name, Eigen::Index input_dim, Eigen::Index hidden_,
                 Eigen::Index mlp_hidden, std::mt19937_64& rng)
    : hidden(hidden_) {
  const std::array<Eigen::Index, 3> sizes{hidden_ + input_dim, mlp_hidden, hidden_};
  z_gate = nn::Mlp(name + ".z", sizes, rng);
  r_gate = nn::Mlp(name + ".r", sizes, rng);
  q_gate = nn::Mlp(name + ".q", sizes, rng);
}

Var GruCell::operator()(Graph& g, Var h_prev, Var s) {
  if (g.value(h_prev).cols() != hidden || g.value(h_prev).rows() != g.value(s).rows()) {
    throw std::invalid_argument("gru_cell: hidden state must be rows x " + std::to_string(hidden));
  }
  const Var hs = g.concat_cols(h_prev, s);
  const Var z = g.sigmoid(z_gate(g, hs));
  const Var r = g.sigmoid(r_gate(g, hs));
  const Var q = g.tanh(q_gate(g, g.concat_cols(g.mul(r, h_prev), s)));
  return g.add(g.mul(g.affine(z, -1.0, 1.0), h_prev), g.mul(z, q));
}

void GruCell::collect(std::vector<nn::Parameter*>& out) {
  z_gate.collect(out);
  r_gate.collect(out);
  q_gate.collect(out);
}

HaltingUnit::HaltingUnit(const std::string& name, Eigen::Index hidden, std::mt19937_64& rng)
    : linear(name, hidden, 1, rng) {}

Var HaltingUnit::operator()(Graph& g, Var h) { return g.sigmoid(linear(g, h)); }

void HaltingUnit::collect(std::vector<nn::Parameter*>& out) { linear.collect(out); }

Aem::Aem(const AemConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  const int n_cells = config_.shared_weights ? 1 : config_.max_iters;
  for (int i = 0; i < n_cells; ++i) {
    cells_.emplace_back("aem.gru" + std::to_string(i), config_.input_dim, config_.hidden,
                        config_.mlp_hidden, rng);
  }
  halting_ = HaltingUnit("aem.halt", config_.hidden, rng);
}

GruCell& Aem::cell(int layer) {
  return cells_[config_.shared_weights ? 0 : static_cast<std::size_t>(layer)];
}

void Aem::collect(std::vector<nn::Parameter*>& out) {
  for (auto& c : cells_) c.collect(out);
  halting_.collect(out);
}

AemOutput Aem::forward(Graph& g, Var s, const nn::Segments& segs, Var h_init, int fixed_n) {
  const Eigen::Index rows = g.value(s).rows();
  if (rows != segs.rows()) throw std::invalid_argument("aem: segments do not cover the input");
  if (fixed_n < 0) fixed_n = config_.fixed_n;
  if (fixed_n > config_.max_iters) throw std::invalid_argument("aem: fixed_n exceeds max_iters");

  const auto count = static_cast<std::size_t>(segs.count());
  const double threshold = 1.0 - config_.eps;

  AemOutput out;
  out.n_used.assign(count, 0);
  out.probs.assign(count, {});
  std::vector<double> cumulative(count, 0.0);
  std::size_t open = count;

  Var h = h_init.valid() ? h_init : g.input(Tensor::Zero(rows, config_.hidden));
  std::vector<Var> hidden;
  std::vector<Var> confidence;

  for (int n = 1; n <= config_.max_iters && open > 0; ++n) {
    h = cell(n - 1)(g, h, s);
    const Var p = g.segment_mean(halting_(g, h), segs);
    hidden.push_back(h);
    confidence.push_back(p);

    const Tensor& pv = g.value(p);
    for (std::size_t i = 0; i < count; ++i) {
      if (out.n_used[i] != 0) continue;
      out.probs[i].push_back(pv(static_cast<Eigen::Index>(i), 0));
      cumulative[i] += pv(static_cast<Eigen::Index>(i), 0);
      bool stop = false;
      if (fixed_n > 0) {
        stop = n == fixed_n;
      } else {
        g.note_kink(std::fabs(cumulative[i] - threshold));
        stop = cumulative[i] >= threshold || n == config_.max_iters;
      }
      g.note_branch(stop);
      if (stop) {
        out.n_used[i] = n;
        --open;
      }
    }
  }

  // y = (1 / N) * sum_{n <= N} p^n h^n, per sample.
  out.final_hidden = Tensor::Zero(rows, config_.hidden);
  Var y;
  for (std::size_t n = 0; n < hidden.size(); ++n) {
    Tensor weight(segs.count(), 1);
    for (std::size_t i = 0; i < count; ++i) {
      const int used = out.n_used[i];
      weight(static_cast<Eigen::Index>(i), 0) =
          static_cast<int>(n) < used ? 1.0 / static_cast<double>(used) : 0.0;
      if (static_cast<int>(n) == used - 1) {
        const auto b = segs.begin(static_cast<Eigen::Index>(i));
        const auto len = segs.size(static_cast<Eigen::Index>(i));
        out.final_hidden.middleRows(b, len) = g.value(hidden[n]).middleRows(b, len);
      }
    }
    const Var w = g.expand_segments(g.mul_const(confidence[n], weight), segs);
    const Var term = g.scale_rows(hidden[n], w);
    y = y.valid() ? g.add(y, term) : term;
  }
  out.y = y;
  return out;
}

}  // namespace aemcarl::aem
