#pragma once

// Straight-line reference implementations used as test oracles. They read
// weights out of the library's parameter tensors but share no arithmetic with
// the graph code: plain loops over std::vector.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "aemcarl/aem.hpp"
#include "aemcarl/reward.hpp"
#include "aemcarl/value_network.hpp"

namespace oracle {

using Row = std::vector<double>;
using Rows = std::vector<Row>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Row affine(const aemcarl::Tensor& w, const aemcarl::Tensor& b, const Row& x) {
  Row y(static_cast<std::size_t>(w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    double s = b(0, j);
    for (Eigen::Index i = 0; i < w.rows(); ++i) s += x[static_cast<std::size_t>(i)] * w(i, j);
    y[static_cast<std::size_t>(j)] = s;
  }
  return y;
}

inline Row linear(const aemcarl::nn::Linear& l, const Row& x) { return affine(l.weight.value, l.bias.value, x); }

inline Row mlp(const aemcarl::nn::Mlp& m, Row x) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    x = linear(m.layers[l], x);
    if (l + 1 < m.layers.size()) {
      for (double& v : x) v = v > 0.0 ? v : 0.0;
    }
  }
  return x;
}

inline Row concat(const Row& a, const Row& b) {
  Row out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// One GRU update for a single row.
inline Row gru_row(const aemcarl::aem::GruCell& cell, const Row& h, const Row& s) {
  const Row hs = concat(h, s);
  Row z = mlp(cell.z_gate, hs);
  Row r = mlp(cell.r_gate, hs);
  for (double& v : z) v = sigmoid(v);
  for (double& v : r) v = sigmoid(v);
  Row rh(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) rh[i] = r[i] * h[i];
  Row q = mlp(cell.q_gate, concat(rh, s));
  for (double& v : q) v = std::tanh(v);
  Row out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = (1.0 - z[i]) * h[i] + z[i] * q[i];
  return out;
}

inline Rows to_rows(const aemcarl::Tensor& t) {
  Rows out(static_cast<std::size_t>(t.rows()), Row(static_cast<std::size_t>(t.cols())));
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = t(i, j);
  }
  return out;
}

struct AemTrace {
  std::vector<Rows> hidden;  // h^n for every executed n
  std::vector<double> probs;
  int n_used = 0;
  Rows y;
};

// Reference AEM for one sample: h^0 = 0, stop at the first n with
// sum p >= 1 - eps (or the cap), y = (1/N) sum_n p^n h^n. fixed_n > 0
// forces exactly that many iterations.
inline AemTrace aem_forward(aemcarl::aem::Aem& aem, const aemcarl::Tensor& state, int fixed_n = 0) {
  const auto& cfg = aem.config();
  const Rows s = to_rows(state);
  Rows h(s.size(), Row(static_cast<std::size_t>(cfg.hidden), 0.0));
  AemTrace t;
  double cum = 0.0;
  for (int n = 1; n <= cfg.max_iters; ++n) {
    for (std::size_t i = 0; i < s.size(); ++i) h[i] = gru_row(aem.cell(n - 1), h[i], s[i]);
    double p = 0.0;
    for (const auto& row : h) p += sigmoid(linear(aem.halting().linear, row)[0]);
    p /= static_cast<double>(h.size());
    t.hidden.push_back(h);
    t.probs.push_back(p);
    cum += p;
    const bool stop = fixed_n > 0 ? n == fixed_n : (cum >= 1.0 - cfg.eps || n == cfg.max_iters);
    if (stop) {
      t.n_used = n;
      break;
    }
  }
  t.y.assign(s.size(), Row(static_cast<std::size_t>(cfg.hidden), 0.0));
  for (int n = 0; n < t.n_used; ++n) {
    const double w = t.probs[static_cast<std::size_t>(n)] / t.n_used;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = 0; j < t.y[i].size(); ++j) t.y[i][j] += w * t.hidden[static_cast<std::size_t>(n)][i][j];
    }
  }
  return t;
}

inline Row relu(Row x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
  return x;
}

// Plain encoder without the residual variant. Parameters are taken in the
// encoder's collect() order: input, query, key, value, output, feed-forward.
inline Rows encoder(aemcarl::attention::TfEncoder& enc, const Rows& y,
                    std::vector<Rows>* weights = nullptr) {
  std::vector<aemcarl::nn::Parameter*> ps;
  enc.collect(ps);
  const auto lin = [&](int k, const Row& x) { return affine(ps[2 * k]->value, ps[2 * k + 1]->value, x); };
  const std::size_t n = y.size();
  Rows x(n), q(n), k(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = relu(lin(0, y[i]));
    q[i] = lin(1, x[i]);
    k[i] = lin(2, x[i]);
    v[i] = lin(3, x[i]);
  }
  const auto& cfg = enc.config();
  const auto d = static_cast<std::size_t>(cfg.head_dim());
  Rows heads(n, Row(static_cast<std::size_t>(cfg.model_dim), 0.0));
  for (int h = 0; h < cfg.heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * d;
    Rows w(n, Row(n));
    for (std::size_t i = 0; i < n; ++i) {
      double top = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += q[i][off + c] * k[j][off + c];
        w[i][j] = dot / std::sqrt(static_cast<double>(d));
        top = std::max(top, w[i][j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) z += (w[i][j] = std::exp(w[i][j] - top));
      for (std::size_t j = 0; j < n; ++j) w[i][j] /= z;
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < d; ++c) heads[i][off + c] += w[i][j] * v[j][off + c];
      }
    }
    if (weights != nullptr) weights->push_back(w);
  }
  Rows out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = relu(lin(5, lin(4, heads[i])));
  return out;
}

// Full state value for one joint state.
inline double state_value(aemcarl::ValueNetwork& net, const aemcarl::Tensor& state) {
  const AemTrace trace = aem_forward(net.aem(), state);
  const Rows f = encoder(net.encoder(), trace.y);
  Row in = f[0];
  for (Eigen::Index j = 0; j < net.config().agent_fields; ++j) in.push_back(state(0, j));
  return mlp(net.head().mlp, in)[0];
}

// Monte-Carlo estimate of the probability mass inside the coverage disc.
// Each obstacle's displacement is drawn by rejection from the product of
// zero-mean Gaussians in x, y and heading offset, restricted to its spread
// disc. Written from the density definition, not from the grid code.
inline double monte_carlo_probability(const std::vector<aemcarl::sim::ObstacleState>& obstacles,
                                      const aemcarl::Vec2& center, double radius,
                                      const aemcarl::reward::RewardHyper& h, std::mt19937_64& rng,
                                      int samples = 100000) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto g = [](double x, double s) { return std::exp(-0.5 * x * x / (s * s)); };
  double total = 0.0;
  for (const auto& o : obstacles) {
    const double speed = std::hypot(o.vx, o.vy);
    const double r = std::max(speed * h.dt_obstacle, o.radius);
    const bool still = speed < 1e-9;
    const double heading = still ? 0.0 : std::atan2(o.vy, o.vx);
    int hits = 0;
    int accepted = 0;
    while (accepted < samples) {
      const double rho = r * std::sqrt(u(rng));
      const double phi = 2.0 * M_PI * u(rng);
      const double dx = rho * std::cos(phi);
      const double dy = rho * std::sin(phi);
      double w = g(dx, h.delta_xy) * g(dy, h.delta_xy);
      if (!still) w *= g(std::remainder(phi - heading, 2.0 * M_PI), h.delta_theta);
      if (u(rng) >= w) continue;  // w <= 1 since each factor peaks at 1
      ++accepted;
      if (std::hypot(o.px + dx - center.x, o.py + dy - center.y) <= radius) ++hits;
    }
    total += static_cast<double>(hits) / samples;
  }
  return std::min(total, 1.0);
}

}  // namespace oracle
