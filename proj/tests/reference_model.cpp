// Element-by-element re-implementation of the encoder, reconstruction head and
// GRU classifier. Deliberately avoids Eigen expressions so it shares no code
// path with the library.
#include "reference_model.hpp"

#include <cmath>
#include <vector>

namespace saga::reference {

namespace {

using Grid = std::vector<std::vector<double>>;

Grid grid(std::size_t rows, std::size_t cols) { return Grid(rows, std::vector<double>(cols, 0.0)); }

Grid from(const Matrix& m) {
  Grid g = grid(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].size(); ++j) g[i][j] = m(static_cast<Index>(i), static_cast<Index>(j));
  return g;
}

Matrix to_matrix(const Grid& g) {
  Matrix m(static_cast<Index>(g.size()), static_cast<Index>(g.empty() ? 0 : g[0].size()));
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = g[i][j];
  return m;
}

// y[t][o] = b[o] + sum_i x[t][i] * w[i][o]
Grid linear(const Grid& x, const Matrix& w, const Matrix& b) {
  Grid y = grid(x.size(), static_cast<std::size_t>(w.cols()));
  for (std::size_t t = 0; t < x.size(); ++t)
    for (Index o = 0; o < w.cols(); ++o) {
      double s = b(0, o);
      for (Index i = 0; i < w.rows(); ++i) s += x[t][static_cast<std::size_t>(i)] * w(i, o);
      y[t][static_cast<std::size_t>(o)] = s;
    }
  return y;
}

Grid add(const Grid& a, const Grid& b) {
  Grid c = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) c[i][j] += b[i][j];
  return c;
}

Grid layer_norm(const Grid& x, const Matrix& gain, const Matrix& bias) {
  Grid y = x;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double n = static_cast<double>(x[t].size());
    double mean = 0;
    for (double v : x[t]) mean += v;
    mean /= n;
    double var = 0;
    for (double v : x[t]) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t j = 0; j < x[t].size(); ++j)
      y[t][j] = (x[t][j] - mean) / std::sqrt(var + 1e-5) * gain(0, static_cast<Index>(j)) + bias(0, static_cast<Index>(j));
  }
  return y;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Grid encoder(const ModelParams& p, const Matrix& input) {
  const std::size_t len = static_cast<std::size_t>(input.rows());
  const std::size_t hidden = static_cast<std::size_t>(p.config.hidden_dim);
  const std::size_t heads = static_cast<std::size_t>(p.config.n_heads);
  const std::size_t hd = hidden / heads;

  Grid h = linear(from(input), p.w_in, p.b_in);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t j = 0; j < hidden; ++j) h[t][j] += p.pos(static_cast<Index>(t), static_cast<Index>(j));

  for (const auto& b : p.blocks) {
    const Grid q = linear(h, b.wq, b.bq), k = linear(h, b.wk, b.bk), v = linear(h, b.wv, b.bv);
    Grid ctx = grid(len, hidden);
    for (std::size_t head = 0; head < heads; ++head) {
      for (std::size_t t = 0; t < len; ++t) {
        std::vector<double> score(len);
        double mx = -1e300;
        for (std::size_t s = 0; s < len; ++s) {
          double dot = 0;
          for (std::size_t j = head * hd; j < (head + 1) * hd; ++j) dot += q[t][j] * k[s][j];
          score[s] = dot / std::sqrt(static_cast<double>(hd));
          mx = std::max(mx, score[s]);
        }
        double z = 0;
        for (auto& s : score) z += (s = std::exp(s - mx));
        for (std::size_t s = 0; s < len; ++s)
          for (std::size_t j = head * hd; j < (head + 1) * hd; ++j) ctx[t][j] += score[s] / z * v[s][j];
      }
    }
    const Grid a = layer_norm(add(h, linear(ctx, b.wo, b.bo)), b.ln1_gain, b.ln1_bias);
    Grid f = linear(a, b.w_ff1, b.b_ff1);
    for (auto& row : f)
      for (auto& x : row) x = 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
    h = layer_norm(add(a, linear(f, b.w_ff2, b.b_ff2)), b.ln2_gain, b.ln2_bias);
  }
  return h;
}

}  // namespace

Matrix reconstruct(const ModelParams& p, const Matrix& input) {
  return to_matrix(linear(encoder(p, input), p.w_rec, p.b_rec));
}

Vector classify(const ModelParams& p, const Matrix& input) {
  const Grid hs = encoder(p, input);
  const std::size_t g = static_cast<std::size_t>(p.config.gru_dim);
  const Grid xz = linear(hs, p.gru_wz, p.gru_bz), xr = linear(hs, p.gru_wr, p.gru_br), xn = linear(hs, p.gru_wn, p.gru_bn);
  std::vector<double> h(g, 0.0), pooled(g, 0.0);
  for (std::size_t t = 0; t < hs.size(); ++t) {
    std::vector<double> next(g);
    for (std::size_t j = 0; j < g; ++j) {
      double az = xz[t][j], ar = xr[t][j], un = p.gru_bun(0, static_cast<Index>(j));
      for (std::size_t i = 0; i < g; ++i) {
        az += h[i] * p.gru_uz(static_cast<Index>(i), static_cast<Index>(j));
        ar += h[i] * p.gru_ur(static_cast<Index>(i), static_cast<Index>(j));
        un += h[i] * p.gru_un(static_cast<Index>(i), static_cast<Index>(j));
      }
      const double z = sigmoid(az), r = sigmoid(ar);
      const double n = std::tanh(xn[t][j] + r * un);
      next[j] = (1.0 - z) * n + z * h[j];
    }
    h = next;
    for (std::size_t j = 0; j < g; ++j) pooled[j] += h[j] / static_cast<double>(hs.size());
  }
  const Index k = p.w_cls.cols();
  Vector logits(k);
  for (Index c = 0; c < k; ++c) {
    logits(c) = p.b_cls(0, c);
    for (std::size_t j = 0; j < g; ++j) logits(c) += pooled[j] * p.w_cls(static_cast<Index>(j), c);
  }
  const double mx = logits.maxCoeff();
  double z = 0;
  for (Index c = 0; c < k; ++c) z += std::exp(logits(c) - mx);
  Vector probs(k);
  for (Index c = 0; c < k; ++c) probs(c) = std::exp(logits(c) - mx) / z;
  return probs;
}

}  // namespace saga::reference
