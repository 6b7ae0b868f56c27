#include "saga/nets.hpp"

#include "saga/errors.hpp"
#include "saga/random.hpp"

#include <atomic>
#include <cmath>

namespace saga {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

std::atomic<std::uint64_t> g_empty_masks{0};
std::atomic<std::uint64_t> g_clamped_probs{0};

void check_finite(const Matrix& m, const char* op) {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite value produced by ") + op);
}

void check_finite(const Vector& v, const char* op) {
  if (!v.allFinite()) throw NumericalError(std::string("non-finite value produced by ") + op);
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_grad(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void softmax_rows(Matrix& s) {
  for (Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp().matrix();
    s.row(r) /= s.row(r).sum();
  }
}

/// Row-wise layer norm: out = xhat * gain + bias.
void layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, Matrix& xhat, Vector& inv_std, Matrix& out) {
  const auto n = static_cast<double>(x.cols());
  xhat.resize(x.rows(), x.cols());
  inv_std.resize(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().sum() / n;
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  out = xhat.array().rowwise() * gain.row(0).array();
  out.rowwise() += bias.row(0);
}

Matrix layer_norm_backward(const Matrix& d_out, const Matrix& xhat, const Vector& inv_std, const Matrix& gain,
                           Matrix& d_gain, Matrix& d_bias) {
  d_gain.row(0) += (d_out.array() * xhat.array()).colwise().sum().matrix();
  d_bias.row(0) += d_out.colwise().sum();
  const Matrix d_xhat = d_out.array().rowwise() * gain.row(0).array();
  const auto n = static_cast<double>(xhat.cols());
  Matrix dx(xhat.rows(), xhat.cols());
  for (Index r = 0; r < xhat.rows(); ++r) {
    const double s1 = d_xhat.row(r).sum();
    const double s2 = d_xhat.row(r).dot(xhat.row(r));
    dx.row(r) = (inv_std(r) / n) * (n * d_xhat.row(r).array() - s1 - xhat.row(r).array() * s2).matrix();
  }
  return dx;
}

void accumulate_affine(const Matrix& x, const Matrix& dy, Matrix& dw, Matrix& db) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
}

Matrix encode(const ModelParams& p, const Matrix& input, EncoderTape& tape) {
  const auto& cfg = p.config;
  if (input.cols() != cfg.input_dim || input.rows() < 1 || input.rows() > cfg.max_len)
    throw ValidationError("encoder: input of shape " + std::to_string(input.rows()) + "x" +
                          std::to_string(input.cols()) + " does not fit the model config");
  const Index len = input.rows();
  const Index head_dim = cfg.hidden_dim / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  tape.input = input;
  Matrix h = affine(input, p.w_in, p.b_in) + p.pos.topRows(len);
  check_finite(h, "input embedding");

  tape.blocks.resize(p.blocks.size());
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    const auto& bp = p.blocks[b];
    auto& t = tape.blocks[b];
    t.input = h;
    t.q = affine(h, bp.wq, bp.bq);
    t.k = affine(h, bp.wk, bp.bk);
    t.v = affine(h, bp.wv, bp.bv);
    t.attn.resize(static_cast<std::size_t>(cfg.n_heads));
    t.context.resize(len, cfg.hidden_dim);
    for (Index hd = 0; hd < cfg.n_heads; ++hd) {
      Matrix s = scale * t.q.middleCols(hd * head_dim, head_dim) * t.k.middleCols(hd * head_dim, head_dim).transpose();
      softmax_rows(s);
      t.context.middleCols(hd * head_dim, head_dim) = s * t.v.middleCols(hd * head_dim, head_dim);
      t.attn[static_cast<std::size_t>(hd)] = std::move(s);
    }
    check_finite(t.context, "self-attention");
    const Matrix s1 = h + affine(t.context, bp.wo, bp.bo);
    layer_norm(s1, bp.ln1_gain, bp.ln1_bias, t.ln1_xhat, t.ln1_inv_std, t.ln1_out);
    check_finite(t.ln1_out, "attention layer norm");

    t.ff_pre = affine(t.ln1_out, bp.w_ff1, bp.b_ff1);
    t.ff_act = t.ff_pre.unaryExpr([](double x) { return gelu(x); });
    const Matrix s2 = t.ln1_out + affine(t.ff_act, bp.w_ff2, bp.b_ff2);
    check_finite(s2, "feed-forward");
    layer_norm(s2, bp.ln2_gain, bp.ln2_bias, t.ln2_xhat, t.ln2_inv_std, t.ln2_out);
    check_finite(t.ln2_out, "feed-forward layer norm");
    h = t.ln2_out;
  }
  tape.output = h;
  return h;
}

void encode_backward(const ModelParams& p, const EncoderTape& tape, Matrix d_h, ModelParams& g) {
  const auto& cfg = p.config;
  const Index head_dim = cfg.hidden_dim / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  for (std::size_t bi = p.blocks.size(); bi-- > 0;) {
    const auto& bp = p.blocks[bi];
    auto& gb = g.blocks[bi];
    const auto& t = tape.blocks[bi];

    const Matrix d_s2 = layer_norm_backward(d_h, t.ln2_xhat, t.ln2_inv_std, bp.ln2_gain, gb.ln2_gain, gb.ln2_bias);
    accumulate_affine(t.ff_act, d_s2, gb.w_ff2, gb.b_ff2);
    Matrix d_ff_pre = d_s2 * bp.w_ff2.transpose();
    d_ff_pre.array() *= t.ff_pre.unaryExpr([](double x) { return gelu_grad(x); }).array();
    accumulate_affine(t.ln1_out, d_ff_pre, gb.w_ff1, gb.b_ff1);
    const Matrix d_ln1 = d_s2 + d_ff_pre * bp.w_ff1.transpose();
    check_finite(d_ln1, "feed-forward backward");

    const Matrix d_s1 = layer_norm_backward(d_ln1, t.ln1_xhat, t.ln1_inv_std, bp.ln1_gain, gb.ln1_gain, gb.ln1_bias);
    accumulate_affine(t.context, d_s1, gb.wo, gb.bo);
    const Matrix d_context = d_s1 * bp.wo.transpose();

    Matrix d_q(t.q.rows(), t.q.cols()), d_k(t.k.rows(), t.k.cols()), d_v(t.v.rows(), t.v.cols());
    for (Index hd = 0; hd < cfg.n_heads; ++hd) {
      const Matrix& a = t.attn[static_cast<std::size_t>(hd)];
      const auto d_c = d_context.middleCols(hd * head_dim, head_dim);
      const Matrix d_a = d_c * t.v.middleCols(hd * head_dim, head_dim).transpose();
      d_v.middleCols(hd * head_dim, head_dim) = a.transpose() * d_c;
      const Vector row_dot = (d_a.array() * a.array()).rowwise().sum();
      const Matrix d_s = (a.array() * (d_a.colwise() - row_dot).array()).matrix() * scale;
      d_q.middleCols(hd * head_dim, head_dim) = d_s * t.k.middleCols(hd * head_dim, head_dim);
      d_k.middleCols(hd * head_dim, head_dim) = d_s.transpose() * t.q.middleCols(hd * head_dim, head_dim);
    }
    accumulate_affine(t.input, d_q, gb.wq, gb.bq);
    accumulate_affine(t.input, d_k, gb.wk, gb.bk);
    accumulate_affine(t.input, d_v, gb.wv, gb.bv);
    d_h = d_s1 + d_q * bp.wq.transpose() + d_k * bp.wk.transpose() + d_v * bp.wv.transpose();
    check_finite(d_h, "self-attention backward");
  }
  accumulate_affine(tape.input, d_h, g.w_in, g.b_in);
  g.pos.topRows(d_h.rows()) += d_h;
}

Matrix xavier(Index rows, Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  return Matrix::NullaryExpr(rows, cols, [&]() { return u(rng); });
}

Matrix uniform(Index rows, Index cols, double a, Rng& rng) {
  std::uniform_real_distribution<double> u(-a, a);
  return Matrix::NullaryExpr(rows, cols, [&]() { return u(rng); });
}

}  // namespace

void validate(const EncoderConfig& cfg) {
  if (cfg.input_dim < 1 || cfg.max_len < 1 || cfg.hidden_dim < 1 || cfg.n_blocks < 1 || cfg.n_heads < 1 ||
      cfg.ff_dim < 1 || cfg.gru_dim < 1 || cfg.n_classes < 1)
    throw ValidationError("encoder config: all dimensions must be positive");
  if (cfg.hidden_dim % cfg.n_heads != 0) throw ValidationError("encoder config: hidden_dim must be divisible by n_heads");
}

ModelParams ModelParams::zeros(const EncoderConfig& cfg) {
  validate(cfg);
  const Index d = cfg.input_dim, h = cfg.hidden_dim, f = cfg.ff_dim, g = cfg.gru_dim, k = cfg.n_classes;
  ModelParams p;
  p.config = cfg;
  p.w_in = Matrix::Zero(d, h);
  p.b_in = Matrix::Zero(1, h);
  p.pos = Matrix::Zero(cfg.max_len, h);
  p.blocks.resize(static_cast<std::size_t>(cfg.n_blocks));
  for (auto& b : p.blocks) {
    b.wq = b.wk = b.wv = b.wo = Matrix::Zero(h, h);
    b.bq = b.bk = b.bv = b.bo = Matrix::Zero(1, h);
    b.ln1_gain = b.ln1_bias = b.ln2_gain = b.ln2_bias = Matrix::Zero(1, h);
    b.w_ff1 = Matrix::Zero(h, f);
    b.b_ff1 = Matrix::Zero(1, f);
    b.w_ff2 = Matrix::Zero(f, h);
    b.b_ff2 = Matrix::Zero(1, h);
  }
  p.w_rec = Matrix::Zero(h, d);
  p.b_rec = Matrix::Zero(1, d);
  p.gru_wz = p.gru_wr = p.gru_wn = Matrix::Zero(h, g);
  p.gru_uz = p.gru_ur = p.gru_un = Matrix::Zero(g, g);
  p.gru_bz = p.gru_br = p.gru_bn = p.gru_bun = Matrix::Zero(1, g);
  p.w_cls = Matrix::Zero(g, k);
  p.b_cls = Matrix::Zero(1, k);
  return p;
}

void reset_classifier_head(ModelParams& p, int n_classes, std::uint64_t seed) {
  if (n_classes < 1) throw ValidationError("classifier head needs at least one class");
  p.config.n_classes = n_classes;
  const Index h = p.config.hidden_dim, g = p.config.gru_dim;
  Rng rng(derive_seed(seed, {0xC1A55}));
  const double a = 1.0 / std::sqrt(static_cast<double>(g));
  p.gru_wz = uniform(h, g, a, rng);
  p.gru_wr = uniform(h, g, a, rng);
  p.gru_wn = uniform(h, g, a, rng);
  p.gru_uz = uniform(g, g, a, rng);
  p.gru_ur = uniform(g, g, a, rng);
  p.gru_un = uniform(g, g, a, rng);
  p.gru_bz = uniform(1, g, a, rng);
  p.gru_br = uniform(1, g, a, rng);
  p.gru_bn = uniform(1, g, a, rng);
  p.gru_bun = uniform(1, g, a, rng);
  p.w_cls = xavier(g, n_classes, rng);
  p.b_cls = Matrix::Zero(1, n_classes);
}

ModelParams ModelParams::random(const EncoderConfig& cfg, std::uint64_t seed) {
  ModelParams p = zeros(cfg);
  Rng rng(seed);
  const Index d = cfg.input_dim, h = cfg.hidden_dim, f = cfg.ff_dim;
  p.w_in = xavier(d, h, rng);
  // learned table, started from the usual sin/cos code
  for (Index t = 0; t < cfg.max_len; ++t)
    for (Index j = 0; j < h; ++j) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (j / 2)) / static_cast<double>(h));
      p.pos(t, j) = j % 2 == 0 ? std::sin(static_cast<double>(t) * freq) : std::cos(static_cast<double>(t) * freq);
    }
  for (auto& b : p.blocks) {
    b.wq = xavier(h, h, rng);
    b.wk = xavier(h, h, rng);
    b.wv = xavier(h, h, rng);
    b.wo = xavier(h, h, rng);
    b.ln1_gain.setOnes();
    b.ln2_gain.setOnes();
    b.w_ff1 = xavier(h, f, rng);
    b.w_ff2 = xavier(f, h, rng);
  }
  p.w_rec = xavier(h, d, rng);
  reset_classifier_head(p, cfg.n_classes, seed);
  return p;
}

void ModelParams::set_zero() {
  for_each_tensor([](const std::string&, Matrix& m) { m.setZero(); }, *this);
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); }, *this);
  return n;
}

Matrix forward_reconstruct(const ModelParams& params, const Matrix& masked, ReconstructTape& tape) {
  const Matrix h = encode(params, masked, tape.encoder);
  tape.prediction = affine(h, params.w_rec, params.b_rec);
  check_finite(tape.prediction, "reconstruction head");
  return tape.prediction;
}

Matrix forward_reconstruct(const ModelParams& params, const Matrix& masked) {
  ReconstructTape tape;
  return forward_reconstruct(params, masked, tape);
}

void backward_reconstruct(const ModelParams& params, const ReconstructTape& tape, const Matrix& d_prediction,
                          ModelParams& grads) {
  check_finite(d_prediction, "loss gradient");
  accumulate_affine(tape.encoder.output, d_prediction, grads.w_rec, grads.b_rec);
  encode_backward(params, tape.encoder, d_prediction * params.w_rec.transpose(), grads);
}

Vector softmax(const Vector& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

Vector forward_classify(const ModelParams& params, const Matrix& window, ClassifyTape& tape) {
  const Matrix hs = encode(params, window, tape.encoder);
  const Index len = hs.rows();
  const Index g = params.config.gru_dim;
  tape.z.resize(len, g);
  tape.r.resize(len, g);
  tape.n.resize(len, g);
  tape.u_n.resize(len, g);
  tape.hidden = Matrix::Zero(len + 1, g);

  const Matrix xz = affine(hs, params.gru_wz, params.gru_bz);
  const Matrix xr = affine(hs, params.gru_wr, params.gru_br);
  const Matrix xn = affine(hs, params.gru_wn, params.gru_bn);
  for (Index t = 0; t < len; ++t) {
    const Eigen::RowVectorXd h = tape.hidden.row(t);
    tape.z.row(t) = (xz.row(t) + h * params.gru_uz).unaryExpr([](double x) { return sigmoid(x); });
    tape.r.row(t) = (xr.row(t) + h * params.gru_ur).unaryExpr([](double x) { return sigmoid(x); });
    tape.u_n.row(t) = h * params.gru_un + params.gru_bun.row(0);
    tape.n.row(t) = (xn.row(t).array() + tape.r.row(t).array() * tape.u_n.row(t).array()).tanh().matrix();
    tape.hidden.row(t + 1) =
        ((1.0 - tape.z.row(t).array()) * tape.n.row(t).array() + tape.z.row(t).array() * h.array()).matrix();
  }
  check_finite(tape.hidden, "GRU classifier");
  tape.pooled = tape.hidden.bottomRows(len).colwise().mean().transpose();
  tape.logits = params.w_cls.transpose() * tape.pooled + params.b_cls.row(0).transpose();
  check_finite(tape.logits, "classifier logits");
  tape.probs = softmax(tape.logits);
  return tape.probs;
}

Vector forward_classify(const ModelParams& params, const Matrix& window) {
  ClassifyTape tape;
  return forward_classify(params, window, tape);
}

void backward_classify(const ModelParams& params, const ClassifyTape& tape, const Vector& d_logits,
                       ModelParams& grads) {
  check_finite(d_logits, "loss gradient");
  const Index len = tape.z.rows();
  const Index g = params.config.gru_dim;
  const Matrix& hs = tape.encoder.output;

  grads.w_cls.noalias() += tape.pooled * d_logits.transpose();
  grads.b_cls.row(0) += d_logits.transpose();
  const Eigen::RowVectorXd d_pooled = (params.w_cls * d_logits).transpose() / static_cast<double>(len);

  Matrix d_xz(len, g), d_xr(len, g), d_xn(len, g);
  Eigen::RowVectorXd d_next = Eigen::RowVectorXd::Zero(g);
  for (Index t = len; t-- > 0;) {
    const Eigen::RowVectorXd dh = d_next + d_pooled;
    const Eigen::RowVectorXd h_prev = tape.hidden.row(t);
    const auto z = tape.z.row(t).array();
    const auto r = tape.r.row(t).array();
    const auto n = tape.n.row(t).array();

    const Eigen::ArrayXXd dn_pre = dh.array() * (1.0 - z) * (1.0 - n.square());
    const Eigen::ArrayXXd dz_pre = dh.array() * (h_prev.array() - n) * z * (1.0 - z);
    const Eigen::ArrayXXd dr_pre = dn_pre * tape.u_n.row(t).array() * r * (1.0 - r);
    const Eigen::RowVectorXd d_un = (dn_pre * r).matrix();

    d_xn.row(t) = dn_pre.matrix();
    d_xz.row(t) = dz_pre.matrix();
    d_xr.row(t) = dr_pre.matrix();

    grads.gru_un.noalias() += h_prev.transpose() * d_un;
    grads.gru_bun.row(0) += d_un;
    grads.gru_uz.noalias() += h_prev.transpose() * dz_pre.matrix();
    grads.gru_ur.noalias() += h_prev.transpose() * dr_pre.matrix();

    d_next = (dh.array() * z).matrix() + d_un * params.gru_un.transpose() +
             dz_pre.matrix() * params.gru_uz.transpose() + dr_pre.matrix() * params.gru_ur.transpose();
  }
  accumulate_affine(hs, d_xz, grads.gru_wz, grads.gru_bz);
  accumulate_affine(hs, d_xr, grads.gru_wr, grads.gru_br);
  accumulate_affine(hs, d_xn, grads.gru_wn, grads.gru_bn);
  Matrix d_hs = d_xz * params.gru_wz.transpose() + d_xr * params.gru_wr.transpose() + d_xn * params.gru_wn.transpose();
  check_finite(d_hs, "GRU backward");
  encode_backward(params, tape.encoder, std::move(d_hs), grads);
}

double masked_mse(const Matrix& pred, const Matrix& original, const MaskSpec& spec) {
  if (pred.rows() != original.rows() || pred.cols() != original.cols())
    throw ValidationError("masked_mse: prediction and target shapes differ");
  if (spec.empty()) {
    g_empty_masks.fetch_add(1, std::memory_order_relaxed);
    return 0.0;
  }
  if (spec.level == MaskLevel::Sensor) {
    double s = 0.0;
    for (Index c : spec.columns) s += (pred.col(c) - original.col(c)).squaredNorm();
    return s / static_cast<double>(spec.cell_count());
  }
  const Index n = spec.row_end - spec.row_begin;
  return (pred.middleRows(spec.row_begin, n) - original.middleRows(spec.row_begin, n)).squaredNorm() /
         static_cast<double>(spec.cell_count());
}

Matrix masked_mse_grad(const Matrix& pred, const Matrix& original, const MaskSpec& spec) {
  Matrix g = Matrix::Zero(pred.rows(), pred.cols());
  if (spec.empty()) return g;
  const double scale = 2.0 / static_cast<double>(spec.cell_count());
  if (spec.level == MaskLevel::Sensor) {
    for (Index c : spec.columns) g.col(c) = scale * (pred.col(c) - original.col(c));
  } else {
    const Index n = spec.row_end - spec.row_begin;
    g.middleRows(spec.row_begin, n) = scale * (pred.middleRows(spec.row_begin, n) - original.middleRows(spec.row_begin, n));
  }
  return g;
}

std::uint64_t empty_mask_count() { return g_empty_masks.load(); }

double LossWeights::operator[](MaskLevel level) const {
  switch (level) {
    case MaskLevel::Sensor: return w_se;
    case MaskLevel::Point: return w_po;
    case MaskLevel::Subperiod: return w_sp;
    case MaskLevel::Period: return w_pe;
  }
  return 0.0;
}

void validate(const LossWeights& w) {
  if (w.w_se < 0 || w.w_po < 0 || w.w_sp < 0 || w.w_pe < 0) throw ValidationError("loss weights must be nonnegative");
  if (!(w.sum() > 0)) throw ValidationError("loss weights must not all be zero");
}

double weighted_loss(double l_se, double l_po, double l_sp, double l_pe, const LossWeights& w) {
  return w.w_se * l_se + w.w_po * l_po + w.w_sp * l_sp + w.w_pe * l_pe;
}

double cross_entropy(const Vector& probs, int label) {
  if (label < 0 || label >= probs.size()) throw ValidationError("cross_entropy: label out of range");
  double p = probs(label);
  if (p < 1e-12) {
    g_clamped_probs.fetch_add(1, std::memory_order_relaxed);
    p = 1e-12;
  }
  return -std::log(p);
}

double cross_entropy(const std::vector<Vector>& probs, const std::vector<int>& labels) {
  if (probs.size() != labels.size() || probs.empty())
    throw ValidationError("cross_entropy: batch sizes differ or batch is empty");
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) s += cross_entropy(probs[i], labels[i]);
  return s / static_cast<double>(probs.size());
}

std::uint64_t clamped_probability_count() { return g_clamped_probs.load(); }

Vector cross_entropy_logit_grad(const Vector& probs, int label) {
  Vector g = probs;
  g(label) -= 1.0;
  return g;
}

}  // namespace saga
