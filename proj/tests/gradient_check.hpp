#pragma once

// Central-difference check of the hand-written backward passes, shared by the
// unit tests and the acceptance binary.

#include "saga/masking.hpp"
#include "saga/nets.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace saga::gradcheck {

struct GradientCheck {
  double max_rel_error = 0.0;
  std::string worst_tensor;
};

// |a - n| / max(|a|, |n|, floor); the floor keeps exactly-zero gradients
// (e.g. the key bias, which softmax cancels) from dividing rounding noise by 0.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

template <typename Loss>
void compare(ModelParams& probe, const ModelParams& base, const ModelParams& grads, Loss&& loss, double h,
             GradientCheck& out) {
  for_each_tensor(
      [&](const std::string& name, Matrix& q, const Matrix& p, const Matrix& g) {
        for (Index i = 0; i < q.size(); ++i) {
          q.data()[i] = p.data()[i] + h;
          const double up = loss(probe);
          q.data()[i] = p.data()[i] - h;
          const double down = loss(probe);
          q.data()[i] = p.data()[i];
          const double err = relative_error(g.data()[i], (up - down) / (2.0 * h));
          if (err > out.max_rel_error) {
            out.max_rel_error = err;
            out.worst_tensor = name;
          }
        }
      },
      probe, base, grads);
}

/// Checks the masked-reconstruction loss (all four levels, weighted) and the
/// classification cross-entropy for one random parameter draw.
inline GradientCheck check_gradients(const EncoderConfig& cfg, std::uint64_t seed, double h = 1e-5) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  ModelParams params = ModelParams::random(cfg, seed);
  // perturb every tensor so biases and gains are not at their special init values
  for_each_tensor([&](const std::string&, Matrix& t) { t += 0.1 * Matrix::NullaryExpr(t.rows(), t.cols(), [&] { return nd(rng); }); },
                  params);
  const Matrix x = Matrix::NullaryExpr(cfg.max_len, cfg.input_dim, [&] { return nd(rng); });
  const LossWeights w{0.1, 0.2, 0.3, 0.4};

  std::vector<MaskedWindow> masks;
  masks.push_back(apply_mask(x, sensor_mask_spec(x.rows(), x.cols(), {1})));
  const Index half = x.rows() / 2;
  masks.push_back(apply_mask(x, row_mask_spec(MaskLevel::Point, x.rows(), x.cols(), 1, 3)));
  masks.push_back(apply_mask(x, row_mask_spec(MaskLevel::Subperiod, x.rows(), x.cols(), 3, half + 1)));
  masks.push_back(apply_mask(x, row_mask_spec(MaskLevel::Period, x.rows(), x.cols(), half, x.rows())));

  auto reconstruction_loss = [&](const ModelParams& p) {
    double total = 0;
    for (const auto& m : masks) total += w[m.spec.level] * masked_mse(forward_reconstruct(p, m.values), x, m.spec);
    return total;
  };
  const int label = static_cast<int>(seed % static_cast<std::uint64_t>(cfg.n_classes));
  auto classification_loss = [&](const ModelParams& p) { return cross_entropy(forward_classify(p, x), label); };

  ModelParams g_rec = ModelParams::zeros(cfg), g_cls = ModelParams::zeros(cfg);
  for (const auto& m : masks) {
    ReconstructTape tape;
    const Matrix pred = forward_reconstruct(params, m.values, tape);
    backward_reconstruct(params, tape, w[m.spec.level] * masked_mse_grad(pred, x, m.spec), g_rec);
  }
  {
    ClassifyTape tape;
    const Vector probs = forward_classify(params, x, tape);
    backward_classify(params, tape, cross_entropy_logit_grad(probs, label), g_cls);
  }

  GradientCheck out;
  ModelParams probe = params;
  compare(probe, params, g_rec, reconstruction_loss, h, out);
  compare(probe, params, g_cls, classification_loss, h, out);
  return out;
}

}  // namespace saga::gradcheck
