#pragma once

#include "saga/masking.hpp"
#include "saga/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace saga {

/// Shape of the encoder + heads.
struct EncoderConfig {
  int input_dim = 6;    // D
  int max_len = 120;    // L_win
  int hidden_dim = 32;
  int n_blocks = 2;
  int n_heads = 4;
  int ff_dim = 64;
  int gru_dim = 16;
  int n_classes = 4;
};

void validate(const EncoderConfig& cfg);

struct BlockParams {
  Matrix wq, wk, wv, wo;  // H x H
  Matrix bq, bk, bv, bo;  // 1 x H
  Matrix ln1_gain, ln1_bias;
  Matrix w_ff1, b_ff1;  // H x F, 1 x F
  Matrix w_ff2, b_ff2;  // F x H, 1 x H
  Matrix ln2_gain, ln2_bias;
};

/// Every trainable tensor. Gradients and optimizer moments reuse this type.
struct ModelParams {
  EncoderConfig config;
  Matrix w_in, b_in;  // D x H, 1 x H
  Matrix pos;         // L x H
  std::vector<BlockParams> blocks;
  Matrix w_rec, b_rec;  // H x D, 1 x D
  // GRU classifier over encoder states
  Matrix gru_wz, gru_wr, gru_wn;  // H x G
  Matrix gru_uz, gru_ur, gru_un;  // G x G
  Matrix gru_bz, gru_br, gru_bn, gru_bun;  // 1 x G
  Matrix w_cls, b_cls;  // G x K, 1 x K

  static ModelParams zeros(const EncoderConfig& cfg);
  static ModelParams random(const EncoderConfig& cfg, std::uint64_t seed);

  void set_zero();
  std::size_t parameter_count() const;
};

/// Visits same-named tensors of several parameter sets in lockstep:
/// f(name, a.t, b.t, ...). All sets must share one config.
template <typename F, typename First, typename... Rest>
void for_each_tensor(F&& f, First& first, Rest&... rest) {
  f("w_in", first.w_in, rest.w_in...);
  f("b_in", first.b_in, rest.b_in...);
  f("pos", first.pos, rest.pos...);
  for (std::size_t b = 0; b < first.blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    f(p + "wq", first.blocks[b].wq, rest.blocks[b].wq...);
    f(p + "wk", first.blocks[b].wk, rest.blocks[b].wk...);
    f(p + "wv", first.blocks[b].wv, rest.blocks[b].wv...);
    f(p + "wo", first.blocks[b].wo, rest.blocks[b].wo...);
    f(p + "bq", first.blocks[b].bq, rest.blocks[b].bq...);
    f(p + "bk", first.blocks[b].bk, rest.blocks[b].bk...);
    f(p + "bv", first.blocks[b].bv, rest.blocks[b].bv...);
    f(p + "bo", first.blocks[b].bo, rest.blocks[b].bo...);
    f(p + "ln1_gain", first.blocks[b].ln1_gain, rest.blocks[b].ln1_gain...);
    f(p + "ln1_bias", first.blocks[b].ln1_bias, rest.blocks[b].ln1_bias...);
    f(p + "w_ff1", first.blocks[b].w_ff1, rest.blocks[b].w_ff1...);
    f(p + "b_ff1", first.blocks[b].b_ff1, rest.blocks[b].b_ff1...);
    f(p + "w_ff2", first.blocks[b].w_ff2, rest.blocks[b].w_ff2...);
    f(p + "b_ff2", first.blocks[b].b_ff2, rest.blocks[b].b_ff2...);
    f(p + "ln2_gain", first.blocks[b].ln2_gain, rest.blocks[b].ln2_gain...);
    f(p + "ln2_bias", first.blocks[b].ln2_bias, rest.blocks[b].ln2_bias...);
  }
  f("w_rec", first.w_rec, rest.w_rec...);
  f("b_rec", first.b_rec, rest.b_rec...);
  f("gru_wz", first.gru_wz, rest.gru_wz...);
  f("gru_wr", first.gru_wr, rest.gru_wr...);
  f("gru_wn", first.gru_wn, rest.gru_wn...);
  f("gru_uz", first.gru_uz, rest.gru_uz...);
  f("gru_ur", first.gru_ur, rest.gru_ur...);
  f("gru_un", first.gru_un, rest.gru_un...);
  f("gru_bz", first.gru_bz, rest.gru_bz...);
  f("gru_br", first.gru_br, rest.gru_br...);
  f("gru_bn", first.gru_bn, rest.gru_bn...);
  f("gru_bun", first.gru_bun, rest.gru_bun...);
  f("w_cls", first.w_cls, rest.w_cls...);
  f("b_cls", first.b_cls, rest.b_cls...);
}

/// Fresh classifier head (GRU + linear), encoder untouched.
void reset_classifier_head(ModelParams& params, int n_classes, std::uint64_t seed);

/// Values recorded by a forward pass and consumed by the matching backward pass.
struct EncoderTape {
  struct Block {
    Matrix input;                 // L x H
    Matrix q, k, v;               // L x H
    std::vector<Matrix> attn;     // per head L x L (softmax rows)
    Matrix context;               // L x H, heads concatenated
    Matrix ln1_xhat, ln1_out;     // L x H
    Vector ln1_inv_std;
    Matrix ff_pre;                // L x F
    Matrix ff_act;                // L x F
    Matrix ln2_xhat, ln2_out;
    Vector ln2_inv_std;
  };
  Matrix input;  // L x D
  std::vector<Block> blocks;
  Matrix output;  // L x H
};

struct ReconstructTape {
  EncoderTape encoder;
  Matrix prediction;  // L x D
};

struct ClassifyTape {
  EncoderTape encoder;
  Matrix z, r, n, hidden, u_n;  // GRU gates per step, hidden rows 0..L (row 0 = initial state)
  Vector pooled;
  Vector logits;
  Vector probs;
};

Matrix forward_reconstruct(const ModelParams& params, const Matrix& masked);
Matrix forward_reconstruct(const ModelParams& params, const Matrix& masked, ReconstructTape& tape);

Vector forward_classify(const ModelParams& params, const Matrix& window);
Vector forward_classify(const ModelParams& params, const Matrix& window, ClassifyTape& tape);

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(prediction).
void backward_reconstruct(const ModelParams& params, const ReconstructTape& tape, const Matrix& d_prediction,
                          ModelParams& grads);

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
void backward_classify(const ModelParams& params, const ClassifyTape& tape, const Vector& d_logits,
                       ModelParams& grads);

/// Mean squared error over the masked cells only. An empty mask gives 0 and
/// bumps the counter returned by empty_mask_count().
double masked_mse(const Matrix& pred, const Matrix& original, const MaskSpec& spec);
Matrix masked_mse_grad(const Matrix& pred, const Matrix& original, const MaskSpec& spec);
std::uint64_t empty_mask_count();

struct LossWeights {
  double w_se = 0.25, w_po = 0.25, w_sp = 0.25, w_pe = 0.25;

  double operator[](MaskLevel level) const;
  double sum() const { return w_se + w_po + w_sp + w_pe; }
};

void validate(const LossWeights& w);

/// w_se*l_se + w_po*l_po + w_sp*l_sp + w_pe*l_pe.
double weighted_loss(double l_se, double l_po, double l_sp, double l_pe, const LossWeights& w);

/// -log probs[label], clamped at 1e-12 (clamps are counted).
double cross_entropy(const Vector& probs, int label);
/// Mean of cross_entropy over a batch.
double cross_entropy(const std::vector<Vector>& probs, const std::vector<int>& labels);
std::uint64_t clamped_probability_count();

/// Gradient of cross_entropy with respect to the logits that produced `probs`.
Vector cross_entropy_logit_grad(const Vector& probs, int label);

Vector softmax(const Vector& logits);

}  // namespace saga
