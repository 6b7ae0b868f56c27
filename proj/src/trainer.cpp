#include "saga/trainer.hpp"

#include "saga/errors.hpp"
#include "saga/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace saga {

namespace {

enum SeedTag : std::uint64_t { kShuffleTag = 1, kMaskTag = 2, kHeadTag = 3 };

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {kShuffleTag, static_cast<std::uint64_t>(epoch)}));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

double selection_value(const Metrics& m, SelectionMetric s) {
  return s == SelectionMetric::Accuracy ? m.accuracy : m.macro_f1;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ValidationError("train config: lr must be positive");
  if (cfg.epochs_pretrain < 1) throw ValidationError("train config: epochs_pretrain must be >= 1");
  // zero fine-tuning epochs evaluates the backbone with a fresh head
  if (cfg.epochs_finetune < 0) throw ValidationError("train config: epochs_finetune must be >= 0");
  if (cfg.batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (cfg.keypoint_radius < 1 || cfg.keypoint_separation < 1)
    throw ValidationError("train config: key-point radius and separation must be positive");
}

Adam::Adam(const ModelParams& like, AdamConfig cfg) : cfg_(cfg), m_(like), v_(like) {
  m_.set_zero();
  v_.set_zero();
}

void Adam::step(ModelParams& params, const ModelParams& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for_each_tensor(
      [&](const std::string&, Matrix& p, const Matrix& g, Matrix& m, Matrix& v) {
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseAbs2();
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
      },
      params, grads, m_, v_);
}

std::vector<WindowSemantics> analyze_windows(const WindowList& windows, const ChannelLayout& layout,
                                             const TrainConfig& cfg) {
  std::vector<WindowSemantics> out;
  out.reserve(windows.size());
  for (const auto& w : windows)
    out.push_back(analyze_window(w.values, layout, cfg.keypoint_radius, cfg.keypoint_separation));
  return out;
}

BatchGradient pretrain_batch_gradient(const ModelParams& params, const WindowList& windows,
                                      const std::vector<WindowSemantics>& semantics,
                                      const std::vector<std::size_t>& batch, const LossWeights& w,
                                      const TrainConfig& cfg, int epoch) {
  BatchGradient out{ModelParams(params), {}, 0.0};
  out.grads.set_zero();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const auto mask_epoch = static_cast<std::uint64_t>(cfg.fixed_masks ? 0 : epoch);
  ReconstructTape tape;
  for (std::size_t idx : batch) {
    const Matrix& original = windows[idx].values;
    for (auto level : kMaskLevels) {
      const auto li = static_cast<std::size_t>(level);
      if (!cfg.active_levels[li]) continue;
      const auto seed = derive_seed(cfg.seed, {kMaskTag, mask_epoch, idx, li});
      const auto masked = mask_level(level, original, semantics[idx], cfg.mask, seed);
      const Matrix pred = forward_reconstruct(params, masked.values, tape);
      const double loss = masked_mse(pred, original, masked.spec);
      out.level_loss[li] += loss * inv_batch;
      const double weight = w[level];
      if (weight == 0.0) continue;
      backward_reconstruct(params, tape, (weight * inv_batch) * masked_mse_grad(pred, original, masked.spec),
                           out.grads);
    }
  }
  out.total = weighted_loss(out.level_loss[0], out.level_loss[1], out.level_loss[2], out.level_loss[3], w);
  return out;
}

PretrainResult pretrain(const WindowList& unlabelled, const ChannelLayout& layout, const LossWeights& w,
                        const EncoderConfig& model, const TrainConfig& cfg,
                        const std::function<void(const EpochLoss&)>& on_epoch) {
  validate(cfg);
  validate(w);
  if (unlabelled.empty()) throw InsufficientDataError("pretrain: no windows");
  validate(cfg.mask, unlabelled.front().values.rows(), unlabelled.front().values.cols());

  PretrainResult result{ModelParams::random(model, cfg.seed), {}, 0};
  const auto semantics = analyze_windows(unlabelled, layout, cfg);
  Adam adam(result.params, cfg.adam);
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs_pretrain; ++epoch) {
    const auto order = epoch_order(unlabelled.size(), cfg.seed, epoch);
    EpochLoss record;
    record.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(
                                                               std::min(order.size(), start + batch_size)));
      auto g = pretrain_batch_gradient(result.params, unlabelled, semantics, batch, w, cfg, epoch);
      if (!std::isfinite(g.total))
        throw NumericalError("pretrain diverged at epoch " + std::to_string(epoch) + " (loss is not finite)");
      const double share = static_cast<double>(batch.size()) / static_cast<double>(order.size());
      for (std::size_t l = 0; l < 4; ++l) record.level[l] += g.level_loss[l] * share;
      record.total += g.total * share;
      adam.step(result.params, g.grads, cfg.lr);
    }
    result.trace.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  result.steps = adam.steps();
  return result;
}

Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw ValidationError("compute_metrics: size mismatch");
  if (truth.empty()) throw InsufficientDataError("compute_metrics: empty test set");
  Metrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i] ? 1 : 0;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

  const std::set<int> classes(truth.begin(), truth.end());
  double f1_sum = 0.0;
  for (int c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = predicted[i] == c, t = truth[i] == c;
      tp += (p && t) ? 1 : 0;
      fp += (p && !t) ? 1 : 0;
      fn += (!p && t) ? 1 : 0;
    }
    ClassMetrics cm;
    cm.label = c;
    cm.support = tp + fn;
    cm.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    cm.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double denom = cm.precision + cm.recall;
    cm.f1 = denom == 0.0 ? 0.0 : 2.0 * cm.precision * cm.recall / denom;
    f1_sum += cm.f1;
    m.per_class.push_back(cm);
  }
  m.macro_f1 = f1_sum / static_cast<double>(m.per_class.size());
  return m;
}

int predict(const ModelParams& params, const Matrix& window) {
  const Vector probs = forward_classify(params, window);
  Index best = 0;
  probs.maxCoeff(&best);
  return static_cast<int>(best);
}

Metrics evaluate(const ModelParams& params, const WindowList& test) {
  if (test.empty()) throw InsufficientDataError("evaluate: empty test set");
  std::vector<int> predicted, truth;
  for (const auto& w : test) {
    if (!w.label) throw ValidationError("evaluate: test window without a label");
    predicted.push_back(predict(params, w.values));
    truth.push_back(*w.label);
  }
  return compute_metrics(predicted, truth);
}

int class_count(const WindowList& labelled) {
  std::set<int> classes;
  for (const auto& w : labelled) {
    if (!w.label) throw ValidationError("finetune: training window without a label");
    if (*w.label < 0) throw ValidationError("finetune: negative label");
    classes.insert(*w.label);
  }
  if (classes.size() < 2) throw ValidationError("finetune: degenerate task, fewer than two classes");
  return *classes.rbegin() + 1;
}

FinetuneResult finetune(const ModelParams& backbone, const WindowList& labelled, const WindowList& valid,
                        const TrainConfig& cfg, int n_classes,
                        const std::function<void(const FinetuneEpoch&)>& on_epoch) {
  validate(cfg);
  if (labelled.empty()) throw InsufficientDataError("finetune: no labelled windows");
  if (valid.empty()) throw InsufficientDataError("finetune: no validation windows");
  const int k = std::max(n_classes, class_count(labelled));

  ModelParams params = backbone;
  reset_classifier_head(params, k, derive_seed(cfg.seed, {kHeadTag}));
  Adam adam(params, cfg.adam);
  ModelParams grads = params;

  FinetuneResult result{params, evaluate(params, valid), 0, {}};
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  ClassifyTape tape;
  for (int epoch = 1; epoch <= cfg.epochs_finetune; ++epoch) {
    const auto order = epoch_order(labelled.size(), cfg.seed, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      grads.set_zero();
      for (std::size_t i = start; i < end; ++i) {
        const auto& w = labelled[order[i]];
        const Vector probs = forward_classify(params, w.values, tape);
        epoch_loss += cross_entropy(probs, *w.label);
        backward_classify(params, tape, inv_batch * cross_entropy_logit_grad(probs, *w.label), grads);
      }
      adam.step(params, grads, cfg.lr);
    }
    if (!std::isfinite(epoch_loss))
      throw NumericalError("finetune diverged at epoch " + std::to_string(epoch) + " (loss is not finite)");

    FinetuneEpoch rec{epoch, epoch_loss / static_cast<double>(labelled.size()), evaluate(params, valid)};
    if (epoch == 1 || selection_value(rec.valid, cfg.selection) > selection_value(result.metrics, cfg.selection)) {
      result.params = params;
      result.metrics = rec.valid;
      result.best_epoch = epoch;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace saga
