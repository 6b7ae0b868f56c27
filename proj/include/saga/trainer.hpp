#pragma once

#include "saga/masking.hpp"
#include "saga/nets.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace saga {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

enum class SelectionMetric { Accuracy, MacroF1 };

struct TrainConfig {
  double lr = 1e-3;
  int epochs_pretrain = 50;
  int epochs_finetune = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;
  AdamConfig adam;
  MaskConfig mask;
  int keypoint_radius = 5;
  int keypoint_separation = 10;
  bool fixed_masks = false;  // reuse epoch-0 masks every epoch
  std::array<bool, 4> active_levels{true, true, true, true};
  SelectionMetric selection = SelectionMetric::Accuracy;
};

void validate(const TrainConfig& cfg);

class Adam {
 public:
  Adam(const ModelParams& like, AdamConfig cfg);
  void step(ModelParams& params, const ModelParams& grads, double lr);
  long long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  ModelParams m_, v_;
  long long t_ = 0;
};

struct EpochLoss {
  int epoch = 0;
  std::array<double, 4> level{};  // indexed by MaskLevel
  double total = 0.0;
};

struct PretrainResult {
  ModelParams params;
  std::vector<EpochLoss> trace;
  long long steps = 0;
};

/// Per-window semantics for masking, computed once per dataset.
std::vector<WindowSemantics> analyze_windows(const WindowList& windows, const ChannelLayout& layout,
                                             const TrainConfig& cfg);

struct BatchGradient {
  ModelParams grads;
  std::array<double, 4> level_loss{};  // batch means
  double total = 0.0;
};

/// Gradient of the batch-mean weighted reconstruction loss. Levels with zero
/// weight are evaluated for the loss report but skip the backward pass.
BatchGradient pretrain_batch_gradient(const ModelParams& params, const WindowList& windows,
                                      const std::vector<WindowSemantics>& semantics,
                                      const std::vector<std::size_t>& batch, const LossWeights& w,
                                      const TrainConfig& cfg, int epoch);

/// Masked-reconstruction pre-training with four mask levels per window.
PretrainResult pretrain(const WindowList& unlabelled, const ChannelLayout& layout, const LossWeights& w,
                        const EncoderConfig& model, const TrainConfig& cfg,
                        const std::function<void(const EpochLoss&)>& on_epoch = {});

struct ClassMetrics {
  int label = 0;
  std::size_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// per_class lists only classes present in the ground truth; macro_f1 is the
/// mean of their f1.
struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
};

Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth);

int predict(const ModelParams& params, const Matrix& window);
Metrics evaluate(const ModelParams& params, const WindowList& test);

struct FinetuneEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  Metrics valid;
};

struct FinetuneResult {
  ModelParams params;
  Metrics metrics;
  int best_epoch = 0;
  std::vector<FinetuneEpoch> log;
};

/// Replaces the classifier head and trains every parameter with cross-entropy.
/// Returns the parameters and validation metrics of the best epoch.
FinetuneResult finetune(const ModelParams& backbone, const WindowList& labelled, const WindowList& valid,
                        const TrainConfig& cfg, int n_classes = 0,
                        const std::function<void(const FinetuneEpoch&)>& on_epoch = {});

/// Number of classes implied by labels 0..K-1; throws when labels are missing
/// or fewer than two classes appear.
int class_count(const WindowList& labelled);

}  // namespace saga
