#pragma once

#include "saga/config.hpp"
#include "saga/imu_io.hpp"
#include "saga/masking.hpp"
#include "saga/nets.hpp"
#include "saga/synthetic.hpp"
#include "saga/trainer.hpp"
#include "saga/weight_search.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace saga {

/// Everything a pipeline command needs, parsed from one key=value file.
///
///     [data]     csv, schema, window, target_hz, split, seed, label_rate
///     [synth]    n_classes, windows_per_class, valid_per_class, test_per_class,
///                periods, noise, seed, window, label_rate
///     [mask]     n_axes, p_geo, l_max
///     [model]    hidden_dim, n_blocks, n_heads, ff_dim, gru_dim
///     [train]    lr, epochs_pretrain, epochs_finetune, batch_size, seed, beta1,
///                beta2, eps, fixed_masks, keypoint_radius, keypoint_separation,
///                selection (accuracy | macro_f1)
///     [pretrain] weights
///     [search]   budget, n_initial, pool, seed, patience, min_improvement
struct ExperimentConfig {
  KeyValueConfig raw;

  std::optional<std::filesystem::path> csv, schema;
  int window_length = 120;
  double target_hz = 20.0;
  SplitRatios split;
  std::uint64_t split_seed = 0;
  double label_rate = 0.1;

  SyntheticSpec synth;
  int valid_per_class = 50;
  int test_per_class = 50;

  MaskConfig mask;
  EncoderConfig model;
  TrainConfig train;
  LossWeights weights;
  SearchConfig search;

  static ExperimentConfig from(const KeyValueConfig& kv);
};

/// Files shared by `preprocess` and `synth`: train / labelled / valid / test
/// containers inside one directory.
struct DatasetFiles {
  std::filesystem::path dir;
  std::filesystem::path train() const { return dir / "train.win"; }
  std::filesystem::path labelled() const { return dir / "labelled.win"; }
  std::filesystem::path valid() const { return dir / "valid.win"; }
  std::filesystem::path test() const { return dir / "test.win"; }
};

void cmd_preprocess(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
void cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
PretrainResult cmd_pretrain(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                            const std::filesystem::path& out_dir);
FinetuneResult cmd_finetune(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                            const std::filesystem::path& out_dir,
                            const std::optional<std::filesystem::path>& backbone);
Metrics cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& container,
                 const std::filesystem::path& out_dir);
SearchResult cmd_search(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                        const std::filesystem::path& out_dir,
                        const std::optional<std::filesystem::path>& resume);
void cmd_mask_preview(const ExperimentConfig& cfg, const std::filesystem::path& container, std::size_t index,
                      std::uint64_t seed, std::ostream& out);
void cmd_semantics_dump(const ExperimentConfig& cfg, const std::filesystem::path& container, std::ostream& out);

/// Exit codes: 0 success, 1 validation error, 2 runtime/numerical error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace saga
