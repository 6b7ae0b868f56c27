#include "saga/commands.hpp"

#include "saga/checkpoint.hpp"
#include "saga/container.hpp"
#include "saga/errors.hpp"
#include "saga/semantics.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>

namespace saga {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_existing(const fs::path& p, const std::string& field) {
  if (!fs::exists(p)) throw ValidationError("config field '" + field + "': path '" + p.string() + "' does not exist");
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + p.string() + "'");
  out << text;
}

void prepare_out_dir(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "config.ini", cfg.raw.to_text());
}

json metrics_json(const Metrics& m) {
  json j;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["per_class"] = json::array();
  for (const auto& c : m.per_class)
    j["per_class"].push_back(
        {{"label", c.label}, {"support", c.support}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
  return j;
}

json epoch_json(const EpochLoss& e) {
  return {{"epoch", e.epoch},
          {"loss_sensor", e.level[0]},
          {"loss_point", e.level[1]},
          {"loss_subperiod", e.level[2]},
          {"loss_period", e.level[3]},
          {"total", e.total}};
}

json finetune_epoch_json(const FinetuneEpoch& e) {
  return {{"epoch", e.epoch},
          {"train_loss", e.train_loss},
          {"valid_accuracy", e.valid.accuracy},
          {"valid_macro_f1", e.valid.macro_f1}};
}

LossWeights parse_weights(const std::vector<double>& v) {
  if (v.size() != 4) throw ValidationError("config field 'pretrain.weights': expected four comma-separated numbers");
  LossWeights w{v[0], v[1], v[2], v[3]};
  validate(w);
  return w;
}

WindowSet read_required(const fs::path& p) {
  require_existing(p, "data");
  return read_windows(p);
}

EncoderConfig model_for(const ExperimentConfig& cfg, const WindowSet& set, int n_classes) {
  EncoderConfig m = cfg.model;
  m.input_dim = static_cast<int>(set.layout.size());
  m.max_len = static_cast<int>(set.window_length);
  m.n_classes = n_classes;
  validate(m);
  return m;
}

int label_classes(const WindowSet& a, const WindowSet& b) {
  int k = 0;
  for (const auto* s : {&a, &b})
    for (const auto& w : s->windows)
      if (w.label) k = std::max(k, *w.label + 1);
  return k;
}

}  // namespace

ExperimentConfig ExperimentConfig::from(const KeyValueConfig& kv) {
  ExperimentConfig c;
  c.raw = kv;
  if (kv.has("data.csv")) c.csv = kv.get_string("data.csv");
  if (kv.has("data.schema")) c.schema = kv.get_string("data.schema");
  c.window_length = static_cast<int>(kv.get_int("data.window", 120));
  if (c.window_length < 2) throw ValidationError("config field 'data.window': must be >= 2");
  c.target_hz = kv.get_double("data.target_hz", 20.0);
  if (!(c.target_hz > 0)) throw ValidationError("config field 'data.target_hz': must be positive");
  const auto split = kv.get_doubles("data.split", {0.6, 0.2, 0.2});
  if (split.size() != 3) throw ValidationError("config field 'data.split': expected three ratios");
  c.split = {split[0], split[1], split[2]};
  c.split_seed = static_cast<std::uint64_t>(kv.get_int("data.seed", 0));
  c.label_rate = kv.get_double("data.label_rate", 0.1);
  if (!(c.label_rate > 0 && c.label_rate <= 1)) throw ValidationError("config field 'data.label_rate': must lie in (0, 1]");

  c.synth.n_classes = static_cast<int>(kv.get_int("synth.n_classes", 4));
  c.synth.windows_per_class = static_cast<int>(kv.get_int("synth.windows_per_class", 100));
  c.synth.periods = kv.get_doubles("synth.periods", {20, 30, 40, 60});
  c.synth.noise = kv.get_double("synth.noise", 0.0);
  c.synth.seed = static_cast<std::uint64_t>(kv.get_int("synth.seed", 0));
  c.synth.window_length = static_cast<int>(kv.get_int("synth.window", 120));
  c.valid_per_class = static_cast<int>(kv.get_int("synth.valid_per_class", 50));
  c.test_per_class = static_cast<int>(kv.get_int("synth.test_per_class", 50));
  if (kv.has("synth.label_rate")) c.label_rate = kv.get_double("synth.label_rate");

  c.mask.n_axes = static_cast<int>(kv.get_int("mask.n_axes", 1));
  c.mask.p_geo = kv.get_double("mask.p_geo", 0.2);
  c.mask.l_max = static_cast<int>(kv.get_int("mask.l_max", 12));

  c.model.hidden_dim = static_cast<int>(kv.get_int("model.hidden_dim", 32));
  c.model.n_blocks = static_cast<int>(kv.get_int("model.n_blocks", 2));
  c.model.n_heads = static_cast<int>(kv.get_int("model.n_heads", 4));
  c.model.ff_dim = static_cast<int>(kv.get_int("model.ff_dim", 2 * c.model.hidden_dim));
  c.model.gru_dim = static_cast<int>(kv.get_int("model.gru_dim", 16));
  validate(c.model);

  auto& t = c.train;
  t.lr = kv.get_double("train.lr", 1e-3);
  t.epochs_pretrain = static_cast<int>(kv.get_int("train.epochs_pretrain", 50));
  t.epochs_finetune = static_cast<int>(kv.get_int("train.epochs_finetune", 50));
  t.batch_size = static_cast<int>(kv.get_int("train.batch_size", 32));
  t.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", 0));
  t.adam.beta1 = kv.get_double("train.beta1", 0.9);
  t.adam.beta2 = kv.get_double("train.beta2", 0.999);
  t.adam.eps = kv.get_double("train.eps", 1e-8);
  t.fixed_masks = kv.get_bool("train.fixed_masks", false);
  t.keypoint_radius = static_cast<int>(kv.get_int("train.keypoint_radius", 5));
  t.keypoint_separation = static_cast<int>(kv.get_int("train.keypoint_separation", 10));
  const auto sel = kv.get_string("train.selection", "accuracy");
  if (sel == "accuracy") t.selection = SelectionMetric::Accuracy;
  else if (sel == "macro_f1") t.selection = SelectionMetric::MacroF1;
  else throw ValidationError("config field 'train.selection': expected accuracy or macro_f1");
  t.mask = c.mask;
  validate(t);

  c.weights = parse_weights(kv.get_doubles("pretrain.weights", {0.25, 0.25, 0.25, 0.25}));

  c.search.budget = static_cast<int>(kv.get_int("search.budget", 20));
  c.search.n_initial = static_cast<int>(kv.get_int("search.n_initial", 5));
  c.search.candidate_pool_size = static_cast<int>(kv.get_int("search.pool", 2000));
  c.search.seed = static_cast<std::uint64_t>(kv.get_int("search.seed", 0));
  c.search.patience = static_cast<int>(kv.get_int("search.patience", 5));
  c.search.min_improvement = kv.get_double("search.min_improvement", 1e-4);
  validate(c.search);
  return c;
}

void cmd_preprocess(const ExperimentConfig& cfg, const fs::path& out_dir) {
  if (!cfg.csv) throw ValidationError("config: missing field 'data.csv'");
  if (!cfg.schema) throw ValidationError("config: missing field 'data.schema'");
  require_existing(*cfg.csv, "data.csv");
  require_existing(*cfg.schema, "data.schema");
  const auto schema = load_schema(*cfg.schema);

  WindowList windows;
  std::size_t zero_mag = 0;
  for (const auto& rec : load_recordings(*cfg.csv, schema)) {
    std::size_t zeros = 0;
    const auto norm = normalize(resample(rec, cfg.target_hz), &zeros);
    zero_mag += zeros;
    auto w = slice_windows(norm, cfg.window_length);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  const auto split = split_dataset(windows, cfg.split, cfg.split_seed);

  prepare_out_dir(cfg, out_dir);
  const DatasetFiles files{out_dir};
  const auto layout = schema.layout();
  const auto window_length = static_cast<Index>(cfg.window_length);
  write_windows(files.train(), {window_length, layout, split.train});
  write_windows(files.valid(), {window_length, layout, split.valid});
  write_windows(files.test(), {window_length, layout, split.test});

  std::vector<std::size_t> labelled_idx;
  const bool labelled = std::all_of(split.train.begin(), split.train.end(), [](const auto& w) { return w.label; });
  if (labelled) labelled_idx = subsample_label_indices(split.train, cfg.label_rate, cfg.split_seed);
  WindowList labelled_windows;
  for (auto i : labelled_idx) labelled_windows.push_back(split.train[i]);
  write_windows(files.labelled(), {window_length, layout, labelled_windows});

  json manifest;
  manifest["window"] = cfg.window_length;
  manifest["channels"] = layout.size();
  manifest["target_hz"] = cfg.target_hz;
  manifest["seed"] = cfg.split_seed;
  manifest["windows"] = windows.size();
  manifest["zero_norm_magnetometer_samples"] = zero_mag;
  manifest["train"] = split.train_index;
  manifest["valid"] = split.valid_index;
  manifest["test"] = split.test_index;
  manifest["labelled"] = labelled_idx;
  manifest["label_rate"] = cfg.label_rate;
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void cmd_synth(const ExperimentConfig& cfg, const fs::path& out_dir) {
  SyntheticSpec train_spec = cfg.synth;
  validate(train_spec);
  SyntheticSpec valid_spec = train_spec, test_spec = train_spec;
  valid_spec.windows_per_class = cfg.valid_per_class;
  valid_spec.seed = derive_seed(train_spec.seed, {1});
  test_spec.windows_per_class = cfg.test_per_class;
  test_spec.seed = derive_seed(train_spec.seed, {2});

  const auto train = generate_synthetic(train_spec);
  const auto valid = generate_synthetic(valid_spec);
  const auto test = generate_synthetic(test_spec);
  const auto labelled_idx = subsample_label_indices(train.set.windows, cfg.label_rate, train_spec.seed);
  WindowSet labelled{train.set.window_length, train.set.layout, {}};
  for (auto i : labelled_idx) labelled.windows.push_back(train.set.windows[i]);

  prepare_out_dir(cfg, out_dir);
  const DatasetFiles files{out_dir};
  write_windows(files.train(), train.set);
  write_windows(files.labelled(), labelled);
  write_windows(files.valid(), valid.set);
  write_windows(files.test(), test.set);

  json meta;
  meta["window"] = train_spec.window_length;
  meta["class_periods"] = train_spec.periods;
  meta["noise"] = train_spec.noise;
  meta["seed"] = train_spec.seed;
  meta["train_periods"] = train.periods;
  meta["valid_periods"] = valid.periods;
  meta["test_periods"] = test.periods;
  meta["labelled"] = labelled_idx;
  write_text(out_dir / "metadata.json", meta.dump(2) + "\n");
}

PretrainResult cmd_pretrain(const ExperimentConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  const DatasetFiles files{data_dir};
  auto train = read_required(files.train());
  for (auto& w : train.windows) w.label.reset();
  const auto model = model_for(cfg, train, std::max(cfg.model.n_classes, 1));
  prepare_out_dir(cfg, out_dir);

  std::ofstream log(out_dir / "pretrain_log.jsonl");
  auto result = pretrain(train.windows, train.layout, cfg.weights, model, cfg.train,
                         [&](const EpochLoss& e) { log << epoch_json(e).dump() << "\n"; });
  save_checkpoint(out_dir / "backbone.ckpt", result.params);
  return result;
}

FinetuneResult cmd_finetune(const ExperimentConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                            const std::optional<fs::path>& backbone) {
  const DatasetFiles files{data_dir};
  const auto labelled = read_required(files.labelled());
  const auto valid = read_required(files.valid());
  const int k = label_classes(labelled, valid);

  ModelParams start;
  if (backbone) {
    require_existing(*backbone, "backbone");
    start = load_checkpoint(*backbone);
    if (start.config.input_dim != static_cast<int>(labelled.layout.size()) ||
        start.config.max_len < labelled.window_length)
      throw ValidationError("backbone checkpoint does not match the dataset shape");
  } else {
    start = ModelParams::random(model_for(cfg, labelled, k), cfg.train.seed);
  }
  prepare_out_dir(cfg, out_dir);
  std::ofstream log(out_dir / "finetune_log.jsonl");
  auto result = finetune(start, labelled.windows, valid.windows, cfg.train, k,
                         [&](const FinetuneEpoch& e) { log << finetune_epoch_json(e).dump() << "\n"; });
  save_checkpoint(out_dir / "finetuned.ckpt", result.params);
  json j = metrics_json(result.metrics);
  j["best_epoch"] = result.best_epoch;
  write_text(out_dir / "metrics.json", j.dump(2) + "\n");
  return result;
}

Metrics cmd_eval(const fs::path& checkpoint, const fs::path& container, const fs::path& out_dir) {
  require_existing(checkpoint, "checkpoint");
  const auto params = load_checkpoint(checkpoint);
  const auto test = read_required(container);
  const auto metrics = evaluate(params, test.windows);
  fs::create_directories(out_dir);
  write_text(out_dir / "eval_metrics.json", metrics_json(metrics).dump(2) + "\n");
  return metrics;
}

SearchResult cmd_search(const ExperimentConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                        const std::optional<fs::path>& resume) {
  const DatasetFiles files{data_dir};
  auto train = read_required(files.train());
  for (auto& w : train.windows) w.label.reset();
  const auto labelled = read_required(files.labelled());
  const auto valid = read_required(files.valid());
  const int k = label_classes(labelled, valid);
  const auto model = model_for(cfg, train, k);

  std::vector<TrialRecord> history;
  if (resume) {
    require_existing(*resume, "resume");
    history = read_history(*resume);
  }
  prepare_out_dir(cfg, out_dir);

  std::ofstream hist(out_dir / "search_history.jsonl");
  for (const auto& r : history) hist << to_json_line(r) << "\n";
  hist.flush();

  int evaluation = static_cast<int>(history.size());
  const Objective objective = [&](const WeightVector& w) {
    try {
      const auto pre = pretrain(train.windows, train.layout, to_loss_weights(w), model, cfg.train);
      const auto fine = finetune(pre.params, labelled.windows, valid.windows, cfg.train, k);
      ++evaluation;
      return cfg.train.selection == SelectionMetric::Accuracy ? fine.metrics.accuracy : fine.metrics.macro_f1;
    } catch (const std::exception& e) {
      std::cerr << "search: trial " << evaluation++ << " failed: " << e.what() << "\n";
      throw;
    }
  };
  auto result = search(objective, cfg.search, history, [&](const TrialRecord& r) {
    hist << to_json_line(r) << "\n";
    hist.flush();
  });

  json report;
  report["best_weights"] = {result.best(0), result.best(1), result.best(2), result.best(3)};
  report["best_performance"] = result.best_performance;
  report["history_length"] = result.history.size();
  report["iterations"] = result.iterations;
  report["converged"] = result.converged;
  json per_iter = json::array();
  double running = -1.0;
  for (const auto& r : result.history) {
    running = std::max(running, r.performance);
    per_iter.push_back({{"iteration", r.iteration}, {"performance", r.performance}, {"best_so_far", running}});
  }
  report["trials"] = per_iter;
  write_text(out_dir / "search_report.json", report.dump(2) + "\n");
  return result;
}

void cmd_mask_preview(const ExperimentConfig& cfg, const fs::path& container, std::size_t index, std::uint64_t seed,
                      std::ostream& out) {
  const auto set = read_required(container);
  if (index >= set.windows.size()) throw ValidationError("mask preview: window index out of range");
  const auto& values = set.windows[index].values;
  validate(cfg.mask, values.rows(), values.cols());
  const auto sem = analyze_window(values, set.layout, cfg.train.keypoint_radius, cfg.train.keypoint_separation);
  out << "level,row";
  for (const auto& ch : set.layout) out << "," << to_string(ch);
  out << "\n";
  for (auto level : kMaskLevels) {
    const auto masked = mask_level(level, values, sem, cfg.mask, derive_seed(seed, {static_cast<std::uint64_t>(level)}));
    for (Index r = 0; r < values.rows(); ++r) {
      out << to_string(level) << "," << r;
      for (Index c = 0; c < values.cols(); ++c) out << "," << (masked.spec.contains(r, c) ? 1 : 0);
      out << "\n";
    }
  }
}

void cmd_semantics_dump(const ExperimentConfig& cfg, const fs::path& container, std::ostream& out) {
  const auto set = read_required(container);
  auto join = [](const std::vector<Index>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
  };
  out << "window,label,t_main,f_index,peaks,valleys\n";
  for (std::size_t i = 0; i < set.windows.size(); ++i) {
    const auto& w = set.windows[i];
    const auto sem = analyze_window(w.values, set.layout, cfg.train.keypoint_radius, cfg.train.keypoint_separation);
    out << i << "," << (w.label ? std::to_string(*w.label) : "") << ",";
    if (sem.period) out << sem.period->t_main << "," << sem.period->f_index;
    else out << ",";
    out << "," << join(sem.keypoints.peaks) << "," << join(sem.keypoints.valleys) << "\n";
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic masking pre-training and loss-weight search for IMU data", "saga"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string data, out_dir, backbone, checkpoint, resume, output;
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::vector<double> weights;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key=value config file");
    sub->add_option("--set", overrides, "override, e.g. --set train.lr=0.001");
  };

  auto* preprocess = app.add_subcommand("preprocess", "CSV -> normalized, resampled, windowed, split containers");
  with_config(preprocess);
  preprocess->add_option("-o,--out", out_dir, "output directory")->required();

  auto* synth = app.add_subcommand("synth", "generate a labelled periodic dataset");
  with_config(synth);
  synth->add_option("-o,--out", out_dir, "output directory")->required();

  auto* pretrain_cmd = app.add_subcommand("pretrain", "masked-reconstruction pre-training");
  with_config(pretrain_cmd);
  pretrain_cmd->add_option("-d,--data", data, "dataset directory")->required();
  pretrain_cmd->add_option("-o,--out", out_dir, "output directory")->required();
  pretrain_cmd->add_option("-w,--weights", weights, "w_se,w_po,w_sp,w_pe")->delimiter(',')->expected(4);

  auto* finetune_cmd = app.add_subcommand("finetune", "fine-tune a classifier on the labelled subset");
  with_config(finetune_cmd);
  finetune_cmd->add_option("-d,--data", data, "dataset directory")->required();
  finetune_cmd->add_option("-o,--out", out_dir, "output directory")->required();
  finetune_cmd->add_option("-b,--backbone", backbone, "pre-trained checkpoint (omit to train from scratch)");

  auto* eval_cmd = app.add_subcommand("eval", "accuracy and macro-F1 of a checkpoint");
  eval_cmd->add_option("-k,--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("-d,--data", data, "window container")->required();
  eval_cmd->add_option("-o,--out", out_dir, "output directory")->required();

  auto* search_cmd = app.add_subcommand("search", "Bayesian search over the four loss weights");
  with_config(search_cmd);
  search_cmd->add_option("-d,--data", data, "dataset directory")->required();
  search_cmd->add_option("-o,--out", out_dir, "output directory")->required();
  search_cmd->add_option("-r,--resume", resume, "history to resume from");

  auto* mask_cmd = app.add_subcommand("mask", "mask utilities");
  mask_cmd->require_subcommand(1);
  auto* preview = mask_cmd->add_subcommand("preview", "0/1 grid of the four masks of one window");
  with_config(preview);
  preview->add_option("-d,--data", data, "window container")->required();
  preview->add_option("-i,--index", index, "window index");
  preview->add_option("-s,--seed", seed, "mask seed");
  preview->add_option("-o,--out", output, "CSV file (default stdout)");

  auto* semantics_cmd = app.add_subcommand("semantics", "semantics utilities");
  semantics_cmd->require_subcommand(1);
  auto* dump = semantics_cmd->add_subcommand("dump", "key points and main period per window");
  with_config(dump);
  dump->add_option("-d,--data", data, "window container")->required();
  dump->add_option("-o,--out", output, "CSV file (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    KeyValueConfig kv;
    if (!config_path.empty()) {
      require_existing(config_path, "config");
      kv = KeyValueConfig::load(config_path);
    }
    for (const auto& o : overrides) kv.apply_override(o);
    if (!weights.empty()) {
      std::ostringstream w;
      for (std::size_t i = 0; i < weights.size(); ++i) w << (i ? "," : "") << weights[i];
      kv.set("pretrain.weights", w.str());
    }
    const auto cfg = ExperimentConfig::from(kv);

    auto to_output = [&](const std::function<void(std::ostream&)>& body) {
      if (output.empty()) {
        body(out);
      } else {
        std::ofstream f(output);
        if (!f) throw ValidationError("cannot write '" + output + "'");
        body(f);
      }
    };

    if (*preprocess) {
      cmd_preprocess(cfg, out_dir);
    } else if (*synth) {
      cmd_synth(cfg, out_dir);
    } else if (*pretrain_cmd) {
      const auto r = cmd_pretrain(cfg, data, out_dir);
      if (!r.trace.empty()) out << "final pre-training loss " << r.trace.back().total << "\n";
    } else if (*finetune_cmd) {
      const auto r = cmd_finetune(cfg, data, out_dir,
                                  backbone.empty() ? std::nullopt : std::optional<fs::path>(backbone));
      out << "validation accuracy " << r.metrics.accuracy << ", macro-F1 " << r.metrics.macro_f1 << " (epoch "
          << r.best_epoch << ")\n";
    } else if (*eval_cmd) {
      const auto m = cmd_eval(checkpoint, data, out_dir);
      out << "accuracy " << m.accuracy << ", macro-F1 " << m.macro_f1 << "\n";
    } else if (*search_cmd) {
      const auto r = cmd_search(cfg, data, out_dir, resume.empty() ? std::nullopt : std::optional<fs::path>(resume));
      out << "best weights " << r.best.transpose() << " -> " << r.best_performance << "\n";
    } else if (*preview) {
      to_output([&](std::ostream& s) { cmd_mask_preview(cfg, data, index, seed, s); });
    } else if (*dump) {
      to_output([&](std::ostream& s) { cmd_semantics_dump(cfg, data, s); });
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace saga
