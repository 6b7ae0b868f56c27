#include "saga/weight_search.hpp"

#include "saga/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>

namespace saga {

namespace {

enum SeedTag : std::uint64_t { kInitialTag = 11, kPoolTag = 12 };

Matrix stack_inputs(const std::vector<TrialRecord>& trials) {
  Matrix x(static_cast<Index>(trials.size()), 4);
  for (std::size_t i = 0; i < trials.size(); ++i) x.row(static_cast<Index>(i)) = trials[i].weights.transpose();
  return x;
}

Vector stack_targets(const std::vector<TrialRecord>& trials) {
  Vector y(static_cast<Index>(trials.size()));
  for (std::size_t i = 0; i < trials.size(); ++i) y(static_cast<Index>(i)) = trials[i].performance;
  return y;
}

std::size_t best_index(const std::vector<TrialRecord>& h) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i].performance > h[best].performance) best = i;
  return best;
}

double safe_evaluate(const Objective& objective, const WeightVector& w) {
  try {
    const double p = objective(w);
    return std::isfinite(p) ? p : 0.0;
  } catch (const std::exception&) {
    return 0.0;
  }
}

}  // namespace

bool on_simplex(const WeightVector& w, double tol) {
  return (w.array() >= -tol).all() && (w.array() <= 1.0 + tol).all() && std::abs(w.sum() - 1.0) <= tol;
}

WeightVector sample_simplex(Rng& rng) {
  // Dirichlet(1, 1, 1, 1) via normalized unit exponentials
  std::exponential_distribution<double> e(1.0);
  WeightVector w;
  for (Index i = 0; i < 4; ++i) w(i) = e(rng);
  return w / w.sum();
}

LossWeights to_loss_weights(const WeightVector& w) { return {w(0), w(1), w(2), w(3)}; }

WeightVector from_loss_weights(const LossWeights& w) { return {w.w_se, w.w_po, w.w_sp, w.w_pe}; }

void validate(const SearchConfig& cfg) {
  if (cfg.budget < 0) throw ValidationError("search config: budget must be >= 0");
  if (cfg.n_initial < 2) throw ValidationError("search config: n_initial must be >= 2");
  if (cfg.candidate_pool_size < 1) throw ValidationError("search config: candidate_pool_size must be >= 1");
  if (cfg.patience < 1) throw ValidationError("search config: patience must be >= 1");
}

GpModel gp_fit(const std::vector<TrialRecord>& trials) {
  if (trials.empty()) throw InsufficientDataError("gp_fit: no trials");
  return GpModel::fit(stack_inputs(trials), stack_targets(trials));
}

GpModel gp_fit(const std::vector<TrialRecord>& trials, const GpHyperparameters<double>& hyper) {
  if (trials.empty()) throw InsufficientDataError("gp_fit: no trials");
  return GpModel::fit(stack_inputs(trials), stack_targets(trials), hyper);
}

GpPrediction gp_predict(const GpModel& model, const WeightVector& w) { return model.predict(w); }

double expected_improvement(double mean, double std, double p_best) {
  const double gain = mean - p_best;
  if (std < 1e-12) return std::max(0.0, gain);
  const double z = gain / std;
  const double cdf = 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(0.0, gain * cdf + std * pdf);
}

Proposal propose_weights(const GpModel& model, const std::vector<WeightVector>& candidates, double p_best) {
  if (candidates.empty()) throw ValidationError("propose_weights: empty candidate list");
  Proposal best{0, candidates.front(), -1.0};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto pred = model.predict(candidates[i]);
    const double ei = expected_improvement(pred.mean, pred.std, p_best);
    if (ei > best.acquisition) best = {i, candidates[i], ei};
  }
  return best;
}

SearchResult search(const Objective& objective, const SearchConfig& cfg, std::vector<TrialRecord> history,
                    const std::function<void(const TrialRecord&)>& on_trial) {
  validate(cfg);
  SearchResult result;
  auto record = [&](const WeightVector& w, std::optional<double> ei) {
    TrialRecord r{w, safe_evaluate(objective, w), static_cast<int>(history.size()), ei};
    history.push_back(r);
    if (on_trial) on_trial(r);
  };

  while (history.size() < static_cast<std::size_t>(cfg.n_initial)) {
    Rng rng(derive_seed(cfg.seed, {kInitialTag, history.size()}));
    record(sample_simplex(rng), std::nullopt);
  }

  auto done = static_cast<int>(history.size()) - cfg.n_initial;
  double best_so_far = history[best_index(history)].performance;
  int stagnant = 0;
  while (done < cfg.budget) {
    const GpModel model = gp_fit(history);
    Rng rng(derive_seed(cfg.seed, {kPoolTag, history.size()}));
    std::vector<WeightVector> pool(static_cast<std::size_t>(cfg.candidate_pool_size));
    for (auto& w : pool) w = sample_simplex(rng);
    const auto proposal = propose_weights(model, pool, best_so_far);
    record(proposal.weights, proposal.acquisition);
    ++done;
    ++result.iterations;

    const double p = history.back().performance;
    if (p > best_so_far + cfg.min_improvement) {
      stagnant = 0;
    } else if (++stagnant >= cfg.patience) {
      result.converged = true;
    }
    best_so_far = std::max(best_so_far, p);
    if (result.converged) break;
  }

  const auto b = best_index(history);
  result.best = history[b].weights;
  result.best_performance = history[b].performance;
  result.history = std::move(history);
  return result;
}

std::string to_json_line(const TrialRecord& r) {
  nlohmann::json j;
  j["iteration"] = r.iteration;
  j["weights"] = {r.weights(0), r.weights(1), r.weights(2), r.weights(3)};
  j["performance"] = r.performance;
  j["ei"] = r.acquisition ? nlohmann::json(*r.acquisition) : nlohmann::json(nullptr);
  return j.dump();
}

TrialRecord trial_from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  TrialRecord r;
  r.iteration = j.at("iteration").get<int>();
  const auto& w = j.at("weights");
  if (!w.is_array() || w.size() != 4) throw ValidationError("history: 'weights' must hold four numbers");
  for (Index i = 0; i < 4; ++i) r.weights(i) = w.at(static_cast<std::size_t>(i)).get<double>();
  r.performance = j.at("performance").get<double>();
  if (j.contains("ei") && !j["ei"].is_null()) r.acquisition = j["ei"].get<double>();
  return r;
}

std::vector<TrialRecord> read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open history '" + path.string() + "'");
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(trial_from_json_line(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("history: ") + e.what(), line_no);
    }
  }
  return out;
}

}  // namespace saga
