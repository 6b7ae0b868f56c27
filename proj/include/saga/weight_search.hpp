#pragma once

#include "saga/gaussian_process.hpp"
#include "saga/nets.hpp"
#include "saga/random.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace saga {

/// (w_se, w_po, w_sp, w_pe) on the 3-simplex.
using WeightVector = Eigen::Vector4d;

bool on_simplex(const WeightVector& w, double tol = 1e-9);
WeightVector sample_simplex(Rng& rng);
LossWeights to_loss_weights(const WeightVector& w);
WeightVector from_loss_weights(const LossWeights& w);

struct TrialRecord {
  WeightVector weights = WeightVector::Constant(0.25);
  double performance = 0.0;
  int iteration = 0;                 // 0-based position in the history
  std::optional<double> acquisition;  // EI of the proposal; empty for initial random points
};

struct SearchConfig {
  int budget = 20;
  int n_initial = 5;
  int candidate_pool_size = 2000;
  std::uint64_t seed = 0;
  int patience = 5;
  double min_improvement = 1e-4;
};

void validate(const SearchConfig& cfg);

GpModel gp_fit(const std::vector<TrialRecord>& trials);
GpModel gp_fit(const std::vector<TrialRecord>& trials, const GpHyperparameters<double>& hyper);
GpPrediction gp_predict(const GpModel& model, const WeightVector& w);

/// E[max(0, X - p_best)] for X ~ N(mean, std^2).
double expected_improvement(double mean, double std, double p_best);

struct Proposal {
  std::size_t index = 0;
  WeightVector weights;
  double acquisition = 0.0;
};

/// Candidate with the largest EI; the first one wins ties.
Proposal propose_weights(const GpModel& model, const std::vector<WeightVector>& candidates, double p_best);

using Objective = std::function<double(const WeightVector&)>;

struct SearchResult {
  WeightVector best;
  double best_performance = 0.0;
  std::vector<TrialRecord> history;
  int iterations = 0;  // proposals made in this call
  bool converged = false;
};

/// GP/EI search over the simplex. `history` resumes an earlier run: its
/// entries are kept and count toward n_initial and budget. `on_trial` sees
/// every new record as soon as it is evaluated.
SearchResult search(const Objective& objective, const SearchConfig& cfg, std::vector<TrialRecord> history = {},
                    const std::function<void(const TrialRecord&)>& on_trial = {});

/// JSON-lines history: {"iteration":..,"weights":[..],"performance":..,"ei":..|null}
std::string to_json_line(const TrialRecord& r);
TrialRecord trial_from_json_line(const std::string& line);
std::vector<TrialRecord> read_history(const std::filesystem::path& path);

}  // namespace saga
