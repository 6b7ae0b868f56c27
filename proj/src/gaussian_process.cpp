#include "saga/gaussian_process.hpp"

#include "saga/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace saga {

namespace {

constexpr double kMinNoise = 1e-8;
constexpr double kMaxJitter = 1e-2;

Matrix kernel_matrix(const Matrix& x, const GpHyperparameters<double>& h) {
  const Index n = x.rows();
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) k(i, j) = k(j, i) = se_kernel(x.row(i).transpose(), x.row(j).transpose(), h);
  return k;
}

struct LogHyper {
  // log signal variance, log length-scales, log noise
  Vector theta;

  GpHyperparameters<double> decode() const {
    GpHyperparameters<double> h;
    const Index d = theta.size() - 2;
    h.signal_variance = std::exp(theta(0));
    h.length_scales = theta.segment(1, d).array().exp();
    h.noise = std::exp(theta(d + 1));
    return h;
  }
};

Vector clamp_theta(Vector theta) {
  const Index d = theta.size() - 2;
  theta(0) = std::clamp(theta(0), std::log(1e-2), std::log(1e2));
  for (Index i = 1; i <= d; ++i) theta(i) = std::clamp(theta(i), std::log(1e-2), std::log(1e1));
  theta(d + 1) = std::clamp(theta(d + 1), std::log(kMinNoise), std::log(1.0));
  return theta;
}

}  // namespace

void merge_duplicates(Matrix& inputs, Vector& targets) {
  std::vector<Index> keep;
  std::vector<double> sum;
  std::vector<int> count;
  for (Index i = 0; i < inputs.rows(); ++i) {
    bool merged = false;
    for (std::size_t k = 0; k < keep.size() && !merged; ++k) {
      if (inputs.row(keep[k]) == inputs.row(i)) {
        sum[k] += targets(i);
        ++count[k];
        merged = true;
      }
    }
    if (!merged) {
      keep.push_back(i);
      sum.push_back(targets(i));
      count.push_back(1);
    }
  }
  Matrix x(static_cast<Index>(keep.size()), inputs.cols());
  Vector y(static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    x.row(static_cast<Index>(k)) = inputs.row(keep[k]);
    y(static_cast<Index>(k)) = sum[k] / count[k];
  }
  inputs = std::move(x);
  targets = std::move(y);
}

double log_marginal_likelihood(const Matrix& inputs, const Vector& standardized, const GpHyperparameters<double>& hyper) {
  Matrix k = kernel_matrix(inputs, hyper);
  k.diagonal().array() += hyper.noise;
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Vector alpha = llt.solve(standardized);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const auto n = static_cast<double>(inputs.rows());
  return -0.5 * standardized.dot(alpha) - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

GpModel GpModel::fit(const Matrix& inputs, const Vector& targets, const GpHyperparameters<double>& hyper) {
  if (inputs.rows() < 1 || inputs.rows() != targets.size()) throw ValidationError("gp_fit: need matching inputs/targets");
  if (hyper.length_scales.size() != inputs.cols()) throw ValidationError("gp_fit: one length-scale per input dim");
  GpModel m;
  m.x_ = inputs;
  m.y_ = targets;
  merge_duplicates(m.x_, m.y_);
  m.y_mean_ = m.y_.mean();
  const double spread = std::sqrt((m.y_.array() - m.y_mean_).square().mean());
  m.y_scale_ = spread > 1e-12 ? spread : 1.0;
  m.hyper_ = hyper;
  m.hyper_.noise = std::max(hyper.noise, kMinNoise);
  m.factorize();
  return m;
}

GpModel GpModel::fit(const Matrix& inputs, const Vector& targets) {
  Matrix x = inputs;
  Vector y = targets;
  merge_duplicates(x, y);
  const Index d = x.cols();

  GpHyperparameters<double> best;
  best.signal_variance = 1.0;
  best.length_scales = Vector::Constant(d, 0.3);
  best.noise = 1e-6;
  if (x.rows() < 2) return fit(x, y, best);

  const double mean = y.mean();
  const double spread = std::sqrt((y.array() - mean).square().mean());
  const Vector ys = (y.array() - mean) / (spread > 1e-12 ? spread : 1.0);

  // coarse log-grid with a shared length-scale
  struct Start {
    double score;
    Vector theta;
  };
  std::vector<Start> starts;
  for (double sv : {0.3, 1.0, 3.0})
    for (int li = 0; li < 9; ++li)
      for (double noise : {1e-6, 1e-4, 1e-2, 1e-1}) {
        const double l = 0.03 * std::pow(10.0, li * 0.25);
        Vector theta(d + 2);
        theta(0) = std::log(sv);
        theta.segment(1, d).setConstant(std::log(l));
        theta(d + 1) = std::log(noise);
        starts.push_back({log_marginal_likelihood(x, ys, LogHyper{theta}.decode()), theta});
      }
  std::stable_sort(starts.begin(), starts.end(), [](const Start& a, const Start& b) { return a.score > b.score; });
  starts.resize(3);

  // pattern search per start, one coordinate at a time in log space
  Start winner = starts.front();
  for (auto s : starts) {
    double step = 0.5;
    for (int iter = 0; iter < 200 && step > 0.02; ++iter) {
      bool improved = false;
      for (Index i = 0; i < s.theta.size(); ++i)
        for (double dir : {1.0, -1.0}) {
          Vector trial = s.theta;
          trial(i) += dir * step;
          trial = clamp_theta(trial);
          const double score = log_marginal_likelihood(x, ys, LogHyper{trial}.decode());
          if (score > s.score + 1e-10) {
            s = {score, trial};
            improved = true;
          }
        }
      if (!improved) step *= 0.5;
    }
    if (s.score > winner.score) winner = s;
  }
  if (!std::isfinite(winner.score)) throw NumericalError("gp_fit: no hyperparameters give a valid kernel matrix");
  return fit(x, y, LogHyper{winner.theta}.decode());
}

void GpModel::factorize() {
  Matrix k = kernel_matrix(x_, hyper_);
  for (double jitter = hyper_.noise;; jitter *= 10.0) {
    Matrix kj = k;
    kj.diagonal().array() += jitter;
    chol_.compute(kj);
    if (chol_.info() == Eigen::Success) {
      hyper_.noise = jitter;
      break;
    }
    if (jitter > kMaxJitter) throw NumericalError("gp_fit: kernel matrix is singular even with maximum jitter");
  }
  alpha_ = chol_.solve(((y_.array() - y_mean_) / y_scale_).matrix());
}

GpPrediction GpModel::predict(const Vector& x) const {
  if (x.size() != x_.cols()) throw ValidationError("gp_predict: input dimension mismatch");
  Vector ks(x_.rows());
  for (Index i = 0; i < x_.rows(); ++i) ks(i) = se_kernel(x_.row(i).transpose(), x, hyper_);
  const double mean = ks.dot(alpha_);
  const Vector v = chol_.matrixL().solve(ks);
  const double var = std::max(0.0, hyper_.signal_variance - v.squaredNorm());
  return {y_mean_ + y_scale_ * mean, y_scale_ * std::sqrt(var)};
}

}  // namespace saga
