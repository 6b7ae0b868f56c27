#pragma once

#include "saga/types.hpp"

#include <vector>

namespace saga {

/// Squared-exponential kernel hyperparameters, in units of the standardized
/// targets: k(a, b) = signal_variance * exp(-0.5 * sum_d ((a_d - b_d) / l_d)^2).
template <typename Scalar>
struct GpHyperparameters {
  Scalar signal_variance = 1;
  VectorX<Scalar> length_scales;
  Scalar noise = 1e-6;  // variance added to the diagonal, >= 1e-8
};

struct GpPrediction {
  double mean = 0.0;
  double std = 0.0;
};

/// Gaussian-process regression with a constant prior mean equal to the
/// target mean and targets standardized by their spread.
class GpModel {
 public:
  /// Hyperparameters chosen by maximizing the log marginal likelihood.
  static GpModel fit(const Matrix& inputs, const Vector& targets);
  static GpModel fit(const Matrix& inputs, const Vector& targets, const GpHyperparameters<double>& hyper);

  GpPrediction predict(const Vector& x) const;

  const GpHyperparameters<double>& hyperparameters() const { return hyper_; }
  const Matrix& inputs() const { return x_; }
  const Vector& targets() const { return y_; }
  double target_mean() const { return y_mean_; }
  double target_scale() const { return y_scale_; }
  /// Noise variance in target units.
  double noise_variance() const { return hyper_.noise * y_scale_ * y_scale_; }

 private:
  void factorize();

  Matrix x_;
  Vector y_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  GpHyperparameters<double> hyper_;
  Eigen::LLT<Matrix> chol_;
  Vector alpha_;
};

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar se_kernel(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                    const GpHyperparameters<typename DerivedA::Scalar>& h) {
  return h.signal_variance * std::exp(-0.5 * (a - b).cwiseQuotient(h.length_scales).squaredNorm());
}

/// Log marginal likelihood of standardized targets under `hyper`; -inf if the
/// kernel matrix cannot be factorized.
double log_marginal_likelihood(const Matrix& inputs, const Vector& standardized, const GpHyperparameters<double>& hyper);

/// Merges duplicate input rows, averaging their targets.
void merge_duplicates(Matrix& inputs, Vector& targets);

}  // namespace saga
