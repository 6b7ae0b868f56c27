#pragma once

#include "saga/errors.hpp"
#include "saga/types.hpp"

#include <span>
#include <vector>

namespace saga {

/// Filtered peaks and valleys of an energy series.
struct KeyPointSet {
  std::vector<Index> peaks;
  std::vector<Index> valleys;
  int dominance_radius = 5;  // w
  int min_separation = 10;   // d

  bool empty() const { return peaks.empty() && valleys.empty(); }
};

/// Dominant period of an energy series, in samples.
struct MainPeriod {
  double t_main = 0.0;
  Index f_index = 0;
};

/// Per-row sum of squares over the accelerometer columns.
template <typename Derived>
VectorX<typename Derived::Scalar> energy_series(const Eigen::MatrixBase<Derived>& values,
                                                std::span<const Index> accel_cols) {
  if (accel_cols.empty()) throw ValidationError("energy_series: no accelerometer channels");
  VectorX<typename Derived::Scalar> e = VectorX<typename Derived::Scalar>::Zero(values.rows());
  for (Index c : accel_cols) e += values.col(c).cwiseAbs2();
  return e;
}

inline Vector energy_series(const SampleWindow& window, const ChannelLayout& layout) {
  const auto cols = columns_of(layout, SensorKind::Accelerometer);
  return energy_series(window.values, std::span<const Index>(cols));
}

/// Three-stage key-point extraction:
///  1. interior local extrema with non-strict comparisons;
///  2. dominance over the radius-w neighbourhood, keeping only the first index
///     of a flat run;
///  3. greedy minimum separation d, visiting candidates from the most extreme
///     energy down (ties by index).
KeyPointSet detect_key_points(std::span<const double> energy, int w = 5, int d = 10);
KeyPointSet detect_key_points(const Vector& energy, int w = 5, int d = 10);

/// Period of the largest-magnitude DFT bin in 1..L/2 of the mean-removed
/// series. Throws NoPeriodError when every magnitude is below 1e-12.
MainPeriod detect_main_period(std::span<const double> energy);
MainPeriod detect_main_period(const Vector& energy);

/// Magnitudes |E(k)| for k = 0..L/2 of the mean-removed series.
Vector spectrum_magnitudes(std::span<const double> energy);

}  // namespace saga
