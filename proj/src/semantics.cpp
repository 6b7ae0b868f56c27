#include "saga/semantics.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <numeric>

namespace saga {

namespace {

enum class Extremum { Peak, Valley };

// a dominates b in the direction of the extremum
bool dominates(double a, double b, Extremum kind) { return kind == Extremum::Peak ? a >= b : a <= b; }

std::vector<Index> filter_extrema(std::span<const double> e, int w, int d, Extremum kind) {
  const auto n = static_cast<Index>(e.size());
  std::vector<Index> candidates;
  for (Index i = 1; i + 1 < n; ++i) {
    if (!dominates(e[i], e[i - 1], kind) || !dominates(e[i], e[i + 1], kind)) continue;
    if (e[i - 1] == e[i]) continue;  // not the first index of its flat run
    bool dominant = true;
    for (Index j = std::max<Index>(0, i - w); j <= std::min<Index>(n - 1, i + w) && dominant; ++j)
      dominant = dominates(e[i], e[j], kind);
    if (dominant) candidates.push_back(i);
  }

  std::stable_sort(candidates.begin(), candidates.end(), [&](Index a, Index b) {
    return kind == Extremum::Peak ? e[a] > e[b] : e[a] < e[b];
  });
  std::vector<Index> kept;
  for (Index c : candidates) {
    const bool separated =
        std::all_of(kept.begin(), kept.end(), [&](Index k) { return std::abs(c - k) >= static_cast<Index>(d); });
    if (separated) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

KeyPointSet detect_key_points(std::span<const double> energy, int w, int d) {
  if (w < 1 || d < 1) throw ValidationError("detect_key_points: w and d must be positive");
  KeyPointSet out;
  out.dominance_radius = w;
  out.min_separation = d;
  out.peaks = filter_extrema(energy, w, d, Extremum::Peak);
  out.valleys = filter_extrema(energy, w, d, Extremum::Valley);
  return out;
}

KeyPointSet detect_key_points(const Vector& energy, int w, int d) {
  return detect_key_points(std::span<const double>(energy.data(), static_cast<std::size_t>(energy.size())), w, d);
}

Vector spectrum_magnitudes(std::span<const double> energy) {
  const auto n = energy.size();
  if (n < 4) throw ValidationError("detect_main_period: series needs at least 4 samples");
  const double mean = std::accumulate(energy.begin(), energy.end(), 0.0) / static_cast<double>(n);
  std::vector<double> centered(n);
  std::transform(energy.begin(), energy.end(), centered.begin(), [mean](double v) { return v - mean; });

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, centered);

  Vector mags(static_cast<Index>(n / 2 + 1));
  for (Index k = 0; k < mags.size(); ++k) mags(k) = std::abs(spectrum[static_cast<std::size_t>(k)]);
  return mags;
}

MainPeriod detect_main_period(std::span<const double> energy) {
  const Vector mags = spectrum_magnitudes(energy);
  Index best = 1;
  for (Index k = 2; k < mags.size(); ++k)
    if (mags(k) > mags(best)) best = k;
  if (mags(best) < 1e-12) throw NoPeriodError("detect_main_period: series has no periodic component");
  return {static_cast<double>(energy.size()) / static_cast<double>(best), best};
}

MainPeriod detect_main_period(const Vector& energy) {
  return detect_main_period(std::span<const double>(energy.data(), static_cast<std::size_t>(energy.size())));
}

}  // namespace saga
