#include "keypoint_oracle.hpp"

#include "saga/random.hpp"
#include "saga/semantics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

using namespace saga;

namespace {

/// O(L^2) DFT magnitudes of the mean-removed series, bins 0..L/2.
std::vector<double> naive_spectrum(const Vector& e) {
  const Index n = e.size();
  const double mean = e.mean();
  std::vector<double> mag(static_cast<std::size_t>(n / 2 + 1));
  for (Index k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (Index t = 0; t < n; ++t)
      acc += (e(t) - mean) * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
    mag[static_cast<std::size_t>(k)] = std::abs(acc);
  }
  return mag;
}

std::vector<Index> oracle_points(const Vector& e, int w, int d, bool peaks) {
  return keypoint_oracle::points(e, w, d, peaks);
}

Vector sine_energy(Index n, double period, double offset = 5.0, double amp = 1.0, double phase = 0.0) {
  Vector e(n);
  for (Index i = 0; i < n; ++i)
    e(i) = offset + amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period + phase);
  return e;
}

void expect_sound(const Vector& e, const KeyPointSet& kp, int w, int d) {
  const Index n = e.size();
  for (bool peaks : {true, false}) {
    const auto& pts = peaks ? kp.peaks : kp.valleys;
    for (std::size_t a = 0; a < pts.size(); ++a) {
      const Index i = pts[a];
      ASSERT_GT(i, 0);
      ASSERT_LT(i, n - 1);
      if (a > 0) {
        EXPECT_GT(i, pts[a - 1]);
        EXPECT_GE(i - pts[a - 1], d);
      }
      for (Index j = std::max<Index>(0, i - w); j <= std::min<Index>(n - 1, i + w); ++j)
        EXPECT_TRUE(peaks ? e(i) >= e(j) : e(i) <= e(j)) << "i=" << i << " j=" << j;
    }
  }
}

}  // namespace

TEST(Energy, SumOfAccelerometerSquares) {
  Matrix x = Matrix::Zero(3, 6);
  x.row(0) << 1, 2, 2, 7, 7, 7;
  const Vector e = energy_series(SampleWindow{x, std::nullopt}, default_layout());
  EXPECT_DOUBLE_EQ(e(0), 9.0);
  EXPECT_DOUBLE_EQ(e(1), 0.0);
}

TEST(Energy, MatchesLoopOracle) {
  Rng rng(3);
  std::normal_distribution<double> nd;
  const Matrix x = Matrix::NullaryExpr(120, 6, [&] { return nd(rng); });
  const Vector e = energy_series(SampleWindow{x, std::nullopt}, default_layout());
  for (Index i = 0; i < 120; ++i) {
    double s = 0;
    for (Index c = 0; c < 3; ++c) s += x(i, c) * x(i, c);
    EXPECT_NEAR(e(i), s, 1e-14);
    EXPECT_GE(e(i), 0.0);
  }
}

TEST(Energy, NeedsAccelerometer) {
  const ChannelLayout gyro_only{{SensorKind::Gyroscope, 0}, {SensorKind::Gyroscope, 1}, {SensorKind::Gyroscope, 2}};
  EXPECT_THROW(energy_series(SampleWindow{Matrix::Zero(4, 3), std::nullopt}, gyro_only), ValidationError);
}

TEST(KeyPoints, MonotoneSeriesHasNone) {
  Vector e = Vector::LinSpaced(120, 0.0, 1.0);
  EXPECT_TRUE(detect_key_points(e).empty());
}

TEST(KeyPoints, TriangularPulse) {
  Vector e(120);
  for (Index i = 0; i < 120; ++i) e(i) = 100.0 - static_cast<double>(std::abs(i - 60));
  const auto kp = detect_key_points(e);
  EXPECT_EQ(kp.peaks, std::vector<Index>{60});
}

TEST(KeyPoints, SinePeriodForty) {
  const Vector e = sine_energy(120, 40.0, 5.0, 1.0, 0.3);
  const auto kp = detect_key_points(e, 5, 10);
  ASSERT_EQ(kp.peaks.size(), 3u);
  for (std::size_t i = 1; i < 3; ++i) EXPECT_NEAR(static_cast<double>(kp.peaks[i] - kp.peaks[i - 1]), 40.0, 1.0);
  EXPECT_EQ(kp.peaks, oracle_points(e, 5, 10, true));
  EXPECT_EQ(kp.valleys, oracle_points(e, 5, 10, false));
}

TEST(KeyPoints, PlateauKeepsFirstIndex) {
  Vector e = Vector::Zero(40);
  for (Index i = 10; i <= 14; ++i) e(i) = 3.0;
  const auto kp = detect_key_points(e, 3, 5);
  EXPECT_EQ(kp.peaks, std::vector<Index>{10});
}

TEST(KeyPoints, ConstantSeriesIsEmpty) { EXPECT_TRUE(detect_key_points(Vector::Constant(60, 2.0)).empty()); }

TEST(KeyPoints, MatchesOracleOnRandomAndStructuredSeries) {
  Rng rng(17);
  std::uniform_int_distribution<int> small(0, 4);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 300; ++trial) {
    const int w = 1 + trial % 6, d = 1 + (trial * 7) % 15;
    Vector e(120);
    switch (trial % 3) {
      case 0: e = Vector::NullaryExpr(120, [&] { return nd(rng); }); break;
      case 1: e = Vector::NullaryExpr(120, [&] { return static_cast<double>(small(rng)); }); break;
      default: e = sine_energy(120, 10.0 + trial % 50, 2.0, 1.0, 0.1 * trial) + 0.05 * Vector::NullaryExpr(120, [&] { return nd(rng); });
    }
    const auto kp = detect_key_points(e, w, d);
    EXPECT_EQ(kp.peaks, oracle_points(e, w, d, true)) << "trial " << trial;
    EXPECT_EQ(kp.valleys, oracle_points(e, w, d, false)) << "trial " << trial;
    expect_sound(e, kp, w, d);
  }
}

TEST(KeyPoints, ShiftInvariantAndNegationSwaps) {
  Rng rng(5);
  std::uniform_int_distribution<int> v(-20, 20);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector e = Vector::NullaryExpr(120, [&] { return static_cast<double>(v(rng)); });
    const auto base = detect_key_points(e);
    const auto shifted = detect_key_points(Vector((e.array() + 7.0).matrix()));
    const auto negated = detect_key_points(Vector(-e));
    EXPECT_EQ(base.peaks, shifted.peaks);
    EXPECT_EQ(base.valleys, shifted.valleys);
    EXPECT_EQ(base.peaks, negated.valleys);
    EXPECT_EQ(base.valleys, negated.peaks);
  }
}

TEST(Spectrum, MatchesNaiveDft) {
  Rng rng(9);
  std::normal_distribution<double> nd;
  for (Index n : {4, 7, 64, 120, 121}) {
    const Vector e = Vector::NullaryExpr(n, [&] { return nd(rng); });
    const Vector fast = spectrum_magnitudes(std::span<const double>(e.data(), static_cast<std::size_t>(n)));
    const auto slow = naive_spectrum(e);
    ASSERT_EQ(static_cast<std::size_t>(fast.size()), slow.size());
    for (std::size_t k = 0; k < slow.size(); ++k) EXPECT_NEAR(fast(static_cast<Index>(k)), slow[k], 1e-9);
  }
}

TEST(MainPeriod, SineOfPeriodThirty) {
  const auto p = detect_main_period(sine_energy(120, 30.0));
  EXPECT_EQ(p.f_index, 4);
  EXPECT_DOUBLE_EQ(p.t_main, 30.0);
}

TEST(MainPeriod, DominantOfTwoSines) {
  const Vector e = sine_energy(120, 60.0, 0.0, 1.0) + sine_energy(120, 20.0, 0.0, 3.0);
  EXPECT_DOUBLE_EQ(detect_main_period(e).t_main, 20.0);
}

TEST(MainPeriod, ConstantHasNoPeriod) { EXPECT_THROW(detect_main_period(Vector::Constant(120, 3.0)), NoPeriodError); }

TEST(MainPeriod, ExactForDividingPeriodsAndInvariantToAffine) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  for (double period : {2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 24.0, 30.0, 40.0, 60.0, 120.0}) {
    const Vector e = sine_energy(120, period, 1.0, 1.0, u(rng));
    const auto p = detect_main_period(e);
    EXPECT_DOUBLE_EQ(p.t_main, period);
    EXPECT_EQ(detect_main_period(Vector((3.5 * e.array() + 11.0).matrix())).f_index, p.f_index);
    EXPECT_GE(p.t_main, 2.0);
    EXPECT_LE(p.t_main, 120.0);
  }
}

TEST(MainPeriod, ArgmaxMatchesNaiveDft) {
  Rng rng(21);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    const Vector e = Vector::NullaryExpr(120, [&] { return nd(rng); });
    const auto mag = naive_spectrum(e);
    const auto best = std::max_element(mag.begin() + 1, mag.end()) - mag.begin();
    EXPECT_EQ(detect_main_period(e).f_index, best);
  }
}
