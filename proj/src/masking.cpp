#include "saga/masking.hpp"

#include "saga/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace saga {

std::string to_string(MaskLevel level) {
  switch (level) {
    case MaskLevel::Sensor: return "sensor";
    case MaskLevel::Point: return "point";
    case MaskLevel::Subperiod: return "subperiod";
    case MaskLevel::Period: return "period";
  }
  return "?";
}

bool MaskSpec::contains(Index r, Index c) const {
  if (r < 0 || r >= rows || c < 0 || c >= cols) return false;
  if (level == MaskLevel::Sensor) return std::binary_search(columns.begin(), columns.end(), c);
  return r >= row_begin && r < row_end;
}

Index MaskSpec::cell_count() const {
  if (level == MaskLevel::Sensor) return static_cast<Index>(columns.size()) * rows;
  return std::max<Index>(0, row_end - row_begin) * cols;
}

std::vector<std::pair<Index, Index>> MaskSpec::cells() const {
  std::vector<std::pair<Index, Index>> out;
  out.reserve(static_cast<std::size_t>(cell_count()));
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      if (contains(r, c)) out.emplace_back(r, c);
  return out;
}

void validate(const MaskConfig& cfg, Index rows, Index cols) {
  if (cfg.n_axes < 0 || cfg.n_axes > cols) throw ValidationError("mask config: n_axes must lie in [0, D]");
  if (!(cfg.p_geo > 0.0 && cfg.p_geo < 1.0)) throw ValidationError("mask config: p_geo must lie in (0, 1)");
  if (cfg.l_max < 1 || cfg.l_max > rows) throw ValidationError("mask config: l_max must lie in [1, L_win]");
}

MaskSpec sensor_mask_spec(Index rows, Index cols, std::vector<Index> columns) {
  std::sort(columns.begin(), columns.end());
  columns.erase(std::unique(columns.begin(), columns.end()), columns.end());
  for (Index c : columns)
    if (c < 0 || c >= cols) throw ValidationError("sensor mask column out of range");
  MaskSpec spec;
  spec.level = MaskLevel::Sensor;
  spec.rows = rows;
  spec.cols = cols;
  spec.columns = std::move(columns);
  return spec;
}

MaskSpec row_mask_spec(MaskLevel level, Index rows, Index cols, Index begin, Index end) {
  if (level == MaskLevel::Sensor) throw ValidationError("row_mask_spec: sensor level masks columns");
  if (begin < 0 || end > rows || begin > end) throw ValidationError("row mask range out of bounds");
  MaskSpec spec;
  spec.level = level;
  spec.rows = rows;
  spec.cols = cols;
  spec.row_begin = begin;
  spec.row_end = end;
  return spec;
}

std::vector<Index> subperiod_boundaries(const KeyPointSet& keypoints, Index length) {
  std::vector<Index> b{0, length};
  b.insert(b.end(), keypoints.peaks.begin(), keypoints.peaks.end());
  b.insert(b.end(), keypoints.valleys.begin(), keypoints.valleys.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

std::vector<Index> period_boundaries(const MainPeriod& period, Index length) {
  const auto t = static_cast<Index>(std::llround(period.t_main));
  if (t < 2) throw ValidationError("period mask: period must be at least 2 samples");
  const Index n = std::max<Index>(1, length / t);
  std::vector<Index> b;
  for (Index i = 0; i < n; ++i) b.push_back(i * t);
  b.push_back(length);
  return b;
}

std::vector<double> span_length_pmf(double p, int l_max) {
  std::vector<double> pmf(static_cast<std::size_t>(l_max));
  for (int k = 1; k <= l_max; ++k) pmf[static_cast<std::size_t>(k - 1)] = std::pow(1.0 - p, k - 1) * p;
  const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  for (auto& v : pmf) v /= total;
  return pmf;
}

int draw_span_length(Rng& rng, double p, int l_max) {
  const auto pmf = span_length_pmf(p, l_max);
  std::discrete_distribution<int> dist(pmf.begin(), pmf.end());
  return dist(rng) + 1;
}

MaskedWindow mask_sensor(const Matrix& window, const MaskConfig& cfg, std::uint64_t seed) {
  if (cfg.n_axes < 0 || cfg.n_axes > window.cols()) throw ValidationError("mask_sensor: n_axes exceeds D");
  std::vector<Index> order(static_cast<std::size_t>(window.cols()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // partial Fisher-Yates: the first n_axes entries are a uniform draw without replacement
  for (int i = 0; i < cfg.n_axes; ++i) {
    std::uniform_int_distribution<Index> pick(i, window.cols() - 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
  }
  order.resize(static_cast<std::size_t>(cfg.n_axes));
  return apply_mask(window, sensor_mask_spec(window.rows(), window.cols(), std::move(order)));
}

MaskedWindow mask_point(const Matrix& window, const MaskConfig& cfg, std::uint64_t seed) {
  validate(cfg, window.rows(), window.cols());
  Rng rng(seed);
  const int length = draw_span_length(rng, cfg.p_geo, cfg.l_max);
  std::uniform_int_distribution<Index> start(0, window.rows() - 1);
  const Index s = start(rng);
  return apply_mask(window,
                    row_mask_spec(MaskLevel::Point, window.rows(), window.cols(), s, std::min(s + length, window.rows())));
}

namespace {

MaskedWindow mask_segment(MaskLevel level, const Matrix& window, const std::vector<Index>& bounds,
                          std::uint64_t seed) {
  Rng rng(seed);
  const auto segments = static_cast<Index>(bounds.size()) - 1;
  std::uniform_int_distribution<Index> pick(0, segments - 1);
  const Index i = pick(rng);
  return apply_mask(window, row_mask_spec(level, window.rows(), window.cols(), bounds[static_cast<std::size_t>(i)],
                                          bounds[static_cast<std::size_t>(i + 1)]));
}

MaskedWindow fallback_mask(MaskLevel level, const Matrix& window, const MaskConfig& cfg, std::uint64_t seed) {
  auto out = mask_point(window, cfg, seed);
  out.spec.level = level;
  out.spec.fallback = true;
  return out;
}

}  // namespace

MaskedWindow mask_subperiod(const Matrix& window, const KeyPointSet& keypoints, std::uint64_t seed,
                            const MaskConfig& cfg) {
  if (keypoints.empty()) return fallback_mask(MaskLevel::Subperiod, window, cfg, seed);
  return mask_segment(MaskLevel::Subperiod, window, subperiod_boundaries(keypoints, window.rows()), seed);
}

MaskedWindow mask_period(const Matrix& window, const std::optional<MainPeriod>& period, std::uint64_t seed,
                         const MaskConfig& cfg) {
  if (!period) return fallback_mask(MaskLevel::Period, window, cfg, seed);
  return mask_segment(MaskLevel::Period, window, period_boundaries(*period, window.rows()), seed);
}

WindowSemantics analyze_window(const Matrix& values, const ChannelLayout& layout, int w, int d) {
  const auto cols = columns_of(layout, SensorKind::Accelerometer);
  const Vector e = energy_series(values, std::span<const Index>(cols));
  WindowSemantics s;
  s.keypoints = detect_key_points(e, w, d);
  try {
    s.period = detect_main_period(e);
  } catch (const NoPeriodError&) {
    s.period.reset();
  }
  return s;
}

MaskedWindow mask_level(MaskLevel level, const Matrix& window, const WindowSemantics& semantics,
                        const MaskConfig& cfg, std::uint64_t seed) {
  switch (level) {
    case MaskLevel::Sensor: return mask_sensor(window, cfg, seed);
    case MaskLevel::Point: return mask_point(window, cfg, seed);
    case MaskLevel::Subperiod: return mask_subperiod(window, semantics.keypoints, seed, cfg);
    case MaskLevel::Period: return mask_period(window, semantics.period, seed, cfg);
  }
  throw ValidationError("unknown mask level");
}

}  // namespace saga
