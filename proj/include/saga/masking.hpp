#pragma once

#include "saga/random.hpp"
#include "saga/semantics.hpp"
#include "saga/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace saga {

enum class MaskLevel : std::uint8_t { Sensor = 0, Point = 1, Subperiod = 2, Period = 3 };

constexpr std::array<MaskLevel, 4> kMaskLevels{MaskLevel::Sensor, MaskLevel::Point, MaskLevel::Subperiod,
                                               MaskLevel::Period};

std::string to_string(MaskLevel level);

/// Cells zeroed by one masking task. Sensor masks cover whole columns; every
/// other level covers the contiguous row range [row_begin, row_end) across all
/// columns.
struct MaskSpec {
  MaskLevel level = MaskLevel::Point;
  Index rows = 0;
  Index cols = 0;
  std::vector<Index> columns;  // sensor level only, sorted
  Index row_begin = 0;
  Index row_end = 0;
  bool fallback = false;  // semantic level replaced by a point-level span

  bool contains(Index r, Index c) const;
  Index cell_count() const;
  bool empty() const { return cell_count() == 0; }
  std::vector<std::pair<Index, Index>> cells() const;
};

enum class MaskFallback : std::uint8_t { PointSpan };

struct MaskConfig {
  int n_axes = 1;
  double p_geo = 0.2;
  int l_max = 12;
  MaskFallback fallback = MaskFallback::PointSpan;
};

void validate(const MaskConfig& cfg, Index rows, Index cols);

template <typename Scalar>
struct MaskedWindowT {
  MatrixX<Scalar> values;
  MaskSpec spec;
};
using MaskedWindow = MaskedWindowT<double>;

/// Zeroes exactly the cells of `spec`.
template <typename Derived>
MaskedWindowT<typename Derived::Scalar> apply_mask(const Eigen::MatrixBase<Derived>& values, const MaskSpec& spec) {
  MaskedWindowT<typename Derived::Scalar> out{values, spec};
  if (spec.level == MaskLevel::Sensor) {
    for (Index c : spec.columns) out.values.col(c).setZero();
  } else if (spec.row_end > spec.row_begin) {
    out.values.middleRows(spec.row_begin, spec.row_end - spec.row_begin).setZero();
  }
  return out;
}

MaskSpec sensor_mask_spec(Index rows, Index cols, std::vector<Index> columns);
MaskSpec row_mask_spec(MaskLevel level, Index rows, Index cols, Index begin, Index end);

/// Boundaries {0} ∪ peaks ∪ valleys ∪ {L}, sorted and deduplicated.
std::vector<Index> subperiod_boundaries(const KeyPointSet& keypoints, Index length);

/// Segment boundaries for period T = round(t_main): [iT, (i+1)T) with the
/// trailing remainder merged into the last segment.
std::vector<Index> period_boundaries(const MainPeriod& period, Index length);

/// Probability of span length k in [1, l_max] for the geometric law clipped
/// and renormalised to that range.
std::vector<double> span_length_pmf(double p, int l_max);
int draw_span_length(Rng& rng, double p, int l_max);

MaskedWindow mask_sensor(const Matrix& window, const MaskConfig& cfg, std::uint64_t seed);
MaskedWindow mask_point(const Matrix& window, const MaskConfig& cfg, std::uint64_t seed);
MaskedWindow mask_subperiod(const Matrix& window, const KeyPointSet& keypoints, std::uint64_t seed,
                            const MaskConfig& cfg);
MaskedWindow mask_period(const Matrix& window, const std::optional<MainPeriod>& period, std::uint64_t seed,
                         const MaskConfig& cfg);

/// Window semantics precomputed once per window for repeated masking.
struct WindowSemantics {
  KeyPointSet keypoints;
  std::optional<MainPeriod> period;
};

WindowSemantics analyze_window(const Matrix& values, const ChannelLayout& layout, int w = 5, int d = 10);

MaskedWindow mask_level(MaskLevel level, const Matrix& window, const WindowSemantics& semantics,
                        const MaskConfig& cfg, std::uint64_t seed);

}  // namespace saga
