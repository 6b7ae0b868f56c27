#pragma once

#include "saga/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace saga {

constexpr double kStandardGravity = 9.80665;

/// A contiguous IMU recording before windowing (rows = samples, in sensor units).
struct RawRecording {
  Matrix samples;
  double rate_hz = 0.0;
  ChannelLayout layout;
  std::optional<int> label;
  std::optional<std::string> subject;
  std::optional<std::string> session;

  Index size() const { return samples.rows(); }
  Index dims() const { return samples.cols(); }
};

/// Maps CSV columns onto sensor channels.
///
/// Schema files are key=value text:
///
///     rate_hz = 100
///     acc_x = acc.x
///     gyro_z = gyro.z
///     label_column = activity      # optional, default "label"
///     subject_column = user        # optional, default "subject"
///     session_column = run         # optional, default "session"
///
/// Every other key names a CSV column and its value is `<acc|gyro|mag>.<x|y|z>`.
/// Channels keep the order in which they appear in the schema file.
struct CsvSchema {
  double rate_hz = 0.0;
  std::vector<std::pair<std::string, Channel>> channels;
  std::string label_column = "label";
  std::string subject_column = "subject";
  std::string session_column = "session";

  ChannelLayout layout() const;
};

CsvSchema parse_schema(const std::string& text);
CsvSchema load_schema(const std::filesystem::path& path);

/// Throws if the layout is not made of complete xyz triples (D = 3 * N_se).
void validate_layout(const ChannelLayout& layout);

/// Reads one CSV file. Rows are grouped by (subject, session); within a group a
/// change of label starts a new recording. Sample order is preserved.
std::vector<RawRecording> load_recordings(const std::filesystem::path& path, const CsvSchema& schema);
std::vector<RawRecording> parse_recordings(std::istream& in, const CsvSchema& schema);

/// Accelerometer / g, magnetometer rescaled to unit norm per sample, gyroscope
/// untouched. Zero-norm magnetometer samples stay zero and are counted in
/// `zero_norm_count` when given.
RawRecording normalize(const RawRecording& rec, std::size_t* zero_norm_count = nullptr);

/// Downsampling only. Integer ratios decimate; other ratios pick the nearest
/// source sample on the target time grid (earlier sample on exact ties).
RawRecording resample(const RawRecording& rec, double target_hz);

/// Consecutive non-overlapping windows; the trailing remainder is dropped.
WindowList slice_windows(const RawRecording& rec, Index window_length);

struct SplitRatios {
  double train = 0.6;
  double valid = 0.2;
  double test = 0.2;
};

struct DatasetSplit {
  WindowList train, valid, test;
  std::vector<std::size_t> train_index, valid_index, test_index;
  std::uint64_t seed = 0;
};

DatasetSplit split_dataset(const WindowList& windows, const SplitRatios& ratios, std::uint64_t seed);

/// Sizes produced by split_dataset for `n` windows.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

/// Stratified per-class draw of ceil(rate * n_c) windows. The result keeps
/// input order, and for a fixed seed a smaller rate yields a subset.
WindowList subsample_labels(const WindowList& train, double rate, std::uint64_t seed);
std::vector<std::size_t> subsample_label_indices(const WindowList& train, double rate, std::uint64_t seed);

}  // namespace saga
