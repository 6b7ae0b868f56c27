#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace saga {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

enum class SensorKind : std::uint8_t { Accelerometer = 0, Gyroscope = 1, Magnetometer = 2 };

struct Channel {
  SensorKind kind = SensorKind::Accelerometer;
  int axis = 0;  // 0 = x, 1 = y, 2 = z

  friend bool operator==(const Channel&, const Channel&) = default;
};

using ChannelLayout = std::vector<Channel>;

/// Accelerometer xyz followed by gyroscope xyz.
ChannelLayout default_layout(bool with_magnetometer = false);

/// Column indices of the given sensor in layout order.
std::vector<Index> columns_of(const ChannelLayout& layout, SensorKind kind);

std::string to_string(SensorKind kind);
std::string to_string(const Channel& channel);

/// One fixed-length slice of normalized IMU readings (rows = time).
struct SampleWindow {
  Matrix values;
  std::optional<int> label;
};

using WindowList = std::vector<SampleWindow>;

}  // namespace saga
