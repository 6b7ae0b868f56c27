#pragma once

#include "saga/container.hpp"

#include <cstdint>
#include <vector>

namespace saga {

/// Periodic accelerometer/gyroscope windows whose class is the motion period.
struct SyntheticSpec {
  int n_classes = 4;
  int windows_per_class = 100;
  std::vector<double> periods{20, 30, 40, 60};  // samples, one per class
  double noise = 0.0;                           // Gaussian std added to every channel
  std::uint64_t seed = 0;
  int window_length = 120;
};

void validate(const SyntheticSpec& spec);

struct SyntheticData {
  WindowSet set;
  std::vector<double> periods;  // ground truth per window
};

/// Windows are class-major (all of class 0, then class 1, ...). Each window
/// draws its own phase, amplitude and axis mix; the accelerometer carries a
/// 1 g offset on z so the energy series oscillates at the motion period.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace saga
