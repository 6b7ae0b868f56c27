#pragma once

#include "saga/types.hpp"

#include <filesystem>

namespace saga {

/// Window container (`.win`), all integers little-endian:
///
///     offset  size        field
///     0       8           magic "SAGAWIN1"
///     8       4           uint32 window length L
///     12      4           uint32 channel count D
///     16      8           uint64 window count N
///     24      D           uint8 channel code per column (kind * 3 + axis)
///     24 + D  N * L * D   float32 values, window-major then row-major
///
/// Labels live in a sidecar text file (`.labels`) holding one line per
/// window: a non-negative class id, or `-` for an unlabelled window.
struct WindowSet {
  Index window_length = 0;
  ChannelLayout layout;
  WindowList windows;
};

void write_windows(const std::filesystem::path& container, const WindowSet& set);
WindowSet read_windows(const std::filesystem::path& container);

/// Sidecar path for a container: `x.win` -> `x.labels`.
std::filesystem::path labels_path(const std::filesystem::path& container);

}  // namespace saga
