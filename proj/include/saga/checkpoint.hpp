#pragma once

#include "saga/nets.hpp"

#include <filesystem>
#include <string>

namespace saga {

/// Checkpoint (`.ckpt`), little-endian:
///
///     magic "SAGACKPT" (8 bytes), uint32 tensor count
///     per tensor: uint32 name length, name bytes (ASCII),
///                 uint32 rows, uint32 cols, rows * cols float32 row-major
///
/// The encoder config travels next to it as key=value text (see
/// encoder_config_text), written to `<checkpoint>.cfg`.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

std::string encoder_config_text(const EncoderConfig& cfg);
EncoderConfig parse_encoder_config(const std::string& text);

}  // namespace saga
