#pragma once

#include "blindloom/tensor.hpp"

#include <filesystem>

namespace blindloom {

// "BLTC1" checkpoint: magic, then per parameter in sorted name order
// u32 name length, name bytes, 4 u32 extents, f32 payload. Little-endian.
// Optimizer moments are not persisted.
void write_checkpoint(const std::filesystem::path& path, const ParamSet<float>& params);
ParamSet<float> read_checkpoint(const std::filesystem::path& path);

}  // namespace blindloom
