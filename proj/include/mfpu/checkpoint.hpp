#pragma once

// Binary checkpoint, all integers little-endian u32:
//   "MFPU" | version | tag length, tag bytes | N | B | d | parameter count
//   per parameter: name length, name bytes | rank | extents | f32 values

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mfpu/model.hpp"

namespace mfpu {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> checkpoint_encode(const Model<float>& model);
// Rebuilds the model from its header and copies the stored values in. Throws
// FormatError on bad magic, version, tag, truncation or a parameter list that
// differs from the freshly built topology.
Model<float> checkpoint_decode(const std::vector<std::uint8_t>& bytes);

void checkpoint_write(const Model<float>& model, const std::filesystem::path& path);
Model<float> checkpoint_read(const std::filesystem::path& path);
// Reads into an existing model; the stored architecture and (N, B, d) must
// match its configuration.
void checkpoint_load_into(Model<float>& model, const std::filesystem::path& path);

}  // namespace mfpu
