#pragma once

#include <cstdint>
#include <filesystem>

#include "cord/model/params.hpp"

namespace cord::model {

// Binary layout (little-endian):
//   "CORDCKPT" | u32 version | u32 precision (4 = f32, 8 = f64) | u32 count |
//   count x { u32 name_len | name | u32 rank | rank x u64 dim | raw scalars }
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Real>
void save_checkpoint(const ModelParams<Real>& params, const std::filesystem::path& path);

// Loads into `params`, whose config fixes the expected names and shapes.
// Throws IoError on I/O failure and ConfigError on a version, precision,
// name or shape mismatch.
template <typename Real>
void load_checkpoint(ModelParams<Real>& params, const std::filesystem::path& path);

}  // namespace cord::model
