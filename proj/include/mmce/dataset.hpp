#pragma once

#include <string>
#include <vector>

#include "mmce/denoiser.hpp"
#include "mmce/types.hpp"

namespace mmce {

// On-disk dataset of (C_alpha, G) image pairs:
//   magic "MCDS", u32 version, u32 g_r, u32 g_t, u32 k_p, u64 pair count,
//   then pair count * 2 * g_r * g_t little-endian float32 values
//   (input image then label image, column-major), u64 FNV-1a checksum.
struct Dataset {
  int g_r = 0, g_t = 0, k_p = 0;
  std::vector<TrainingPair> pairs;
};

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace mmce
