// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "lpcc/types.hpp"

namespace lpcc {

/// Container id of the region-mean intra coder.
inline constexpr std::uint8_t kIntraCodecRegionMean = 1;

struct PixelIndex {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

struct IntraPayload {
  float q = 0.05f;
  std::vector<PixelIndex> seeds;
  std::vector<float> region_means;
  std::vector<std::uint8_t> mask_chunk;
  std::vector<std::uint8_t> residual_stream;  // one signed symbol per valid pixel
};

/// Deterministic farthest point sampling over the backprojected valid pixels.
/// Starts at the first valid pixel in row-major order; ties go to the lower
/// row-major index.
std::vector<PixelIndex> fps_seeds(const RangeImage& image, int count);

/// Region label per pixel (-1 for invalid): the seed whose ray direction is
/// closest to the pixel's, lower seed index on ties. Depends only on data
/// the decoder has.
Grid<int> assign_regions(const Mask& mask, const SensorConfig& sensor, const std::vector<PixelIndex>& seeds);

IntraPayload intra_encode(const RangeImage& image, int seed_count, float q);
RangeImage intra_decode(const IntraPayload& payload, const SensorConfig& sensor, int frame_index = 0);

}  // namespace lpcc
