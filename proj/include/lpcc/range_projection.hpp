// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "lpcc/types.hpp"

namespace lpcc {

struct ProjectionStats {
  std::size_t input_points = 0;
  std::size_t out_of_fov = 0;  // discarded, pitch outside [fov_down, fov_up]
  std::size_t collisions = 0;  // points that lost the nearest-wins contest
  std::size_t at_origin = 0;
};

/// Spherical projection; on collision the nearest return wins, untouched
/// pixels are 0.
RangeImage project(const PointCloud& cloud, const SensorConfig& sensor, ProjectionStats* stats = nullptr);

/// One point per valid pixel in row-major order, placed along the pixel-center ray.
PointCloud backproject(const RangeImage& image);

/// Unit ray direction through the center of pixel (row, col).
Eigen::Vector3d pixel_direction(const SensorConfig& sensor, int row, int col);

/// 0 where the range is exactly 0, 1 elsewhere.
Mask extract_mask(const RangeImage& image);

template <typename Derived>
std::size_t popcount(const Eigen::ArrayBase<Derived>& mask) {
  return static_cast<std::size_t>((mask != 0).count());
}

}  // namespace lpcc
