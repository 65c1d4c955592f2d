// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lpcc/types.hpp"

namespace lpcc {

/// Reads a KITTI velodyne scan: 4 little-endian float32 per point
/// (x, y, z, intensity). Intensity is dropped.
PointCloud load_kitti_bin(const std::filesystem::path& path);

/// Writes the KITTI layout with zero intensity. Used for fixtures.
void save_kitti_bin(const PointCloud& cloud, const std::filesystem::path& path);

/// One "x y z" line per point, fixed 6 decimals.
void save_xyz(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud load_xyz(const std::filesystem::path& path);

/// Loads every .bin / .xyz file of a directory in lexicographic order.
std::vector<PointCloud> load_frame_dir(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Synthetic scenes

struct Box {
  Eigen::Vector3d center;
  Eigen::Vector3d size;
};

struct SceneParams {
  std::uint64_t seed = 0;
  int frame_count = 3;
  double sensor_speed = 1.0;  // meters per frame along +x
  double ground_height = 0.0;
  std::vector<Box> boxes;
  double dropout_rate = 0.0;
  /// Rays longer than this return nothing; 0 disables the limit.
  double max_range = 0.0;

  void validate() const;
};

/// Raycasts every pixel-center direction of `sensor` for each frame. Points
/// are expressed in the sensor frame.
std::vector<PointCloud> generate_scene(const SceneParams& params, const SensorConfig& sensor);

/// Per-frame hit map of the raycaster before dropout, H*W row-major.
std::vector<std::vector<std::uint8_t>> scene_hit_maps(const SceneParams& params,
                                                      const SensorConfig& sensor);

/// A street-like world: ground plane plus rows of boxes on both sides of the
/// sensor track, laid out pseudo-randomly from `seed`.
SceneParams make_street_scene(std::uint64_t seed, int frame_count, double dropout_rate = 0.02,
                              double max_range = 60.0);

}  // namespace lpcc
