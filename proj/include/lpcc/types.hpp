// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace lpcc {

/// Row-major dense 2D grid; the storage type for range images, masks and
/// residual frames.
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Point3 = Eigen::Vector3f;

struct PointCloud {
  std::vector<Point3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Spherical projection parameters of a spinning LiDAR.
struct SensorConfig {
  int height = 64;
  int width = 2048;
  float fov_up = 2.0f;      // degrees
  float fov_down = -24.9f;  // degrees
  float sensor_height = 1.73f;

  void validate() const;
  float fov_deg() const { return fov_up - fov_down; }
};

/// Binary validity grid, 1 where the range image holds a return.
using Mask = Grid<std::uint8_t>;

/// Signed per-pixel difference between a frame and its prediction, meters.
using ResidualFrame = Grid<float>;

struct RangeImage {
  Grid<float> values;
  SensorConfig sensor;
  int frame_index = 0;

  RangeImage() = default;
  RangeImage(const SensorConfig& s, int frame = 0)
      : values(Grid<float>::Zero(s.height, s.width)), sensor(s), frame_index(frame) {}

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  std::size_t valid_count() const { return static_cast<std::size_t>((values != 0.0f).count()); }
};

}  // namespace lpcc
