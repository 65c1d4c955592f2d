// SPDX-License-Identifier: Apache-2.0

#include "lpcc/range_projection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lpcc/errors.hpp"

namespace lpcc {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
}  // namespace

void SensorConfig::validate() const {
  if (height < 1 || width < 1) throw ConfigError("sensor height and width must be >= 1");
  if (!(fov_down < fov_up)) throw ConfigError("fov_down must be below fov_up");
  if (height > 65535 || width > 65535) throw ConfigError("sensor dimensions exceed 16 bits");
}

RangeImage project(const PointCloud& cloud, const SensorConfig& sensor, ProjectionStats* stats) {
  sensor.validate();
  RangeImage image(sensor);
  ProjectionStats local;
  local.input_points = cloud.size();
  const double fov = double(sensor.fov_up) - double(sensor.fov_down);
  for (const auto& p : cloud.points) {
    const double x = p.x(), y = p.y(), z = p.z();
    const double r = std::sqrt(x * x + y * y + z * z);
    if (r == 0.0) {
      ++local.at_origin;
      continue;
    }
    const double yaw = std::atan2(y, x);
    const double pitch_deg = std::asin(std::clamp(z / r, -1.0, 1.0)) / kDeg;
    if (pitch_deg < sensor.fov_down || pitch_deg > sensor.fov_up) {
      ++local.out_of_fov;
      continue;
    }
    int col = static_cast<int>(std::floor((1.0 - (yaw + kPi) / (2.0 * kPi)) * sensor.width));
    col = std::clamp(col, 0, sensor.width - 1);
    int row = static_cast<int>(std::floor((sensor.fov_up - pitch_deg) / fov * sensor.height));
    row = std::clamp(row, 0, sensor.height - 1);
    float& cell = image.values(row, col);
    const float rf = static_cast<float>(r);
    if (cell == 0.0f) {
      cell = rf;
    } else {
      ++local.collisions;
      cell = std::min(cell, rf);
    }
  }
  if (stats) *stats = local;
  return image;
}

Eigen::Vector3d pixel_direction(const SensorConfig& sensor, int row, int col) {
  const double fov = double(sensor.fov_up) - double(sensor.fov_down);
  const double pitch = (double(sensor.fov_up) - (row + 0.5) / sensor.height * fov) * kDeg;
  const double yaw = kPi - (col + 0.5) / sensor.width * 2.0 * kPi;
  return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch)};
}

PointCloud backproject(const RangeImage& image) {
  PointCloud cloud;
  cloud.points.reserve(image.valid_count());
  for (int i = 0; i < image.rows(); ++i) {
    for (int j = 0; j < image.cols(); ++j) {
      const float r = image.values(i, j);
      if (r == 0.0f) continue;
      const Eigen::Vector3d p = double(r) * pixel_direction(image.sensor, i, j);
      cloud.points.emplace_back(float(p.x()), float(p.y()), float(p.z()));
    }
  }
  return cloud;
}

Mask extract_mask(const RangeImage& image) {
  return (image.values != 0.0f).cast<std::uint8_t>();
}

}  // namespace lpcc
