// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lpcc/errors.hpp"
#include "lpcc/pointcloud_io.hpp"
#include "lpcc/rng.hpp"

namespace lpcc {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Slab test; returns the entry distance or +inf. Boxes that contain the ray
// origin are ignored.
double intersect_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Box& box) {
  const Eigen::Vector3d lo = box.center - 0.5 * box.size;
  const Eigen::Vector3d hi = box.center + 0.5 * box.size;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_near <= 0.0) return std::numeric_limits<double>::infinity();
  return t_near;
}

struct FrameCast {
  PointCloud cloud;
  std::vector<std::uint8_t> hits;
};

FrameCast raycast_frame(const SceneParams& params, const SensorConfig& sensor, int t) {
  const Eigen::Vector3d origin(t * params.sensor_speed, 0.0, sensor.sensor_height);
  Rng rng(params.seed, static_cast<std::uint64_t>(t));
  FrameCast out;
  out.hits.assign(static_cast<std::size_t>(sensor.height) * sensor.width, 0);
  const double fov = double(sensor.fov_up) - double(sensor.fov_down);
  for (int i = 0; i < sensor.height; ++i) {
    const double pitch = (double(sensor.fov_up) - (i + 0.5) / sensor.height * fov) * kDeg;
    for (int j = 0; j < sensor.width; ++j) {
      const double yaw = std::numbers::pi - (j + 0.5) / sensor.width * 2.0 * std::numbers::pi;
      const Eigen::Vector3d dir(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
                                std::sin(pitch));
      double best = std::numeric_limits<double>::infinity();
      if (dir.z() < 0.0 && origin.z() > params.ground_height) {
        best = (params.ground_height - origin.z()) / dir.z();
      }
      for (const auto& box : params.boxes) best = std::min(best, intersect_box(origin, dir, box));
      const double u = rng.uniform();  // one draw per pixel keeps frames aligned
      if (!std::isfinite(best)) continue;
      if (params.max_range > 0.0 && best > params.max_range) continue;
      out.hits[static_cast<std::size_t>(i) * sensor.width + j] = 1;
      if (u < params.dropout_rate) continue;
      const Eigen::Vector3d p = best * dir;
      out.cloud.points.emplace_back(float(p.x()), float(p.y()), float(p.z()));
    }
  }
  return out;
}

}  // namespace

void SceneParams::validate() const {
  if (frame_count < 3) throw ConfigError("scene needs at least 3 frames");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0,1)");
  if (max_range < 0.0) throw ConfigError("max_range must be >= 0");
  for (const auto& b : boxes) {
    if ((b.size.array() <= 0.0).any()) throw ConfigError("box sizes must be positive");
  }
}

std::vector<PointCloud> generate_scene(const SceneParams& params, const SensorConfig& sensor) {
  params.validate();
  sensor.validate();
  std::vector<PointCloud> frames;
  frames.reserve(static_cast<std::size_t>(params.frame_count));
  for (int t = 0; t < params.frame_count; ++t) frames.push_back(raycast_frame(params, sensor, t).cloud);
  return frames;
}

std::vector<std::vector<std::uint8_t>> scene_hit_maps(const SceneParams& params,
                                                      const SensorConfig& sensor) {
  params.validate();
  sensor.validate();
  std::vector<std::vector<std::uint8_t>> maps;
  for (int t = 0; t < params.frame_count; ++t) maps.push_back(raycast_frame(params, sensor, t).hits);
  return maps;
}

SceneParams make_street_scene(std::uint64_t seed, int frame_count, double dropout_rate,
                              double max_range) {
  SceneParams p;
  p.seed = seed;
  p.frame_count = frame_count;
  p.dropout_rate = dropout_rate;
  p.max_range = max_range;
  Rng rng(seed, 0x5ce7e);
  p.sensor_speed = rng.uniform(0.6, 1.4);
  const double x_end = frame_count * p.sensor_speed + 80.0;
  for (int side : {-1, 1}) {
    // Buildings.
    double x = -80.0 + rng.uniform(0.0, 6.0);
    while (x < x_end) {
      const double len = rng.uniform(4.0, 16.0);
      const double depth = rng.uniform(3.0, 8.0);
      const double offset = rng.uniform(7.0, 13.0);
      const double height = rng.uniform(2.5, 12.0);
      p.boxes.push_back({{x + 0.5 * len, side * (offset + 0.5 * depth), 0.5 * height},
                         {len, depth, height}});
      x += len + rng.uniform(1.0, 10.0);
    }
    // Parked cars and poles close to the track.
    x = -60.0 + rng.uniform(0.0, 10.0);
    while (x < x_end) {
      if (rng.uniform() < 0.35) {
        p.boxes.push_back({{x, side * rng.uniform(0.25, 1.0), 2.0}, {0.3, 0.3, 4.0}});
        p.boxes.back().center.y() += side * 4.5;
      } else {
        const double len = rng.uniform(3.5, 5.0);
        p.boxes.push_back({{x + 0.5 * len, side * rng.uniform(3.0, 4.5), 0.75}, {len, 1.8, 1.5}});
      }
      x += rng.uniform(6.0, 20.0);
    }
  }
  return p;
}

}  // namespace lpcc
