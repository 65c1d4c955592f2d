// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "lpcc/types.hpp"

namespace lpcc {

enum class ChamferMode { indexed, brute_force };

/// Symmetric Chamfer distance: mean nearest-neighbour distance from P to Q
/// plus the same from Q to P, unsquared, in meters. Both modes evaluate the
/// same per-point double-precision distances and sum them in the same order,
/// so they agree exactly.
double chamfer(const PointCloud& P, const PointCloud& Q, ChamferMode mode = ChamferMode::indexed);

/// Mean nearest-neighbour distance from every point of `from` to `to`.
double directed_chamfer(const PointCloud& from, const PointCloud& to, ChamferMode mode = ChamferMode::indexed);

struct RangeMetrics {
  double l1 = 0.0;
  double rmse = 0.0;
  double acc = 0.0;  // fraction with |error| < tau
};

inline constexpr double kDefaultAccTau = 0.1;

/// Error statistics over the pixels where `mask` is 1.
RangeMetrics range_metrics(const RangeImage& pred, const RangeImage& truth, const Mask& mask,
                           double tau = kDefaultAccTau);

/// Bits per point of the original (pre-projection) cloud.
double bpp(std::uint64_t total_bits, std::uint64_t original_point_count);

struct RDPoint {
  double bpp = 0.0;
  double chamfer = 0.0;
  double rmse = 0.0;
  double acc = 0.0;
};

}  // namespace lpcc
