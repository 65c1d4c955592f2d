// SPDX-License-Identifier: Apache-2.0

#include "lpcc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lpcc/errors.hpp"

namespace lpcc {

namespace {

double sq_dist(const Point3& a, const Point3& b) {
  const double dx = double(a.x()) - double(b.x());
  const double dy = double(a.y()) - double(b.y());
  const double dz = double(a.z()) - double(b.z());
  return dx * dx + dy * dy + dz * dz;
}

/// Uniform grid over the bounding box of a cloud, cells stored CSR-style.
class GridIndex {
 public:
  explicit GridIndex(const PointCloud& cloud) : cloud_(cloud) {
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (const auto& p : cloud.points) {
      lo = lo.cwiseMin(p.cast<double>());
      hi = hi.cwiseMax(p.cast<double>());
    }
    lo_ = lo;
    const Eigen::Vector3d extent = (hi - lo).cwiseMax(1e-9);
    // About one point per cell for a surface-like cloud.
    const double n = double(cloud.size());
    cell_ = std::max(extent.maxCoeff() / std::max(1.0, std::sqrt(n)), 1e-6);
    const double max_cells = 4.0 * n + 64.0;
    for (;;) {
      double cells = 1.0;
      for (int a = 0; a < 3; ++a) cells *= std::floor(extent[a] / cell_) + 1;
      if (cells <= max_cells) break;
      cell_ *= std::max(1.01, std::cbrt(cells / max_cells));
    }
    for (int a = 0; a < 3; ++a) dims_[a] = int(std::floor(extent[a] / cell_) + 1);
    const std::size_t cells = std::size_t(dims_[0]) * dims_[1] * dims_[2];
    start_.assign(cells + 1, 0);
    std::vector<std::size_t> cell_of(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      cell_of[i] = linear(cell_coord(cloud.points[i]));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) start_[c + 1] += start_[c];
    items_.resize(cloud.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < cloud.size(); ++i) items_[fill[cell_of[i]]++] = std::uint32_t(i);
  }

  double nearest_sq(const Point3& p) const {
    const std::array<int, 3> c = unclamped_coord(p);
    // Rings closer than `first` lie entirely outside the grid; after `last`
    // every cell has been visited.
    int first = 0, last = 0;
    for (int a = 0; a < 3; ++a) {
      first = std::max({first, -c[a], c[a] - (dims_[a] - 1)});
      last = std::max({last, std::abs(c[a]), std::abs(dims_[a] - 1 - c[a])});
    }
    double best = std::numeric_limits<double>::infinity();
    for (int k = first; k <= last; ++k) {
      visit_ring(c, k, p, best);
      const double reach = double(k) * cell_;
      if (best <= reach * reach) break;
    }
    return best;
  }

 private:
  std::array<int, 3> unclamped_coord(const Point3& p) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((double(p[a]) - lo_[a]) / cell_);
      c[a] = int(std::clamp(f, -1e6, 1e6));
    }
    return c;
  }
  std::array<int, 3> cell_coord(const Point3& p) const {
    auto c = unclamped_coord(p);
    for (int a = 0; a < 3; ++a) c[a] = std::clamp(c[a], 0, dims_[a] - 1);
    return c;
  }
  std::size_t linear(const std::array<int, 3>& c) const {
    return (std::size_t(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
  }

  void visit_cell(int x, int y, int z, const Point3& p, double& best) const {
    if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) return;
    const std::size_t cell = linear({x, y, z});
    for (std::size_t i = start_[cell]; i < start_[cell + 1]; ++i) {
      best = std::min(best, sq_dist(p, cloud_.points[items_[i]]));
    }
  }

  void visit_ring(const std::array<int, 3>& c, int k, const Point3& p, double& best) const {
    const int x0 = std::max(c[0] - k, 0), x1 = std::min(c[0] + k, dims_[0] - 1);
    const int y0 = std::max(c[1] - k, 0), y1 = std::min(c[1] + k, dims_[1] - 1);
    const int z0 = std::max(c[2] - k, 0), z1 = std::min(c[2] + k, dims_[2] - 1);
    for (int z = z0; z <= z1; ++z) {
      for (int y = y0; y <= y1; ++y) {
        if (std::abs(z - c[2]) == k || std::abs(y - c[1]) == k) {
          for (int x = x0; x <= x1; ++x) visit_cell(x, y, z, p, best);
        } else {
          visit_cell(c[0] - k, y, z, p, best);
          if (k > 0) visit_cell(c[0] + k, y, z, p, best);
        }
      }
    }
  }

  const PointCloud& cloud_;
  Eigen::Vector3d lo_;
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::size_t> start_;
  std::vector<std::uint32_t> items_;
};

}  // namespace

double directed_chamfer(const PointCloud& from, const PointCloud& to, ChamferMode mode) {
  if (from.empty() || to.empty()) throw UndefinedMetric("Chamfer distance of an empty cloud");
  double sum = 0.0;
  if (mode == ChamferMode::brute_force) {
    for (const auto& p : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to.points) best = std::min(best, sq_dist(p, q));
      sum += std::sqrt(best);
    }
  } else {
    const GridIndex index(to);
    for (const auto& p : from.points) sum += std::sqrt(index.nearest_sq(p));
  }
  return sum / double(from.size());
}

double chamfer(const PointCloud& P, const PointCloud& Q, ChamferMode mode) {
  if (P.empty() || Q.empty()) throw UndefinedMetric("Chamfer distance of an empty cloud");
  return directed_chamfer(P, Q, mode) + directed_chamfer(Q, P, mode);
}

RangeMetrics range_metrics(const RangeImage& pred, const RangeImage& truth, const Mask& mask, double tau) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols() || mask.rows() != truth.rows() ||
      mask.cols() != truth.cols()) {
    throw ShapeError("range_metrics: shape mismatch");
  }
  double abs_sum = 0.0, sq_sum = 0.0;
  std::size_t n = 0, hits = 0;
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      if (!mask(i, j)) continue;
      const double e = std::abs(double(pred.values(i, j)) - double(truth.values(i, j)));
      abs_sum += e;
      sq_sum += e * e;
      hits += e < tau ? 1 : 0;
      ++n;
    }
  }
  if (n == 0) throw UndefinedMetric("range metrics over an empty mask");
  return {abs_sum / double(n), std::sqrt(sq_sum / double(n)), double(hits) / double(n)};
}

double bpp(std::uint64_t total_bits, std::uint64_t original_point_count) {
  if (original_point_count == 0) throw UndefinedMetric("bits per point of an empty cloud");
  return double(total_bits) / double(original_point_count);
}

}  // namespace lpcc
