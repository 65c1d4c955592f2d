// Independent reference implementations used as test oracles. Nothing here
// calls into the library's algorithms; only plain types are shared.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <vector>

#include "lpcc/nn.hpp"
#include "lpcc/types.hpp"

namespace oracle {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Shannon entropy of a Bernoulli(p) source, bits per symbol.
inline double binary_entropy(double p) { return -(p * std::log2(p) + (1 - p) * std::log2(1 - p)); }

/// Empirical order-0 entropy of a symbol sequence times its length.
template <typename T>
double empirical_bits(const std::vector<T>& symbols) {
  std::map<T, std::size_t> counts;
  for (const T& s : symbols) ++counts[s];
  double bits = 0.0;
  const double n = double(symbols.size());
  for (const auto& [s, c] : counts) bits -= double(c) * std::log2(double(c) / n);
  return bits;
}

/// Pixel-center ray direction, written out from the angle conventions.
inline std::array<double, 3> ray(const lpcc::SensorConfig& s, int row, int col) {
  const double pitch = (double(s.fov_up) - (row + 0.5) / s.height * (double(s.fov_up) - double(s.fov_down))) *
                       std::numbers::pi / 180.0;
  const double yaw = std::numbers::pi - (col + 0.5) / s.width * 2.0 * std::numbers::pi;
  return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch)};
}

/// Farthest point sampling recomputing every min-distance from scratch at
/// each step. Returns indices into `pts`.
inline std::vector<std::size_t> brute_fps(const std::vector<std::array<double, 3>>& pts, int count) {
  std::vector<std::size_t> chosen;
  if (pts.empty()) return chosen;
  chosen.push_back(0);
  while (int(chosen.size()) < count && chosen.size() < pts.size()) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double dmin = std::numeric_limits<double>::infinity();
      for (std::size_t c : chosen) {
        double d = 0.0;
        for (int a = 0; a < 3; ++a) d += (pts[i][a] - pts[c][a]) * (pts[i][a] - pts[c][a]);
        dmin = std::min(dmin, d);
      }
      if (dmin > best) {
        best = dmin;
        arg = i;
      }
    }
    chosen.push_back(arg);
  }
  return chosen;
}

/// Direct summation convolution with zero padding k/2.
inline lpcc::nn::Grid4 direct_conv(const lpcc::nn::Grid4& x, const lpcc::nn::Grid4& w, const lpcc::nn::Grid4& b,
                                   int stride) {
  const int k = w.h(), pad = k / 2;
  const int ho = (x.h() + 2 * pad - k) / stride + 1;
  const int wo = (x.w() + 2 * pad - k) / stride + 1;
  lpcc::nn::Grid4 y(x.n(), w.n(), ho, wo);
  for (int n = 0; n < x.n(); ++n)
    for (int co = 0; co < w.n(); ++co)
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
          double acc = b.data[std::size_t(co)];
          for (int ci = 0; ci < x.c(); ++ci)
            for (int u = 0; u < k; ++u)
              for (int v = 0; v < k; ++v) {
                const int yy = i * stride + u - pad, xx = j * stride + v - pad;
                if (yy < 0 || xx < 0 || yy >= x.h() || xx >= x.w()) continue;
                acc += double(w(co, ci, u, v)) * double(x(n, ci, yy, xx));
              }
          y(n, co, i, j) = float(acc);
        }
  return y;
}

/// Symmetric Chamfer: mean NN distance both ways, computed naively.
inline double brute_chamfer(const lpcc::PointCloud& P, const lpcc::PointCloud& Q) {
  auto directed = [](const lpcc::PointCloud& A, const lpcc::PointCloud& B) {
    double sum = 0.0;
    for (const auto& a : A.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& b : B.points) {
        const double dx = double(a.x()) - double(b.x());
        const double dy = double(a.y()) - double(b.y());
        const double dz = double(a.z()) - double(b.z());
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      sum += std::sqrt(best);
    }
    return sum / double(A.size());
  };
  return directed(P, Q) + directed(Q, P);
}

}  // namespace oracle
