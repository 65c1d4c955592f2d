// SPDX-License-Identifier: Apache-2.0

#include "lpcc/intra_codec.hpp"

#include <cmath>
#include <limits>

#include "lpcc/entropy_models.hpp"
#include "lpcc/errors.hpp"
#include "lpcc/mask_codec.hpp"
#include "lpcc/range_projection.hpp"

namespace lpcc {

std::vector<PixelIndex> fps_seeds(const RangeImage& image, int count) {
  if (count < 1) throw ConfigError("seed count must be >= 1");
  std::vector<PixelIndex> pixels;
  for (int i = 0; i < image.rows(); ++i) {
    for (int j = 0; j < image.cols(); ++j) {
      if (image.values(i, j) != 0.0f) pixels.push_back({i, j});
    }
  }
  if (pixels.empty()) throw EmptyFrame("frame has no valid pixels");
  const PointCloud cloud = backproject(image);  // same row-major order as `pixels`
  const std::size_t n = pixels.size();
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(count), n);

  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<PixelIndex> seeds;
  std::size_t current = 0;
  while (true) {
    seeds.push_back(pixels[current]);
    min_d2[current] = -1.0;
    if (seeds.size() == want) break;
    const Eigen::Vector3d c = cloud.points[current].cast<double>();
    std::size_t best = 0;
    double best_d2 = -1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (min_d2[k] < 0.0) continue;
      const double d2 = (cloud.points[k].cast<double>() - c).squaredNorm();
      if (d2 < min_d2[k]) min_d2[k] = d2;
      if (min_d2[k] > best_d2) {
        best_d2 = min_d2[k];
        best = k;
      }
    }
    current = best;
  }
  return seeds;
}

Grid<int> assign_regions(const Mask& mask, const SensorConfig& sensor, const std::vector<PixelIndex>& seeds) {
  Grid<int> labels = Grid<int>::Constant(mask.rows(), mask.cols(), -1);
  if (seeds.empty()) return labels;
  Eigen::Matrix<double, 3, Eigen::Dynamic> dirs(3, static_cast<Eigen::Index>(seeds.size()));
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    dirs.col(static_cast<Eigen::Index>(s)) = pixel_direction(sensor, seeds[s].row, seeds[s].col);
  }
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      if (!mask(i, j)) continue;
      const Eigen::Vector3d d = pixel_direction(sensor, int(i), int(j));
      Eigen::Index best = 0;
      (dirs.transpose() * d).maxCoeff(&best);  // first maximum wins
      labels(i, j) = int(best);
    }
  }
  return labels;
}

namespace {

// Symbol whose float reconstruction lands closest to `target`.
std::int32_t closed_loop_symbol(float base, float target, double q) {
  const double s0 = std::nearbyint((double(target) - double(base)) / q);
  if (!(std::abs(s0) < 2147483647.0)) throw EncodeError("residual symbol overflow");
  auto recon_err = [&](double s) {
    const float v = float(double(base) + s * q);
    // Reconstructions must stay valid ranges.
    return v > 0.0f ? std::abs(double(v) - double(target)) : std::numeric_limits<double>::infinity();
  };
  double best = s0, best_err = recon_err(s0);
  for (double s : {s0 - 1.0, s0 + 1.0}) {
    const double e = recon_err(s);
    if (e < best_err) {
      best = s;
      best_err = e;
    }
  }
  return static_cast<std::int32_t>(best);
}

}  // namespace

IntraPayload intra_encode(const RangeImage& image, int seed_count, float q) {
  if (!(q > 0.0f) || !std::isfinite(q)) throw ConfigError("quantization step must be > 0");
  if (seed_count > 65535) throw ConfigError("seed count exceeds 16 bits");
  IntraPayload payload;
  payload.q = q;
  payload.seeds = fps_seeds(image, seed_count);
  const Mask mask = extract_mask(image);
  payload.mask_chunk = mask_encode(mask);
  const Grid<int> labels = assign_regions(mask, image.sensor, payload.seeds);

  const std::size_t S = payload.seeds.size();
  std::vector<double> sum(S, 0.0);
  std::vector<std::size_t> n(S, 0);
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    for (Eigen::Index j = 0; j < labels.cols(); ++j) {
      const int l = labels(i, j);
      if (l < 0) continue;
      sum[static_cast<std::size_t>(l)] += image.values(i, j);
      ++n[static_cast<std::size_t>(l)];
    }
  }
  payload.region_means.resize(S);
  for (std::size_t s = 0; s < S; ++s) payload.region_means[s] = static_cast<float>(sum[s] / double(n[s]));

  SignedSymbolCoder coder;
  RangeEncoder enc;
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    for (Eigen::Index j = 0; j < labels.cols(); ++j) {
      const int l = labels(i, j);
      if (l < 0) continue;
      coder.encode(enc, closed_loop_symbol(payload.region_means[static_cast<std::size_t>(l)], image.values(i, j), q));
    }
  }
  payload.residual_stream = enc.finish();
  return payload;
}

RangeImage intra_decode(const IntraPayload& payload, const SensorConfig& sensor, int frame_index) {
  if (!(payload.q > 0.0f) || !std::isfinite(payload.q)) throw DecodeError("intra payload: bad quantization step");
  if (payload.seeds.size() != payload.region_means.size()) throw DecodeError("intra payload: seed/mean count mismatch");
  const Mask mask = mask_decode(payload.mask_chunk, sensor.height, sensor.width);
  for (std::size_t s = 0; s < payload.seeds.size(); ++s) {
    const auto& p = payload.seeds[s];
    if (p.row < 0 || p.row >= sensor.height || p.col < 0 || p.col >= sensor.width || !mask(p.row, p.col)) {
      throw DecodeError("intra payload: seed outside the valid set");
    }
    const float m = payload.region_means[s];
    if (!(m > 0.0f) || !std::isfinite(m)) throw DecodeError("intra payload: bad region mean");
  }
  if (payload.seeds.empty() && popcount(mask) != 0) throw DecodeError("intra payload: no seeds");
  const Grid<int> labels = assign_regions(mask, sensor, payload.seeds);

  RangeImage out(sensor, frame_index);
  SignedSymbolCoder coder;
  RangeDecoder dec(payload.residual_stream);
  const double q = payload.q;
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    for (Eigen::Index j = 0; j < labels.cols(); ++j) {
      const int l = labels(i, j);
      if (l < 0) continue;
      const double v = double(payload.region_means[static_cast<std::size_t>(l)]) + double(coder.decode(dec)) * q;
      // A valid pixel must stay valid; the encoder never produces this.
      out.values(i, j) = v > 0.0 ? float(v) : std::numeric_limits<float>::min();
    }
  }
  return out;
}

}  // namespace lpcc
