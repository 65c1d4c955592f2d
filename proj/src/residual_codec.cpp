// SPDX-License-Identifier: Apache-2.0

#include "lpcc/residual_codec.hpp"

#include <cmath>

#include "lpcc/entropy_models.hpp"
#include "lpcc/errors.hpp"

namespace lpcc {

namespace {
constexpr float kMinValidRange = 1e-3f;

void check_shape(const Mask& mask, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (mask.rows() != rows || mask.cols() != cols) throw ShapeError(std::string(what) + ": mask shape mismatch");
}
}  // namespace

ResidualFrame residual_compute(const RangeImage& x, const RangeImage& pred) {
  if (x.values.rows() != pred.values.rows() || x.values.cols() != pred.values.cols()) {
    throw ShapeError("residual_compute: shape mismatch");
  }
  return x.values - pred.values;
}

RangeImage residual_apply(const RangeImage& pred, const ResidualFrame& residual, const Mask& mask) {
  if (residual.rows() != pred.values.rows() || residual.cols() != pred.values.cols()) {
    throw ShapeError("residual_apply: shape mismatch");
  }
  check_shape(mask, residual.rows(), residual.cols(), "residual_apply");
  RangeImage out = pred;
  out.values = (mask != 0).select((pred.values + residual).max(kMinValidRange), 0.0f);
  return out;
}

std::vector<std::uint8_t> hc_encode(const ResidualFrame& r, const Mask& mask, float q) {
  if (!(q > 0.0f) || !std::isfinite(q)) throw ConfigError("quantization step must be > 0");
  check_shape(mask, r.rows(), r.cols(), "hc_encode");
  SignedSymbolCoder coder;
  RangeEncoder enc;
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
      if (!mask(i, j)) continue;
      const double s = std::nearbyint(double(r(i, j)) / double(q));
      if (!(std::abs(s) < 2147483647.0)) throw EncodeError("residual symbol overflow");
      coder.encode(enc, static_cast<std::int32_t>(s));
    }
  }
  return enc.finish();
}

ResidualFrame hc_decode(std::span<const std::uint8_t> bytes, const Mask& mask, float q) {
  if (!(q > 0.0f) || !std::isfinite(q)) throw DecodeError("quantization step must be > 0");
  SignedSymbolCoder coder;
  RangeDecoder dec(bytes);
  ResidualFrame r = ResidualFrame::Zero(mask.rows(), mask.cols());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
      if (mask(i, j)) r(i, j) = float(double(coder.decode(dec)) * double(q));
    }
  }
  return r;
}

}  // namespace lpcc
