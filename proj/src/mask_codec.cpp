// SPDX-License-Identifier: Apache-2.0

#include "lpcc/mask_codec.hpp"

#include <array>

#include "lpcc/entropy_models.hpp"
#include "lpcc/errors.hpp"

namespace lpcc {

namespace {
inline int context(const Mask& m, Eigen::Index i, Eigen::Index j) {
  const int left = j > 0 ? (m(i, j - 1) != 0) : 0;
  const int above = i > 0 ? (m(i - 1, j) != 0) : 0;
  return left | (above << 1);
}
}  // namespace

std::vector<std::uint8_t> mask_encode(const Mask& mask) {
  std::array<BinaryModel, 4> models;
  RangeEncoder enc;
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      models[static_cast<std::size_t>(context(mask, i, j))].encode(enc, mask(i, j) != 0);
    }
  }
  return enc.finish();
}

Mask mask_decode(std::span<const std::uint8_t> bytes, int height, int width) {
  if (height < 0 || width < 0) throw DecodeError("negative mask dimensions");
  std::array<BinaryModel, 4> models;
  RangeDecoder dec(bytes);
  Mask mask = Mask::Zero(height, width);
  for (Eigen::Index i = 0; i < height; ++i) {
    for (Eigen::Index j = 0; j < width; ++j) {
      mask(i, j) = static_cast<std::uint8_t>(models[static_cast<std::size_t>(context(mask, i, j))].decode(dec));
    }
  }
  return mask;
}

}  // namespace lpcc
