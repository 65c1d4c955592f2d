// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lpcc/types.hpp"

namespace lpcc {

/// Container id of the context-adaptive binary mask coder.
inline constexpr std::uint8_t kMaskCodecContextBinary = 1;

/// Lossless mask coding; pixel (i,j) is coded with one of four adaptive
/// binary models selected by its left and above neighbours (0 outside).
std::vector<std::uint8_t> mask_encode(const Mask& mask);
Mask mask_decode(std::span<const std::uint8_t> bytes, int height, int width);

}  // namespace lpcc
