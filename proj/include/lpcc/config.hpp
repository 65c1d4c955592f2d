// SPDX-License-Identifier: Apache-2.0
//
// Codec configuration files. Grammar, one setting per line:
//
//   line    := blank | comment | setting
//   comment := '#' anything
//   setting := key '=' value        (whitespace around key and value ignored)
//
// Keys: height, width, fov_up, fov_down, k, intra_seeds, intra_q,
// residual (handcrafted | learned), residual_q, residual_model,
// predictor_model, and q (sets intra_q and residual_q together).
// Unknown keys and repeated keys are errors.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "lpcc/codec.hpp"

namespace lpcc {

/// Applies one setting; throws ConfigError on an unknown key or bad value.
void apply_setting(CodecConfig& config, std::string_view key, std::string_view value);

CodecConfig parse_config(std::string_view text, CodecConfig base = {});
CodecConfig load_config(const std::filesystem::path& path, CodecConfig base = {});

/// Writes every setting in the grammar above; parse_config reads it back.
std::string format_config(const CodecConfig& config);

}  // namespace lpcc
