// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lpcc/nn.hpp"
#include "lpcc/types.hpp"

namespace lpcc {

/// Container ids of the residual coders.
inline constexpr std::uint8_t kResidualCodecHandcrafted = 1;
inline constexpr std::uint8_t kResidualCodecLearned = 2;

ResidualFrame residual_compute(const RangeImage& x, const RangeImage& pred);

/// pred + residual, clamped to >= 0, exactly 0 where `mask` is 0. Valid
/// pixels are kept strictly positive so they remain points.
RangeImage residual_apply(const RangeImage& pred, const ResidualFrame& residual, const Mask& mask);

/// Quantize-and-code: symbol round(r/q) for every valid pixel in row-major
/// order through the adaptive signed coder.
std::vector<std::uint8_t> hc_encode(const ResidualFrame& r, const Mask& mask, float q);
ResidualFrame hc_decode(std::span<const std::uint8_t> bytes, const Mask& mask, float q);

// ---------------------------------------------------------------------------
// Learned transform coding with a scale hyperprior.

/// Rate-distortion weights of the CLI quality ladder.
inline constexpr double kLambdaLadder[] = {0.003, 0.01, 0.03, 0.1, 0.3};

/// Distortion is measured in this unit (centimeters) so that the ladder spans
/// a useful range of rates.
inline constexpr double kDistortionUnit = 0.01;

struct HyperpriorArch {
  int c1 = 32;
  int c2 = 64;
  int latent = 96;
  int hyper = 32;
};

class HyperpriorModel {
 public:
  static constexpr int kDownsample = 8;      // g_a
  static constexpr int kPadMultiple = 32;    // g_a followed by h_a
  static constexpr std::uint8_t kStreamVersion = 1;

  explicit HyperpriorModel(double lambda = 0.03, HyperpriorArch arch = {}, std::uint64_t seed = 0);

  double lambda() const { return lambda_; }
  const HyperpriorArch& arch() const { return arch_; }
  nn::ModelParams& params() { return params_; }
  const nn::ModelParams& params() const { return params_; }
  std::uint32_t fingerprint() const { return params_.fingerprint(); }

  // Graph pieces. Inputs are [N,*,H,W] grids; H and W multiples of kPadMultiple.
  nn::NodeId analysis(nn::Graph& g, nn::NodeId residual_and_mask) const;
  nn::NodeId synthesis(nn::Graph& g, nn::NodeId y_hat, nn::NodeId mask) const;
  nn::NodeId hyper_analysis(nn::Graph& g, nn::NodeId y) const;
  /// Positive per-element scales for y.
  nn::NodeId hyper_synthesis(nn::Graph& g, nn::NodeId z_hat) const;
  /// Per-channel prior of z: mean [1,C,1,1] and positive scale [1,C,1,1].
  nn::NodeId prior_mean(nn::Graph& g) const;
  nn::NodeId prior_scale(nn::Graph& g) const;

  void save(const std::filesystem::path& path) const;
  static HyperpriorModel load(const std::filesystem::path& path);

 private:
  nn::NodeId res_block(nn::Graph& g, nn::NodeId x, const std::string& name) const;

  double lambda_;
  HyperpriorArch arch_;
  mutable nn::ModelParams params_;
};

struct LearnedEncoding {
  std::vector<std::uint8_t> bytes;
  /// Model cross-entropy of the coded symbols (escape payloads included).
  double ideal_bits_z = 0.0;
  double ideal_bits_y = 0.0;
  std::size_t z_stream_bytes = 0;
  std::size_t y_stream_bytes = 0;
};

LearnedEncoding learned_encode(const HyperpriorModel& model, const ResidualFrame& r, const Mask& mask);
ResidualFrame learned_decode(const HyperpriorModel& model, std::span<const std::uint8_t> bytes, const Mask& mask);

struct ResidualSample {
  ResidualFrame residual;
  Mask mask;
};

struct RDHistoryEntry {
  double rate = 0.0;        // bits per pixel
  double distortion = 0.0;  // squared error, kDistortionUnit^2
  double loss = 0.0;        // rate + lambda * distortion
};

struct ResidualTrainOptions {
  int epochs = 10;
  float lr = 1e-3f;
  int batch_size = 2;
  int crop_width = 0;  // multiple of kPadMultiple, 0 = full width
  std::uint64_t seed = 0;
};

/// Minimizes rate + lambda * distortion with additive-noise quantization.
/// Returns per-epoch means.
std::vector<RDHistoryEntry> train_residual(HyperpriorModel& model, const std::vector<ResidualSample>& data,
                                           const ResidualTrainOptions& options);

}  // namespace lpcc
