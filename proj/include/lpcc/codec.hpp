// SPDX-License-Identifier: Apache-2.0
//
// End-to-end sequence coding: schedule, intra-code the unit endpoints,
// predict inter frames from the decoded endpoints, code mask and residual.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lpcc/bitstream.hpp"
#include "lpcc/predictor.hpp"
#include "lpcc/range_projection.hpp"
#include "lpcc/residual_codec.hpp"

namespace lpcc {

enum class ResidualBackend { handcrafted, learned };

struct CodecConfig {
  SensorConfig sensor;
  int k = 1;
  int intra_seeds = 64;
  float intra_q = 0.05f;
  ResidualBackend residual = ResidualBackend::handcrafted;
  float residual_q = 0.05f;
  /// Learned residual model file (required for the learned backend).
  std::string residual_model;
  /// U-Net predictor file; empty selects the reference average.
  std::string predictor_model;

  void validate() const;
};

/// Models referenced by a config, loaded and checked once.
struct CodecModels {
  std::shared_ptr<const PredictorModel> predictor;
  std::shared_ptr<const HyperpriorModel> residual;

  static CodecModels load(const CodecConfig& config);
};

struct FrameBits {
  int frame = 0;
  FrameType type = FrameType::intra;
  std::uint64_t bits_mask = 0;
  std::uint64_t bits_residual = 0;
  std::uint64_t bits_intra = 0;
  std::uint64_t bits_framing = 0;
  std::uint64_t total() const { return bits_mask + bits_residual + bits_intra + bits_framing; }
};

struct EncodeResult {
  Container container;
  std::vector<std::uint8_t> bytes;
  /// Per frame, indexed by frame number.
  std::vector<FrameBits> frame_bits;
  /// The decoder's reconstruction of every frame, indexed by frame number.
  std::vector<RangeImage> reconstructed;
};

/// Frames must share the config's sensor geometry.
EncodeResult encode_sequence(const std::vector<RangeImage>& frames, const CodecConfig& config,
                             const CodecModels& models);

/// Reconstructs every frame from the container, indexed by frame number.
/// Throws DecodeError naming the frame on malformed payloads.
std::vector<RangeImage> decode_sequence(const Container& container, const CodecModels& models);

/// Per-frame bit counts of a parsed container (framing included per record).
std::vector<FrameBits> frame_bits(const Container& container);

std::vector<RangeImage> project_sequence(const std::vector<PointCloud>& clouds, const SensorConfig& sensor,
                                         std::vector<ProjectionStats>* stats = nullptr);

/// Residuals the codec would see for every frame t in [1, n-2]: the frame
/// minus the prediction from intra-decoded frames t-1 and t+1.
std::vector<ResidualSample> residual_training_samples(const std::vector<RangeImage>& frames,
                                                      const CodecConfig& config, const CodecModels& models);

}  // namespace lpcc
