// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lpcc/nn.hpp"
#include "lpcc/types.hpp"

namespace lpcc {

enum class PredictionMode : std::uint8_t { bidirectional = 0, unidirectional = 1 };

struct UNetArch {
  int depth = 3;
  int base_channels = 16;
};

/// Per pixel: mean of the references where both are valid, the valid one
/// where only one is, 0 where neither; then multiplied by `mask`.
RangeImage predict_average(const RangeImage& ref_a, const RangeImage& ref_b, const Mask& mask);

/// U-Net frame predictor.
///
/// Bidirectional models take the previous and next decoded frames,
/// unidirectional ones the two previous frames (older first). The network
/// refines a fixed reference estimate (the reference average for
/// bidirectional mode, the newer reference for unidirectional mode), the sum
/// goes through a softplus so ranges stay positive, and with `use_mask` the
/// mask is an extra input channel and multiplies the output.
class PredictorModel {
 public:
  PredictorModel(PredictionMode mode, bool use_mask, UNetArch arch = {}, std::uint64_t seed = 0);

  PredictionMode mode() const { return mode_; }
  bool use_mask() const { return use_mask_; }
  const UNetArch& arch() const { return arch_; }
  nn::ModelParams& params() { return params_; }
  const nn::ModelParams& params() const { return params_; }
  std::uint32_t fingerprint() const { return params_.fingerprint(); }

  /// Builds the forward pass for a batch. `refs` is [N,2,H,W] in meters,
  /// `mask` [N,1,H,W]. Returns the prediction node in meters.
  nn::NodeId forward(nn::Graph& g, const nn::Grid4& refs, const nn::Grid4& mask) const;

  void save(const std::filesystem::path& path) const;
  static PredictorModel load(const std::filesystem::path& path);

 private:
  PredictionMode mode_;
  bool use_mask_;
  UNetArch arch_;
  // Parameters are read through a Graph that needs a mutable pointer for
  // gradient accumulation; inference never writes them.
  mutable nn::ModelParams params_;
};

RangeImage predict(const PredictorModel& model, std::span<const RangeImage> refs, const Mask& mask);

struct PredictionSample {
  std::array<RangeImage, 2> refs;
  Mask mask;
  RangeImage target;
};

struct PredictorTrainOptions {
  int epochs = 10;
  float lr = 1e-3f;
  int batch_size = 4;
  /// Random cyclic column crops of this width; 0 trains on full frames.
  int crop_width = 0;
  std::uint64_t seed = 0;
  /// Gradient norm ceiling per step; 0 disables clipping.
  double max_grad_norm = 1.0;
};

/// Minimizes the L1 distance between prediction and ground truth, normalized
/// by the target's valid-pixel count. Masked models are exactly 0 on invalid
/// pixels, so for them this is the mean error over valid pixels; unmasked
/// models are also charged for predicting returns where there are none.
/// Returns the mean loss of every epoch.
std::vector<double> train_predictor(PredictorModel& model, const std::vector<PredictionSample>& data,
                                    const PredictorTrainOptions& options);

/// The sample layout each mode uses for target frame t of a sequence.
PredictionSample make_prediction_sample(PredictionMode mode, std::span<const RangeImage> frames, int t);

}  // namespace lpcc
