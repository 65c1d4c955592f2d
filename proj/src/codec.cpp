// SPDX-License-Identifier: Apache-2.0

#include "lpcc/codec.hpp"

#include <cmath>
#include <filesystem>

#include "lpcc/errors.hpp"
#include "lpcc/mask_codec.hpp"
#include "lpcc/range_coder.hpp"

namespace lpcc {

void CodecConfig::validate() const {
  sensor.validate();
  if (k < 1 || k > 255) throw ConfigError("k must be in [1, 255]");
  if (intra_seeds < 1 || intra_seeds > 65535) throw ConfigError("intra seed count must be in [1, 65535]");
  if (!(intra_q > 0.0f) || !std::isfinite(intra_q)) throw ConfigError("intra q must be > 0");
  if (residual == ResidualBackend::handcrafted && (!(residual_q > 0.0f) || !std::isfinite(residual_q))) {
    throw ConfigError("residual q must be > 0");
  }
  if (residual == ResidualBackend::learned && residual_model.empty()) {
    throw ConfigError("learned residual backend needs a residual model");
  }
}

CodecModels CodecModels::load(const CodecConfig& config) {
  CodecModels m;
  auto require = [](const std::string& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("model file not found: " + path);
  };
  if (!config.predictor_model.empty()) {
    require(config.predictor_model);
    auto p = std::make_shared<PredictorModel>(PredictorModel::load(config.predictor_model));
    if (p->mode() != PredictionMode::bidirectional) {
      throw ConfigError(config.predictor_model + " is a unidirectional predictor; the codec needs a bidirectional one");
    }
    const int stride = 1 << p->arch().depth;
    if (config.sensor.height % stride != 0 || config.sensor.width % stride != 0) {
      throw ConfigError("sensor size is not divisible by the predictor's stride " + std::to_string(stride));
    }
    m.predictor = std::move(p);
  }
  if (config.residual == ResidualBackend::learned) {
    require(config.residual_model);
    m.residual = std::make_shared<HyperpriorModel>(HyperpriorModel::load(config.residual_model));
  }
  return m;
}

namespace {

std::vector<std::uint8_t> empty_stream() { return RangeEncoder().finish(); }

IntraPayload encode_intra_frame(const RangeImage& frame, const CodecConfig& config) {
  if (frame.valid_count() == 0) {
    IntraPayload p;
    p.q = config.intra_q;
    p.mask_chunk = mask_encode(Mask::Zero(frame.rows(), frame.cols()));
    p.residual_stream = empty_stream();
    return p;
  }
  return intra_encode(frame, config.intra_seeds, config.intra_q);
}

RangeImage predict_inter(const CodecModels& models, const RangeImage& prev, const RangeImage& next, const Mask& mask) {
  if (models.predictor) {
    const std::array<RangeImage, 2> refs{prev, next};
    return predict(*models.predictor, refs, mask);
  }
  return predict_average(prev, next, mask);
}

std::uint64_t framing_bits(const FrameRecord& r) {
  return 8 * (kRecordFramingBytes + kChunkFramingBytes * r.chunks.size());
}

}  // namespace

std::vector<FrameBits> frame_bits(const Container& container) {
  std::vector<FrameBits> out(container.header.frame_count);
  for (const auto& r : container.records) {
    if (r.frame_index >= out.size()) throw DecodeError("record names frame " + std::to_string(r.frame_index));
    FrameBits& b = out[r.frame_index];
    b.frame = int(r.frame_index);
    b.type = r.type;
    b.bits_framing = framing_bits(r);
    for (const auto& c : r.chunks) {
      const std::uint64_t bits = 8 * c.bytes.size();
      switch (ChunkId(c.id)) {
        case ChunkId::intra: b.bits_intra += bits; break;
        case ChunkId::mask: b.bits_mask += bits; break;
        case ChunkId::residual_handcrafted:
        case ChunkId::residual_learned: b.bits_residual += bits; break;
        default: b.bits_framing += bits; break;
      }
    }
  }
  return out;
}

EncodeResult encode_sequence(const std::vector<RangeImage>& frames, const CodecConfig& config,
                             const CodecModels& models) {
  config.validate();
  if (frames.empty()) throw EncodeError("no frames to encode");
  for (const auto& f : frames) {
    if (f.rows() != config.sensor.height || f.cols() != config.sensor.width) {
      throw EncodeError("frame " + std::to_string(f.frame_index) + " does not match the sensor size");
    }
  }
  if (config.residual == ResidualBackend::learned && !models.residual) {
    throw ConfigError("learned residual backend needs a loaded residual model");
  }

  EncodeResult result;
  auto& h = result.container.header;
  h.height = std::uint16_t(config.sensor.height);
  h.width = std::uint16_t(config.sensor.width);
  h.fov_up = config.sensor.fov_up;
  h.fov_down = config.sensor.fov_down;
  h.frame_count = std::uint32_t(frames.size());
  h.k = std::uint8_t(config.k);
  h.intra_codec = kIntraCodecRegionMean;
  h.mask_codec = kMaskCodecContextBinary;
  if (config.residual == ResidualBackend::learned) {
    h.residual_codec = kResidualCodecLearned;
    h.quality = float(models.residual->lambda());
    h.residual_fingerprint = models.residual->fingerprint();
  } else {
    h.residual_codec = kResidualCodecHandcrafted;
    h.quality = config.residual_q;
  }
  if (models.predictor) {
    h.predictor = std::uint8_t(PredictorId::unet);
    h.predictor_fingerprint = models.predictor->fingerprint();
  }

  const Schedule schedule = split_units(int(frames.size()), config.k);
  result.reconstructed.resize(frames.size());
  const SensorConfig sensor = h.sensor();

  for (const ScheduledFrame& sf : schedule.coding_order()) {
    const RangeImage& x = frames[std::size_t(sf.index)];
    FrameRecord rec;
    rec.frame_index = std::uint32_t(sf.index);
    rec.type = sf.type;
    if (sf.type == FrameType::intra) {
      const auto bytes = serialize_intra(encode_intra_frame(x, config));
      // Reconstruct from the serialized bytes, exactly as the decoder will.
      result.reconstructed[std::size_t(sf.index)] = intra_decode(parse_intra(bytes), sensor, sf.index);
      rec.chunks.push_back({std::uint8_t(ChunkId::intra), bytes});
    } else {
      const RangeImage& prev = result.reconstructed[std::size_t(sf.ref_prev)];
      const RangeImage& next = result.reconstructed[std::size_t(sf.ref_next)];
      const Mask mask = extract_mask(x);
      const RangeImage pred = predict_inter(models, prev, next, mask);
      const ResidualFrame r = residual_compute(x, pred);
      rec.chunks.push_back({std::uint8_t(ChunkId::mask), mask_encode(mask)});
      ResidualFrame r_hat;
      if (config.residual == ResidualBackend::learned) {
        auto enc = learned_encode(*models.residual, r, mask);
        r_hat = learned_decode(*models.residual, enc.bytes, mask);
        rec.chunks.push_back({std::uint8_t(ChunkId::residual_learned), std::move(enc.bytes)});
      } else {
        auto bytes = hc_encode(r, mask, config.residual_q);
        r_hat = hc_decode(bytes, mask, config.residual_q);
        rec.chunks.push_back({std::uint8_t(ChunkId::residual_handcrafted), std::move(bytes)});
      }
      RangeImage xr = residual_apply(pred, r_hat, mask);
      xr.frame_index = sf.index;
      result.reconstructed[std::size_t(sf.index)] = std::move(xr);
    }
    result.container.records.push_back(std::move(rec));
  }
  result.bytes = serialize_container(result.container);
  result.frame_bits = frame_bits(result.container);
  return result;
}

std::vector<RangeImage> decode_sequence(const Container& container, const CodecModels& models) {
  const auto& h = container.header;
  const SensorConfig sensor = h.sensor();
  try {
    sensor.validate();
  } catch (const ConfigError& e) {
    throw DecodeError(std::string("container header: ") + e.what());
  }
  if (h.k < 1) throw DecodeError("container header: k = 0");
  if (h.intra_codec != kIntraCodecRegionMean) {
    throw UnsupportedFormat("unknown intra codec id " + std::to_string(h.intra_codec));
  }
  if (h.mask_codec != kMaskCodecContextBinary) {
    throw UnsupportedFormat("unknown mask codec id " + std::to_string(h.mask_codec));
  }
  const bool learned = h.residual_codec == kResidualCodecLearned;
  if (!learned && h.residual_codec != kResidualCodecHandcrafted) {
    throw UnsupportedFormat("unknown residual codec id " + std::to_string(h.residual_codec));
  }
  if (h.predictor == std::uint8_t(PredictorId::unet)) {
    if (!models.predictor) throw ConfigError("container was coded with a U-Net predictor; supply the model");
    if (models.predictor->fingerprint() != h.predictor_fingerprint) {
      throw ConfigError("predictor model does not match the one the container was coded with");
    }
  } else if (h.predictor != std::uint8_t(PredictorId::average)) {
    throw UnsupportedFormat("unknown predictor id " + std::to_string(h.predictor));
  }
  if (learned) {
    if (!models.residual) throw ConfigError("container uses the learned residual coder; supply the model");
    if (models.residual->fingerprint() != h.residual_fingerprint) {
      throw ConfigError("residual model does not match the one the container was coded with");
    }
  }
  CodecModels used;
  if (h.predictor == std::uint8_t(PredictorId::unet)) used.predictor = models.predictor;

  const Schedule schedule = split_units(int(h.frame_count), h.k);
  const auto order = schedule.coding_order();
  if (order.size() != container.records.size()) throw DecodeError("record count does not match the schedule");

  std::vector<RangeImage> out(h.frame_count);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const ScheduledFrame& sf = order[i];
    const FrameRecord& rec = container.records[i];
    const std::string where = "frame " + std::to_string(sf.index);
    if (rec.frame_index != std::uint32_t(sf.index) || rec.type != sf.type) {
      throw DecodeError(where + ": record out of schedule order");
    }
    try {
      if (sf.type == FrameType::intra) {
        const Chunk* c = rec.find(ChunkId::intra);
        if (!c) throw DecodeError("missing intra chunk");
        out[std::size_t(sf.index)] = intra_decode(parse_intra(c->bytes), sensor, sf.index);
      } else {
        const Chunk* mc = rec.find(ChunkId::mask);
        const Chunk* rc = rec.find(learned ? ChunkId::residual_learned : ChunkId::residual_handcrafted);
        if (!mc || !rc) throw DecodeError("missing mask or residual chunk");
        const Mask mask = mask_decode(mc->bytes, sensor.height, sensor.width);
        const RangeImage pred =
            predict_inter(used, out[std::size_t(sf.ref_prev)], out[std::size_t(sf.ref_next)], mask);
        const ResidualFrame r_hat =
            learned ? learned_decode(*models.residual, rc->bytes, mask) : hc_decode(rc->bytes, mask, h.quality);
        RangeImage xr = residual_apply(pred, r_hat, mask);
        xr.frame_index = sf.index;
        out[std::size_t(sf.index)] = std::move(xr);
      }
    } catch (const DecodeError& e) {
      throw DecodeError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<RangeImage> project_sequence(const std::vector<PointCloud>& clouds, const SensorConfig& sensor,
                                         std::vector<ProjectionStats>* stats) {
  std::vector<RangeImage> frames;
  if (stats) stats->clear();
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    ProjectionStats st;
    frames.push_back(project(clouds[i], sensor, &st));
    frames.back().frame_index = int(i);
    if (stats) stats->push_back(st);
  }
  return frames;
}

std::vector<ResidualSample> residual_training_samples(const std::vector<RangeImage>& frames,
                                                      const CodecConfig& config, const CodecModels& models) {
  config.validate();
  std::vector<RangeImage> decoded;
  decoded.reserve(frames.size());
  for (const auto& f : frames) {
    decoded.push_back(intra_decode(parse_intra(serialize_intra(encode_intra_frame(f, config))), f.sensor,
                                   f.frame_index));
  }
  std::vector<ResidualSample> out;
  for (std::size_t t = 1; t + 1 < frames.size(); ++t) {
    ResidualSample s;
    s.mask = extract_mask(frames[t]);
    const RangeImage pred = predict_inter(models, decoded[t - 1], decoded[t + 1], s.mask);
    s.residual = residual_compute(frames[t], pred);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace lpcc
