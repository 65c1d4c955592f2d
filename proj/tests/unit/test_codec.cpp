#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lpcc/codec.hpp"
#include "lpcc/config.hpp"
#include "lpcc/errors.hpp"
#include "lpcc/pointcloud_io.hpp"

using namespace lpcc;

namespace {

SensorConfig small_sensor() {
  SensorConfig s;
  s.height = 16;
  s.width = 128;
  return s;
}

std::vector<RangeImage> street_frames(int n, std::uint64_t seed = 3) {
  const SensorConfig s = small_sensor();
  return project_sequence(generate_scene(make_street_scene(seed, n), s), s);
}

CodecConfig base_config(int k, float q) {
  CodecConfig c;
  c.sensor = small_sensor();
  c.k = k;
  c.intra_seeds = 16;
  c.intra_q = q;
  c.residual_q = q;
  return c;
}

/// Worst excess of |x_hat - x| over q/2 relative to what float32 can represent
/// at that range: one ulp of x absorbs the rounding of the final addition.
double worst_excess(const RangeImage& truth, const RangeImage& rec, float q) {
  double worst = -1.0;
  for (int i = 0; i < truth.rows(); ++i)
    for (int j = 0; j < truth.cols(); ++j) {
      const float x = truth.values(i, j);
      if (x == 0.0f) continue;
      const double ulp = double(std::nextafter(x, 1e9f) - x);
      const double err = std::abs(double(rec.values(i, j)) - double(x));
      worst = std::max(worst, err - (double(q) / 2 + 1e-6 + ulp));
    }
  return worst;
}

bool same_frames(const std::vector<RangeImage>& a, const std::vector<RangeImage>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].values.rows() != b[i].values.rows() || a[i].values.cols() != b[i].values.cols()) return false;
    if (!(a[i].values == b[i].values).all()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("decoder reproduces the encoder's reconstruction bit for bit") {
  const auto frames = street_frames(9);
  for (int k : {1, 2, 3, 7}) {
    const CodecConfig cfg = base_config(k, 0.05f);
    const EncodeResult enc = encode_sequence(frames, cfg, {});
    CHECK(enc.bytes == serialize_container(enc.container));
    CHECK(same_frames(decode_sequence(parse_container(enc.bytes), {}), enc.reconstructed));
    CHECK(encode_sequence(frames, cfg, {}).bytes == enc.bytes);
  }
}

TEST_CASE("handcrafted end-to-end error stays within q/2 per valid pixel") {
  const auto frames = street_frames(7);
  for (float q : {0.02f, 0.1f}) {
    const EncodeResult enc = encode_sequence(frames, base_config(2, q), {});
    for (std::size_t t = 0; t < frames.size(); ++t) {
      CHECK((extract_mask(enc.reconstructed[t]) == extract_mask(frames[t])).all());
      CHECK(worst_excess(frames[t], enc.reconstructed[t], q) <= 0.0);
    }
  }
}

TEST_CASE("frame bit accounting adds up to the file size") {
  const auto frames = street_frames(6);
  const EncodeResult enc = encode_sequence(frames, base_config(2, 0.05f), {});
  REQUIRE(enc.frame_bits.size() == frames.size());
  std::uint64_t total = 8 * kHeaderBytes;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const FrameBits& b = enc.frame_bits[t];
    CHECK(b.frame == int(t));
    total += b.total();
    if (b.type == FrameType::intra) {
      CHECK(b.bits_intra > 0);
      CHECK(b.bits_residual == 0);
    } else {
      CHECK(b.bits_mask > 0);
      CHECK(b.bits_intra == 0);
    }
  }
  CHECK(total == 8 * enc.bytes.size());
  const auto parsed = frame_bits(parse_container(enc.bytes));
  for (std::size_t t = 0; t < frames.size(); ++t) CHECK(parsed[t].total() == enc.frame_bits[t].total());

  // Coarser quantization spends fewer bits.
  const EncodeResult coarse = encode_sequence(frames, base_config(2, 0.2f), {});
  CHECK(coarse.bytes.size() < enc.bytes.size());
}

TEST_CASE("short sequences and empty frames") {
  auto frames = street_frames(4);
  for (std::size_t n : {std::size_t(1), std::size_t(2)}) {
    const std::vector<RangeImage> sub(frames.begin(), frames.begin() + std::ptrdiff_t(n));
    const EncodeResult enc = encode_sequence(sub, base_config(3, 0.05f), {});
    CHECK(enc.container.records.size() == n);
    CHECK(same_frames(decode_sequence(enc.container, {}), enc.reconstructed));
  }

  // A frame with no returns in the middle and at an end of a unit.
  frames[1].values.setZero();
  frames[3].values.setZero();
  const EncodeResult enc = encode_sequence(frames, base_config(2, 0.05f), {});
  const auto dec = decode_sequence(enc.container, {});
  CHECK(same_frames(dec, enc.reconstructed));
  CHECK(dec[1].valid_count() == 0);
  CHECK(dec[3].valid_count() == 0);
  CHECK(worst_excess(frames[2], dec[2], 0.05f) <= 0.0);

  CHECK_THROWS_AS(encode_sequence({}, base_config(1, 0.05f), {}), EncodeError);
}

TEST_CASE("encoder input errors") {
  const auto frames = street_frames(3);
  CodecConfig wrong = base_config(1, 0.05f);
  wrong.sensor.width = 64;
  CHECK_THROWS_AS(encode_sequence(frames, wrong, {}), EncodeError);
  CodecConfig bad_k = base_config(0, 0.05f);
  CHECK_THROWS_AS(encode_sequence(frames, bad_k, {}), ConfigError);
  CodecConfig learned = base_config(1, 0.05f);
  learned.residual = ResidualBackend::learned;
  CHECK_THROWS_AS(learned.validate(), ConfigError);
  learned.residual_model = "/nonexistent/model.bpnn";
  CHECK_THROWS_AS(CodecModels::load(learned), ConfigError);
  CHECK_THROWS_AS(encode_sequence(frames, learned, {}), ConfigError);
}

TEST_CASE("decoder rejects containers it cannot honor") {
  const auto frames = street_frames(5);
  const EncodeResult enc = encode_sequence(frames, base_config(2, 0.05f), {});

  Container c = enc.container;
  c.header.residual_codec = 9;
  CHECK_THROWS_AS(decode_sequence(c, {}), UnsupportedFormat);
  c = enc.container;
  c.header.predictor = 7;
  CHECK_THROWS_AS(decode_sequence(c, {}), UnsupportedFormat);
  c = enc.container;
  c.header.predictor = std::uint8_t(PredictorId::unet);
  CHECK_THROWS_AS(decode_sequence(c, {}), ConfigError);
  c = enc.container;
  c.records.pop_back();
  CHECK_THROWS_AS(decode_sequence(c, {}), DecodeError);

  // A damaged inter record names its frame.
  c = enc.container;
  for (auto& r : c.records) {
    if (r.type != FrameType::inter) continue;
    r.chunks[0].bytes.resize(1);
    try {
      decode_sequence(c, {});
      FAIL("expected a decode error");
    } catch (const DecodeError& e) {
      CHECK(std::string(e.what()).find("frame " + std::to_string(r.frame_index)) != std::string::npos);
    }
    break;
  }
}

TEST_CASE("U-Net and learned residual models are bound to the container") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto pred_path = dir / "lpcc_codec_predictor.bpnn";
  const auto res_path = dir / "lpcc_codec_residual.bpnn";
  PredictorModel predictor(PredictionMode::bidirectional, true, {2, 4}, 3);
  predictor.save(pred_path);
  HyperpriorModel residual(0.03, {4, 6, 8, 4}, 5);
  residual.save(res_path);

  CodecConfig cfg = base_config(2, 0.05f);
  cfg.predictor_model = pred_path.string();
  cfg.residual = ResidualBackend::learned;
  cfg.residual_model = res_path.string();
  const CodecModels models = CodecModels::load(cfg);
  const auto frames = street_frames(5);
  const EncodeResult enc = encode_sequence(frames, cfg, models);
  CHECK(enc.container.header.predictor == std::uint8_t(PredictorId::unet));
  CHECK(enc.container.header.predictor_fingerprint == predictor.fingerprint());
  CHECK(enc.container.header.residual_codec == kResidualCodecLearned);
  CHECK(enc.container.header.quality == doctest::Approx(0.03));
  CHECK(same_frames(decode_sequence(parse_container(enc.bytes), models), enc.reconstructed));
  for (std::size_t t = 0; t < frames.size(); ++t) {
    CHECK((extract_mask(enc.reconstructed[t]) == extract_mask(frames[t])).all());
  }

  CodecModels other = models;
  other.residual = std::make_shared<HyperpriorModel>(0.03, HyperpriorArch{4, 6, 8, 4}, 6);
  CHECK_THROWS_AS(decode_sequence(enc.container, other), ConfigError);
  other = models;
  other.predictor = std::make_shared<PredictorModel>(PredictionMode::bidirectional, true, UNetArch{2, 4}, 4);
  CHECK_THROWS_AS(decode_sequence(enc.container, other), ConfigError);
  CHECK_THROWS_AS(decode_sequence(enc.container, {}), ConfigError);

  // A unidirectional predictor cannot drive the codec.
  PredictorModel(PredictionMode::unidirectional, true, {2, 4}, 3).save(pred_path);
  CHECK_THROWS_AS(CodecModels::load(cfg), ConfigError);
  std::filesystem::remove(pred_path);
  std::filesystem::remove(res_path);
}

TEST_CASE("residual training samples follow the codec's prediction") {
  const auto frames = street_frames(6);
  const CodecConfig cfg = base_config(1, 0.05f);
  const auto samples = residual_training_samples(frames, cfg, {});
  REQUIRE(samples.size() == frames.size() - 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Mask& m = samples[i].mask;
    CHECK((m == extract_mask(frames[i + 1])).all());
    for (int y = 0; y < m.rows(); ++y)
      for (int x = 0; x < m.cols(); ++x)
        if (!m(y, x)) CHECK(samples[i].residual(y, x) == 0.0f);
  }
}

TEST_CASE("config files parse, reject mistakes, and round-trip") {
  const CodecConfig c = parse_config(
      "# test\n"
      "height = 32\n"
      "  width=256  \n"
      "\n"
      "k = 4\n"
      "q = 0.1\n"
      "residual = learned\n"
      "residual_model = models/r.bpnn\n");
  CHECK(c.sensor.height == 32);
  CHECK(c.sensor.width == 256);
  CHECK(c.k == 4);
  CHECK(c.intra_q == 0.1f);
  CHECK(c.residual_q == 0.1f);
  CHECK(c.residual == ResidualBackend::learned);
  CHECK(c.residual_model == "models/r.bpnn");

  const CodecConfig back = parse_config(format_config(c));
  CHECK(format_config(back) == format_config(c));
  CHECK(back.sensor.fov_down == c.sensor.fov_down);

  CHECK_THROWS_AS(parse_config("colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("k = 2\nk = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("k = two\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("residual = magic\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);
  try {
    parse_config("k = 1\n\nq = x\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/codec.cfg"), ConfigError);
}
