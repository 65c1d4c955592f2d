#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lpcc/errors.hpp"
#include "lpcc/pointcloud_io.hpp"
#include "lpcc/predictor.hpp"
#include "lpcc/range_projection.hpp"
#include "lpcc/rng.hpp"

using namespace lpcc;

namespace {

SensorConfig small_sensor(int h = 16, int w = 64) {
  SensorConfig s;
  s.height = h;
  s.width = w;
  return s;
}

RangeImage random_image(Rng& rng, const SensorConfig& s, double fill = 0.8) {
  RangeImage img(s);
  for (int i = 0; i < s.height; ++i)
    for (int j = 0; j < s.width; ++j)
      if (rng.uniform() < fill) img.values(i, j) = float(rng.uniform(2.0, 50.0));
  return img;
}

/// Gives the output head non-zero weights so the network is not a pass-through.
void randomize_head(PredictorModel& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& v : m.params()["out.w"].value.data) v = float(rng.uniform(-0.5, 0.5));
  m.params()["out.b"].value.data[0] = 0.3f;
}

double masked_l1(const RangeImage& pred, const RangeImage& truth) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < truth.rows(); ++i)
    for (int j = 0; j < truth.cols(); ++j)
      if (truth.values(i, j) != 0.0f) {
        sum += std::abs(double(pred.values(i, j)) - double(truth.values(i, j)));
        ++n;
      }
  return sum / double(n);
}

}  // namespace

TEST_CASE("average of identical references is the identity") {
  Rng rng(1);
  const RangeImage x = random_image(rng, small_sensor());
  const RangeImage p = predict_average(x, x, extract_mask(x));
  CHECK((p.values == x.values).all());
}

TEST_CASE("average falls back to the valid reference") {
  const SensorConfig s = small_sensor(8, 8);
  RangeImage a(s), b(s);
  a.values(0, 0) = 4.0f;
  b.values(0, 1) = 6.0f;
  a.values(0, 2) = 2.0f;
  b.values(0, 2) = 3.0f;
  a.values(0, 3) = 9.0f;
  const Mask mask = Mask::Constant(8, 8, 1);
  Mask partial = mask;
  partial(0, 3) = 0;
  const RangeImage p = predict_average(a, b, partial);
  CHECK(p.values(0, 0) == 4.0f);
  CHECK(p.values(0, 1) == 6.0f);
  CHECK(p.values(0, 2) == 2.5f);
  CHECK(p.values(0, 3) == 0.0f);
  CHECK(p.values(1, 1) == 0.0f);
  CHECK_THROWS_AS(predict_average(a, RangeImage(small_sensor(8, 16)), mask), ShapeError);
}

TEST_CASE("masked predictor output is exactly zero off the mask and positive on it") {
  Rng rng(2);
  const SensorConfig s = small_sensor();
  PredictorModel model(PredictionMode::bidirectional, true, {}, 5);
  randomize_head(model, 6);
  const RangeImage a = random_image(rng, s), b = random_image(rng, s);
  const Mask mask = extract_mask(random_image(rng, s, 0.6));
  const std::array<RangeImage, 2> refs{a, b};
  const RangeImage p = predict(model, refs, mask);
  for (int i = 0; i < s.height; ++i)
    for (int j = 0; j < s.width; ++j) {
      if (mask(i, j)) {
        CHECK(p.values(i, j) > 0.0f);
      } else {
        CHECK(p.values(i, j) == 0.0f);
      }
    }

  const RangeImage none = predict(model, refs, Mask::Zero(s.height, s.width));
  CHECK((none.values == 0.0f).all());
}

TEST_CASE("unmasked predictor returns the raw network output") {
  Rng rng(3);
  const SensorConfig s = small_sensor();
  PredictorModel model(PredictionMode::bidirectional, false, {}, 5);
  randomize_head(model, 7);
  const std::array<RangeImage, 2> refs{random_image(rng, s), random_image(rng, s)};
  const RangeImage p = predict(model, refs, Mask::Zero(s.height, s.width));
  // No filter is applied, so a zero mask still leaves the softplus output in place.
  CHECK(p.values.allFinite());
  CHECK((p.values >= 0.0f).all());
  CHECK((p.values > 0.0f).count() > p.values.size() / 2);
}

TEST_CASE("inference is deterministic") {
  Rng rng(4);
  const SensorConfig s = small_sensor();
  PredictorModel model(PredictionMode::unidirectional, true, {2, 8}, 9);
  randomize_head(model, 10);
  const std::array<RangeImage, 2> refs{random_image(rng, s), random_image(rng, s)};
  const Mask mask = extract_mask(refs[1]);
  CHECK((predict(model, refs, mask).values == predict(model, refs, mask).values).all());
}

TEST_CASE("input shape errors") {
  const SensorConfig s = small_sensor(12, 64);
  PredictorModel model(PredictionMode::bidirectional, true);
  const std::array<RangeImage, 2> refs{RangeImage(s), RangeImage(s)};
  CHECK_THROWS_AS(predict(model, refs, Mask::Zero(12, 64)), ShapeError);
  const std::array<RangeImage, 1> one{RangeImage(small_sensor())};
  CHECK_THROWS_AS(predict(model, one, Mask::Zero(16, 64)), ShapeError);
  const std::array<RangeImage, 2> ok{RangeImage(small_sensor()), RangeImage(small_sensor())};
  CHECK_THROWS_AS(predict(model, ok, Mask::Zero(16, 32)), ShapeError);
  CHECK_THROWS_AS(PredictorModel(PredictionMode::bidirectional, true, {0, 16}), ConfigError);
}

TEST_CASE("sample layouts follow the prediction mode") {
  std::vector<RangeImage> frames;
  for (int t = 0; t < 5; ++t) frames.emplace_back(small_sensor(), t);
  const auto bi = make_prediction_sample(PredictionMode::bidirectional, frames, 2);
  CHECK(bi.refs[0].frame_index == 1);
  CHECK(bi.refs[1].frame_index == 3);
  CHECK(bi.target.frame_index == 2);
  const auto uni = make_prediction_sample(PredictionMode::unidirectional, frames, 2);
  CHECK(uni.refs[0].frame_index == 0);
  CHECK(uni.refs[1].frame_index == 1);
  CHECK_THROWS_AS(make_prediction_sample(PredictionMode::bidirectional, frames, 4), ConfigError);
  CHECK_THROWS_AS(make_prediction_sample(PredictionMode::unidirectional, frames, 1), ConfigError);
}

TEST_CASE("model files round-trip with identical predictions") {
  Rng rng(5);
  const SensorConfig s = small_sensor();
  PredictorModel model(PredictionMode::unidirectional, false, {2, 8}, 11);
  randomize_head(model, 12);
  const auto path = std::filesystem::temp_directory_path() / "lpcc_test_predictor.bpnn";
  model.save(path);
  const PredictorModel back = PredictorModel::load(path);
  std::filesystem::remove(path);
  CHECK(back.mode() == PredictionMode::unidirectional);
  CHECK_FALSE(back.use_mask());
  CHECK(back.arch().depth == 2);
  CHECK(back.arch().base_channels == 8);
  CHECK(back.fingerprint() == model.fingerprint());
  const std::array<RangeImage, 2> refs{random_image(rng, s), random_image(rng, s)};
  const Mask mask = extract_mask(refs[0]);
  CHECK((predict(back, refs, mask).values == predict(model, refs, mask).values).all());
}

TEST_CASE("memorizing identical triples drives the loss below 1e-2") {
  Rng rng(6);
  const SensorConfig s = small_sensor();
  std::vector<PredictionSample> data;
  for (int k = 0; k < 4; ++k) {
    const RangeImage x = random_image(rng, s);
    data.push_back({{x, x}, extract_mask(x), x});
  }
  PredictorModel model(PredictionMode::bidirectional, true, {}, 13);
  PredictorTrainOptions opt;
  opt.epochs = 50;
  opt.batch_size = 4;
  const auto history = train_predictor(model, data, opt);
  REQUIRE(history.size() == 50);
  for (double h : history) CHECK(std::isfinite(h));
  CHECK(history.back() < 1e-2);
}

TEST_CASE("training is deterministic and lowers error on its street-scene frames") {
  SensorConfig s = small_sensor(16, 128);
  const auto clouds = generate_scene(make_street_scene(21, 14), s);
  std::vector<RangeImage> frames;
  for (std::size_t t = 0; t < clouds.size(); ++t) frames.push_back(project(clouds[t], s));
  std::vector<PredictionSample> train;
  for (int t = 1; t + 1 < int(frames.size()); ++t) {
    train.push_back(make_prediction_sample(PredictionMode::bidirectional, frames, t));
  }

  auto run = [&](PredictorModel& m) {
    PredictorTrainOptions opt;
    opt.epochs = 6;
    opt.batch_size = 3;
    opt.lr = 2e-3f;
    opt.seed = 3;
    return train_predictor(m, train, opt);
  };
  auto train_l1 = [&](const PredictorModel& m) {
    double sum = 0.0;
    for (const auto& h : train) sum += masked_l1(predict(m, h.refs, h.mask), h.target);
    return sum / double(train.size());
  };

  PredictorModel a(PredictionMode::bidirectional, true, {2, 8}, 1);
  PredictorModel b(PredictionMode::bidirectional, true, {2, 8}, 1);
  const double before = train_l1(a);
  const auto ha = run(a);
  const auto hb = run(b);
  CHECK(ha == hb);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(train_l1(a) < before);
}

TEST_CASE("an empty training set is rejected") {
  PredictorModel model(PredictionMode::bidirectional, true);
  CHECK_THROWS_AS(train_predictor(model, {}, {}), ConfigError);
}
