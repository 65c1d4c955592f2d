#include <doctest.h>

#include <cmath>

#include "lpcc/errors.hpp"
#include "lpcc/metrics.hpp"
#include "lpcc/rng.hpp"
#include "oracles.hpp"

using namespace lpcc;

namespace {

PointCloud random_cloud(Rng& rng, std::size_t n, double extent) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(float(rng.uniform(-extent, extent)), float(rng.uniform(-extent, extent)),
                          float(rng.uniform(-extent / 4, extent / 4)));
  }
  return c;
}

/// Clustered cloud: most points inside a few tight blobs, some far outliers.
PointCloud clustered_cloud(Rng& rng, std::size_t n) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() < 0.05) {
      c.points.emplace_back(float(rng.uniform(-500, 500)), float(rng.uniform(-500, 500)), float(rng.uniform(-5, 5)));
    } else {
      const double cx = 10.0 * double(rng.below(3));
      c.points.emplace_back(float(cx + rng.normal() * 0.01), float(rng.normal() * 0.01), float(rng.normal() * 0.01));
    }
  }
  return c;
}

SensorConfig sensor(int h, int w) {
  SensorConfig s;
  s.height = h;
  s.width = w;
  return s;
}

}  // namespace

TEST_CASE("indexed Chamfer equals brute force exactly on random pairs") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(500), m = 1 + rng.below(500);
    const PointCloud P = trial % 4 == 3 ? clustered_cloud(rng, n) : random_cloud(rng, n, rng.uniform(0.1, 100.0));
    const PointCloud Q = trial % 4 == 3 ? clustered_cloud(rng, m) : random_cloud(rng, m, rng.uniform(0.1, 100.0));
    const double indexed = chamfer(P, Q, ChamferMode::indexed);
    CHECK(indexed == chamfer(P, Q, ChamferMode::brute_force));
    CHECK(indexed == oracle::brute_chamfer(P, Q));
  }
}

TEST_CASE("Chamfer identities") {
  Rng rng(2);
  const PointCloud P = random_cloud(rng, 300, 20.0);
  const PointCloud Q = random_cloud(rng, 200, 20.0);
  CHECK(chamfer(P, P) == 0.0);
  CHECK(chamfer(P, Q) == chamfer(Q, P));
  CHECK(chamfer(P, Q) == doctest::Approx(directed_chamfer(P, Q) + directed_chamfer(Q, P)).epsilon(1e-12));

  PointCloud a, b;
  a.points.emplace_back(0.0f, 0.0f, 0.0f);
  b.points.emplace_back(1.0f, 0.0f, 0.0f);
  CHECK(chamfer(a, b) == 2.0);

  // Rigid shift by t moves every nearest neighbour by at most |t|.
  PointCloud shifted = P;
  for (auto& p : shifted.points) p += Point3(0.3f, 0.0f, 0.4f);
  CHECK(chamfer(P, shifted) <= 2 * 0.5 + 1e-5);
}

TEST_CASE("Chamfer of an empty cloud is undefined") {
  PointCloud a, empty;
  a.points.emplace_back(1.0f, 2.0f, 3.0f);
  CHECK_THROWS_AS(chamfer(a, empty), UndefinedMetric);
  CHECK_THROWS_AS(chamfer(empty, a), UndefinedMetric);
  CHECK_THROWS_AS(directed_chamfer(empty, a), UndefinedMetric);
}

TEST_CASE("coincident and duplicated points") {
  PointCloud a;
  for (int i = 0; i < 50; ++i) a.points.emplace_back(1.0f, 1.0f, 1.0f);
  PointCloud b = a;
  b.points.emplace_back(1.0f, 1.0f, 2.0f);
  CHECK(chamfer(a, a) == 0.0);
  CHECK(chamfer(a, b) == doctest::Approx(1.0 / 51.0).epsilon(1e-12));
  CHECK(chamfer(a, b) == chamfer(a, b, ChamferMode::brute_force));
}

TEST_CASE("range metrics over the mask") {
  const SensorConfig s = sensor(1, 4);
  RangeImage pred(s), truth(s);
  truth.values << 10.0f, 20.0f, 30.0f, 40.0f;
  pred.values << 10.05f, 19.5f, 30.0f, 0.0f;
  Mask mask(1, 4);
  mask << 1, 1, 1, 0;
  const RangeMetrics m = range_metrics(pred, truth, mask);
  CHECK(m.l1 == doctest::Approx((0.05 + 0.5 + 0.0) / 3).epsilon(1e-5));
  CHECK(m.rmse == doctest::Approx(std::sqrt((0.0025 + 0.25) / 3)).epsilon(1e-5));
  CHECK(m.acc == doctest::Approx(2.0 / 3.0));
  CHECK(range_metrics(pred, truth, mask, 0.01).acc == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(range_metrics(pred, truth, Mask::Zero(1, 4)), UndefinedMetric);

  // The accuracy threshold is strict.
  RangeImage p2(s);
  p2.values << 10.5f, 20.0f, 30.0f, 40.0f;
  CHECK(range_metrics(p2, truth, Mask::Constant(1, 4, 1), 0.5).acc == doctest::Approx(0.75));
}

TEST_CASE("bits per point") {
  CHECK(bpp(1000, 100) == 10.0);
  CHECK(bpp(0, 7) == 0.0);
  CHECK_THROWS_AS(bpp(10, 0), UndefinedMetric);
}
