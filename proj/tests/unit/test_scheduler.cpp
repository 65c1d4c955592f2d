#include <doctest.h>

#include <set>

#include "lpcc/errors.hpp"
#include "lpcc/scheduler.hpp"

using namespace lpcc;

TEST_CASE("three frames with k=1 form one unit") {
  const Schedule s = split_units(3, 1);
  REQUIRE(s.units.size() == 1);
  CHECK(s.units[0].first == 0);
  CHECK(s.units[0].last == 2);
  CHECK(s.units[0].inter == std::vector<int>{1});
  CHECK(s.trailing_intra.empty());
  CHECK_FALSE(s.degenerate);
}

TEST_CASE("five frames share the middle intra") {
  const Schedule s = split_units(5, 1);
  REQUIRE(s.units.size() == 2);
  CHECK(s.units[0].last == 2);
  CHECK(s.units[1].first == 2);
  CHECK(s.units[1].last == 4);
  CHECK(s.units[1].inter == std::vector<int>{3});
  int count2 = 0;
  for (const auto& f : s.coding_order()) count2 += f.index == 2;
  CHECK(count2 == 1);
}

TEST_CASE("six frames leave a trailing intra") {
  const Schedule s = split_units(6, 1);
  CHECK(s.units.size() == 2);
  CHECK(s.trailing_intra == std::vector<int>{5});
}

TEST_CASE("short sequences are all intra and flagged") {
  const Schedule s = split_units(2, 1);
  CHECK(s.degenerate);
  CHECK(s.units.empty());
  CHECK(s.trailing_intra == std::vector<int>{0, 1});
  CHECK(split_units(1, 1).coding_order().size() == 1);
  CHECK(split_units(0, 1).coding_order().empty());
  CHECK(split_units(4, 3).degenerate);
}

TEST_CASE("invalid k is rejected") { CHECK_THROWS_AS(split_units(5, 0), ConfigError); }

TEST_CASE("coverage, unit shape and reference availability for many (n, k)") {
  for (int k = 1; k <= 4; ++k) {
    for (int n = 0; n <= 40; ++n) {
      const Schedule s = split_units(n, k);
      for (const auto& u : s.units) {
        CHECK(u.last == u.first + k + 1);
        REQUIRE(int(u.inter.size()) == k);
        for (int i = 0; i < k; ++i) CHECK(u.inter[std::size_t(i)] == u.first + 1 + i);
      }
      std::set<int> seen, decoded;
      for (const auto& f : s.coding_order()) {
        CHECK(seen.insert(f.index).second);
        if (f.type == FrameType::inter) {
          CHECK(decoded.count(f.ref_prev) == 1);
          CHECK(decoded.count(f.ref_next) == 1);
          CHECK(f.ref_prev < f.index);
          CHECK(f.ref_next > f.index);
        }
        decoded.insert(f.index);
      }
      CHECK(int(seen.size()) == n);
      if (n > 0) {
        CHECK(*seen.begin() == 0);
        CHECK(*seen.rbegin() == n - 1);
      }
    }
  }
}

TEST_CASE("with k=1 both references of every inter frame are intra") {
  const Schedule s = split_units(11, 1);
  std::set<int> intra;
  for (const auto& f : s.coding_order())
    if (f.type == FrameType::intra) intra.insert(f.index);
  for (const auto& f : s.coding_order()) {
    if (f.type != FrameType::inter) continue;
    CHECK(intra.count(f.ref_prev) == 1);
    CHECK(intra.count(f.ref_next) == 1);
  }
}
