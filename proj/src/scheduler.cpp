// SPDX-License-Identifier: Apache-2.0

#include "lpcc/scheduler.hpp"

#include "lpcc/errors.hpp"

namespace lpcc {

Schedule split_units(int frame_count, int k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (frame_count < 0) throw ConfigError("negative frame count");
  Schedule s;
  if (frame_count < k + 2) {
    s.degenerate = true;
    for (int f = 0; f < frame_count; ++f) s.trailing_intra.push_back(f);
    return s;
  }
  int start = 0;
  while (start + k + 1 < frame_count) {
    CodingUnit u;
    u.first = start;
    u.last = start + k + 1;
    for (int f = start + 1; f <= start + k; ++f) u.inter.push_back(f);
    s.units.push_back(std::move(u));
    start += k + 1;
  }
  for (int f = start + 1; f < frame_count; ++f) s.trailing_intra.push_back(f);
  return s;
}

std::vector<ScheduledFrame> Schedule::coding_order() const {
  std::vector<ScheduledFrame> order;
  for (std::size_t u = 0; u < units.size(); ++u) {
    const auto& unit = units[u];
    if (u == 0) order.push_back({unit.first, FrameType::intra});
    order.push_back({unit.last, FrameType::intra});
    for (int f : unit.inter) order.push_back({f, FrameType::inter, unit.first, unit.last});
  }
  for (int f : trailing_intra) order.push_back({f, FrameType::intra});
  return order;
}

}  // namespace lpcc
