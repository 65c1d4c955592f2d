// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace lpcc {

/// Intra frames at both ends, k inter frames strictly between.
struct CodingUnit {
  int first = 0;
  int last = 0;
  std::vector<int> inter;
};

enum class FrameType { intra = 0, inter = 1 };

struct ScheduledFrame {
  int index = 0;
  FrameType type = FrameType::intra;
  int ref_prev = -1;  // inter frames only
  int ref_next = -1;
};

struct Schedule {
  std::vector<CodingUnit> units;
  std::vector<int> trailing_intra;
  /// frame_count < k + 2: every frame is intra.
  bool degenerate = false;

  /// Frames in the order they are coded: each unit's intras (shared ones once)
  /// precede its inter frames, trailing intras last.
  std::vector<ScheduledFrame> coding_order() const;
};

/// Tiles [0, frame_count) with units whose boundary intras are shared.
Schedule split_units(int frame_count, int k);

}  // namespace lpcc
