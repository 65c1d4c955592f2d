// SPDX-License-Identifier: Apache-2.0
//
// 32-bit range coder with carry propagation.
//
// Stream layout: bytes of the low register, most significant first, emitted
// as the range shrinks below 2^24. The leading byte of the classic design is
// always zero and is not written. finish() appends the 4 bytes of the final
// low register. A decoder primes itself with the first 4 bytes.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lpcc {

inline constexpr int kProbBits = 16;
inline constexpr std::uint32_t kProbScale = 1u << kProbBits;

class RangeEncoder {
 public:
  /// Codes the interval [cum, cum+freq) of total. total <= 2^16, freq >= 1.
  void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total);
  /// `nbits` <= 16 equiprobable bits.
  void encode_bits(std::uint32_t value, int nbits);

  std::vector<std::uint8_t> finish();

  /// Sum of -log2(freq/total) over all coded intervals.
  double ideal_bits() const { return ideal_bits_; }

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  bool skip_first_ = true;
  bool finished_ = false;
  double ideal_bits_ = 0.0;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);

  /// Returns a value in [0, total) locating the next symbol; follow with consume().
  std::uint32_t peek(std::uint32_t total);
  void consume(std::uint32_t cum, std::uint32_t freq);
  std::uint32_t decode_bits(int nbits);

  /// Bytes read so far.
  std::size_t position() const { return pos_; }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t r_ = 0;  // range / total of the pending peek
};

}  // namespace lpcc
