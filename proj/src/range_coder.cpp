// SPDX-License-Identifier: Apache-2.0

#include "lpcc/range_coder.hpp"

#include <cmath>

#include "lpcc/errors.hpp"

namespace lpcc {

namespace {
constexpr std::uint32_t kTop = 1u << 24;
}

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
  if (finished_) throw StateError("encode after finish");
  if (freq == 0 || total == 0 || total > kProbScale || cum + freq > total) {
    throw EncodeError("invalid coding interval");
  }
  const std::uint32_t r = range_ / total;
  low_ += std::uint64_t(r) * cum;
  range_ = r * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
  ideal_bits_ -= std::log2(double(freq) / double(total));
}

void RangeEncoder::encode_bits(std::uint32_t value, int nbits) {
  encode(value & ((1u << nbits) - 1u), 1, 1u << nbits);
}

void RangeEncoder::shift_low() {
  if (std::uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = std::uint8_t(low_ >> 32);
    std::uint8_t temp = cache_;
    do {
      if (skip_first_) {
        skip_first_ = false;
      } else {
        out_.push_back(std::uint8_t(temp + carry));
      }
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = std::uint8_t(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (!finished_) {
    for (int i = 0; i < 5; ++i) shift_low();
    finished_ = true;
  }
  return out_;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : in_(bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= in_.size()) throw DecodeError("truncated entropy-coded stream");
  return in_[pos_++];
}

std::uint32_t RangeDecoder::peek(std::uint32_t total) {
  if (total == 0 || total > kProbScale) throw DecodeError("invalid model total");
  r_ = range_ / total;
  const std::uint32_t v = code_ / r_;
  if (v >= total) throw DecodeError("corrupt entropy-coded stream");
  return v;
}

void RangeDecoder::consume(std::uint32_t cum, std::uint32_t freq) {
  code_ -= r_ * cum;
  range_ = r_ * freq;
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

std::uint32_t RangeDecoder::decode_bits(int nbits) {
  const std::uint32_t v = peek(1u << nbits);
  consume(v, 1);
  return v;
}

}  // namespace lpcc
