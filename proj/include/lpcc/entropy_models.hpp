// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "lpcc/range_coder.hpp"

namespace lpcc {

/// Adaptive order-0 frequency model over [0, alphabet). Counts start at 1,
/// grow by `increment` per coded symbol and are halved (floor 1) whenever
/// the total exceeds 2^15, so every symbol keeps nonzero probability.
class FrequencyModel {
 public:
  static constexpr std::uint32_t kRescaleThreshold = 1u << 15;

  explicit FrequencyModel(int alphabet, std::uint32_t increment = 8);

  int alphabet() const { return static_cast<int>(counts_.size()); }
  std::uint32_t total() const { return total_; }
  std::uint32_t freq(int s) const { return counts_[static_cast<std::size_t>(s)]; }
  std::uint32_t cum(int s) const;

  void encode(RangeEncoder& enc, int symbol);
  int decode(RangeDecoder& dec);
  void update(int symbol);

  std::uint64_t state_hash() const;

 private:
  int find(std::uint32_t target) const;
  void rebuild_tree();

  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> tree_;  // Fenwick, 1-based
  std::uint32_t total_ = 0;
  std::uint32_t increment_;
  int top_bit_ = 1;
};

/// Adaptive two-symbol model, same counting discipline as FrequencyModel.
class BinaryModel {
 public:
  static constexpr std::uint32_t kIncrement = 32;

  void encode(RangeEncoder& enc, int bit);
  int decode(RangeDecoder& dec);
  double p1() const { return double(c1_) / double(c0_ + c1_); }
  std::uint64_t state_hash() const { return (std::uint64_t(c0_) << 32) | c1_; }

 private:
  void update(int bit);

  std::uint32_t c0_ = 1;
  std::uint32_t c1_ = 1;
};

/// Discretized zero-mean Gaussian over integer symbols in [-support, support]
/// plus an escape symbol carrying the raw 32-bit value.
struct GaussianTable {
  double sigma = 0.0;
  int support = 0;
  std::vector<std::uint32_t> cdf;  // size 2*support+3, cdf.front()=0, cdf.back()=2^16

  int escape_index() const { return 2 * support + 1; }
  std::uint32_t freq_of_index(int idx) const { return cdf[idx + 1] - cdf[idx]; }
  /// Fixed-point probability of `value` (escape mass when out of range).
  double probability(std::int32_t value) const;
  /// Bits this table charges for `value`, escape payload included.
  double cost_bits(std::int32_t value) const;

  void encode(RangeEncoder& enc, std::int32_t value) const;
  std::int32_t decode(RangeDecoder& dec) const;
};

inline constexpr double kSigmaMin = 0.04;
inline constexpr int kGaussianMaxSupport = 255;

/// Builds the table for N(0, max(sigma, kSigmaMin)) with at most `max_support`
/// in-range magnitudes. The support shrinks to ceil(8 sigma) for narrow scales.
GaussianTable gaussian_table(double sigma, int max_support = kGaussianMaxSupport);

/// Precomputed tables on a log-spaced scale grid, shared process-wide.
class GaussianTableBank {
 public:
  static constexpr int kLevels = 64;
  static constexpr double kSigmaMax = 64.0;

  static const GaussianTableBank& instance();

  /// Smallest grid scale >= sigma (clamped to the grid).
  int index_for(double sigma) const;
  const GaussianTable& table(int index) const { return tables_[static_cast<std::size_t>(index)]; }
  const GaussianTable& lookup(double sigma) const { return table(index_for(sigma)); }
  double scale(int index) const { return scales_[static_cast<std::size_t>(index)]; }

 private:
  GaussianTableBank();
  std::vector<double> scales_;
  std::vector<GaussianTable> tables_;
};

/// Adaptive order-0 coder for signed integers in [-(2^classes - 1), 2^classes - 1]
/// with an escape for anything larger. A value is tokenized as
/// (zero | sign, magnitude class) and the bits below the leading one, each
/// position of each class with its own adaptive binary model.
class SignedSymbolCoder {
 public:
  explicit SignedSymbolCoder(int classes = 11);

  std::int32_t max_magnitude() const { return (1 << classes_) - 1; }
  void encode(RangeEncoder& enc, std::int32_t value);
  std::int32_t decode(RangeDecoder& dec);
  std::uint64_t state_hash() const;

 private:
  int classes_;
  FrequencyModel tokens_;
  std::vector<BinaryModel> mantissa_;
};

}  // namespace lpcc
