// SPDX-License-Identifier: Apache-2.0

#include "lpcc/entropy_models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "lpcc/errors.hpp"

namespace lpcc {

// ---------------------------------------------------------------------------
// FrequencyModel

FrequencyModel::FrequencyModel(int alphabet, std::uint32_t increment) : increment_(increment) {
  if (alphabet < 1 || std::uint32_t(alphabet) > kRescaleThreshold) {
    throw ConfigError("frequency model alphabet out of range");
  }
  if (increment == 0 || increment > kRescaleThreshold) throw ConfigError("bad model increment");
  counts_.assign(static_cast<std::size_t>(alphabet), 1);
  top_bit_ = static_cast<int>(std::bit_floor(static_cast<unsigned>(alphabet)));
  rebuild_tree();
}

void FrequencyModel::rebuild_tree() {
  const std::size_t n = counts_.size();
  tree_.assign(n + 1, 0);
  total_ = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    tree_[i] += counts_[i - 1];
    total_ += counts_[i - 1];
    const std::size_t parent = i + (i & (~i + 1));
    if (parent <= n) tree_[parent] += tree_[i];
  }
}

std::uint32_t FrequencyModel::cum(int s) const {
  std::uint32_t sum = 0;
  for (std::size_t i = static_cast<std::size_t>(s); i > 0; i -= i & (~i + 1)) sum += tree_[i];
  return sum;
}

int FrequencyModel::find(std::uint32_t target) const {
  std::size_t pos = 0;
  const std::size_t n = counts_.size();
  for (std::size_t step = static_cast<std::size_t>(top_bit_); step > 0; step >>= 1) {
    if (pos + step <= n && tree_[pos + step] <= target) {
      pos += step;
      target -= tree_[pos];
    }
  }
  return static_cast<int>(pos);
}

void FrequencyModel::update(int symbol) {
  const auto s = static_cast<std::size_t>(symbol);
  counts_[s] += increment_;
  total_ += increment_;
  if (total_ > kRescaleThreshold) {
    for (auto& c : counts_) c = (c + 1) / 2;
    rebuild_tree();
    return;
  }
  for (std::size_t i = s + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += increment_;
}

void FrequencyModel::encode(RangeEncoder& enc, int symbol) {
  if (symbol < 0 || symbol >= alphabet()) throw EncodeError("symbol outside model alphabet");
  enc.encode(cum(symbol), freq(symbol), total_);
  update(symbol);
}

int FrequencyModel::decode(RangeDecoder& dec) {
  const std::uint32_t v = dec.peek(total_);
  const int s = find(v);
  dec.consume(cum(s), freq(s));
  update(s);
  return s;
}

std::uint64_t FrequencyModel::state_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (auto c : counts_) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// BinaryModel

void BinaryModel::update(int bit) {
  (bit ? c1_ : c0_) += kIncrement;
  if (c0_ + c1_ > FrequencyModel::kRescaleThreshold) {
    c0_ = (c0_ + 1) / 2;
    c1_ = (c1_ + 1) / 2;
  }
}

void BinaryModel::encode(RangeEncoder& enc, int bit) {
  const std::uint32_t total = c0_ + c1_;
  if (bit) {
    enc.encode(c0_, c1_, total);
  } else {
    enc.encode(0, c0_, total);
  }
  update(bit);
}

int BinaryModel::decode(RangeDecoder& dec) {
  const std::uint32_t v = dec.peek(c0_ + c1_);
  const int bit = v >= c0_ ? 1 : 0;
  if (bit) {
    dec.consume(c0_, c1_);
  } else {
    dec.consume(0, c0_);
  }
  update(bit);
  return bit;
}

// ---------------------------------------------------------------------------
// Gaussian tables

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void encode_raw32(RangeEncoder& enc, std::int32_t value) {
  const auto u = std::bit_cast<std::uint32_t>(value);
  enc.encode_bits(u & 0xFFFFu, 16);
  enc.encode_bits(u >> 16, 16);
}

std::int32_t decode_raw32(RangeDecoder& dec) {
  const std::uint32_t lo = dec.decode_bits(16);
  const std::uint32_t hi = dec.decode_bits(16);
  return std::bit_cast<std::int32_t>(lo | (hi << 16));
}

}  // namespace

GaussianTable gaussian_table(double sigma, int max_support) {
  if (max_support < 1) throw ConfigError("gaussian table support must be >= 1");
  const double s = std::max(std::isfinite(sigma) ? sigma : kSigmaMin, kSigmaMin);
  GaussianTable t;
  t.sigma = s;
  t.support = static_cast<int>(std::min<double>(max_support, std::max(1.0, std::ceil(8.0 * s))));
  const int L = t.support;
  const auto total = static_cast<std::int64_t>(kProbScale);

  // One-sided tail masses T(k) = P(v > k + 0.5) are rounded, not the
  // individual probabilities, so every frequency is off by at most one count.
  std::vector<std::int64_t> tail(static_cast<std::size_t>(L) + 1);
  for (int k = 0; k <= L; ++k) tail[k] = std::llround(normal_cdf(-(k + 0.5) / s) * double(total));
  tail[L] = std::max<std::int64_t>(tail[L], 1);
  for (int k = L - 1; k >= 0; --k) tail[k] = std::max(tail[k], tail[k + 1] + 1);
  std::vector<std::int64_t> f(static_cast<std::size_t>(L) + 1, 0);
  for (int k = 1; k <= L; ++k) f[k] = tail[k - 1] - tail[k];
  const std::int64_t f_esc = 2 * tail[L];
  f[0] = total - 2 * tail[0];
  if (f[0] < 1) throw ConfigError("gaussian table cannot be normalized");

  t.cdf.resize(static_cast<std::size_t>(2 * L + 3));
  std::uint32_t acc = 0;
  t.cdf[0] = 0;
  for (int v = -L; v <= L; ++v) {
    acc += static_cast<std::uint32_t>(f[std::abs(v)]);
    t.cdf[static_cast<std::size_t>(v + L + 1)] = acc;
  }
  acc += static_cast<std::uint32_t>(f_esc);
  t.cdf.back() = acc;
  return t;
}

double GaussianTable::probability(std::int32_t value) const {
  const int idx = (value >= -support && value <= support) ? value + support : escape_index();
  return double(freq_of_index(idx)) / double(kProbScale);
}

double GaussianTable::cost_bits(std::int32_t value) const {
  const bool esc = value < -support || value > support;
  return -std::log2(probability(value)) + (esc ? 32.0 : 0.0);
}

void GaussianTable::encode(RangeEncoder& enc, std::int32_t value) const {
  if (value >= -support && value <= support) {
    const int idx = value + support;
    enc.encode(cdf[idx], freq_of_index(idx), kProbScale);
    return;
  }
  const int idx = escape_index();
  enc.encode(cdf[idx], freq_of_index(idx), kProbScale);
  encode_raw32(enc, value);
}

std::int32_t GaussianTable::decode(RangeDecoder& dec) const {
  const std::uint32_t v = dec.peek(kProbScale);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), v);
  const int idx = static_cast<int>(it - cdf.begin()) - 1;
  dec.consume(cdf[idx], freq_of_index(idx));
  if (idx == escape_index()) {
    const std::int32_t raw = decode_raw32(dec);
    if (raw >= -support && raw <= support) throw DecodeError("escaped value inside table support");
    return raw;
  }
  return idx - support;
}

GaussianTableBank::GaussianTableBank() {
  const double lo = std::log(kSigmaMin), hi = std::log(kSigmaMax);
  for (int i = 0; i < kLevels; ++i) {
    scales_.push_back(i == kLevels - 1 ? kSigmaMax : std::exp(lo + (hi - lo) * i / (kLevels - 1)));
    tables_.push_back(gaussian_table(scales_.back()));
  }
  scales_.front() = kSigmaMin;
}

const GaussianTableBank& GaussianTableBank::instance() {
  static const GaussianTableBank bank;
  return bank;
}

int GaussianTableBank::index_for(double sigma) const {
  if (!(sigma > scales_.front())) return 0;
  const auto it = std::lower_bound(scales_.begin(), scales_.end(), sigma);
  if (it == scales_.end()) return kLevels - 1;
  return static_cast<int>(it - scales_.begin());
}

// ---------------------------------------------------------------------------
// SignedSymbolCoder

SignedSymbolCoder::SignedSymbolCoder(int classes)
    : classes_(classes), tokens_(2 * classes + 2, 32) {
  if (classes < 1 || classes > 30) throw ConfigError("signed coder class count out of range");
  mantissa_.resize(static_cast<std::size_t>((classes + 1) * classes));
}

void SignedSymbolCoder::encode(RangeEncoder& enc, std::int32_t value) {
  const std::int64_t mag = std::abs(std::int64_t(value));
  if (mag > max_magnitude()) {
    tokens_.encode(enc, 2 * classes_ + 1);
    encode_raw32(enc, value);
    return;
  }
  if (mag == 0) {
    tokens_.encode(enc, 0);
    return;
  }
  const int cls = std::bit_width(static_cast<std::uint32_t>(mag));
  tokens_.encode(enc, value > 0 ? cls : classes_ + cls);
  for (int b = cls - 2; b >= 0; --b) {
    mantissa_[static_cast<std::size_t>(cls * classes_ + b)].encode(enc, int((mag >> b) & 1));
  }
}

std::int32_t SignedSymbolCoder::decode(RangeDecoder& dec) {
  const int token = tokens_.decode(dec);
  if (token == 0) return 0;
  if (token == 2 * classes_ + 1) {
    const std::int32_t raw = decode_raw32(dec);
    if (std::abs(std::int64_t(raw)) <= max_magnitude()) throw DecodeError("escaped value inside alphabet");
    return raw;
  }
  const bool negative = token > classes_;
  const int cls = negative ? token - classes_ : token;
  std::int32_t mag = 1;
  for (int b = cls - 2; b >= 0; --b) {
    mag = (mag << 1) | mantissa_[static_cast<std::size_t>(cls * classes_ + b)].decode(dec);
  }
  return negative ? -mag : mag;
}

std::uint64_t SignedSymbolCoder::state_hash() const {
  std::uint64_t h = tokens_.state_hash();
  for (const auto& m : mantissa_) h = (h ^ m.state_hash()) * 1099511628211ull;
  return h;
}

}  // namespace lpcc
