// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lpcc/errors.hpp"
#include "lpcc/nn.hpp"

namespace lpcc::nn {

namespace {

constexpr char kMagic[4] = {'B', 'P', 'N', 'N'};
constexpr std::uint8_t kVersion = 1;

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(std::uint8_t(v));
  out.push_back(std::uint8_t(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint64_t uint(int bytes) {
    need(std::size_t(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t(b_[pos_ + std::size_t(i)]) << (8 * i);
    pos_ += std::size_t(bytes);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw MalformedFile("BPNN: truncated model file");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

Param& ModelParams::add(const std::string& name, std::array<int, 4> shape, int fan_in) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  Param p{name, Grid4(shape), Grid4(shape)};
  const double bound = std::sqrt(6.0 / ((1.0 + 0.04) * std::max(fan_in, 1)));
  for (auto& v : p.value.data) v = float(rng_.uniform(-bound, bound));
  index_[name] = int(params_.size());
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ModelParams::add_constant(const std::string& name, std::array<int, 4> shape, float value) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  index_[name] = int(params_.size());
  params_.push_back(Param{name, Grid4(shape, value), Grid4(shape)});
  return params_.back();
}

void ModelParams::add_conv(const std::string& name, int cin, int cout, int k) {
  add(name + ".w", {cout, cin, k, k}, cin * k * k);
  add_constant(name + ".b", {1, cout, 1, 1}, 0.0f);
}

int ModelParams::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return it->second;
}

void ModelParams::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0f);
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::uint32_t ModelParams::fingerprint() const {
  std::uint32_t h = 2166136261u;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 16777619u;
    }
  };
  for (const auto& p : params_) {
    mix(p.name.data(), p.name.size());
    mix(p.value.shape.data(), sizeof(int) * 4);
    mix(p.value.data.data(), p.value.size() * sizeof(float));
  }
  return h;
}

void ModelParams::assign_from(const ModelParams& other) {
  for (auto& p : params_) {
    if (!other.contains(p.name)) throw ConfigError("model file lacks parameter " + p.name);
    const Param& src = other[p.name];
    if (src.value.shape != p.value.shape) {
      throw ConfigError("parameter " + p.name + " has shape " + shape_string(src.value.shape) + ", expected " +
                        shape_string(p.value.shape));
    }
    p.value = src.value;
  }
}

std::vector<std::uint8_t> ModelParams::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u8(out, kVersion);
  put_u64(out, seed_);
  put_u32(out, std::uint32_t(params_.size()));
  for (const auto& p : params_) {
    put_u16(out, std::uint16_t(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    for (int d : p.value.shape) put_u32(out, std::uint32_t(d));
    for (float v : p.value.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ModelParams ModelParams::deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw MalformedFile("BPNN: bad magic");
  if (r.uint(1) != kVersion) throw MalformedFile("BPNN: unsupported version");
  ModelParams out(r.uint(8));
  const auto count = std::uint32_t(r.uint(4));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = std::size_t(r.uint(2));
    const auto name_bytes = r.take(len);
    std::string name(name_bytes.begin(), name_bytes.end());
    std::array<int, 4> shape{};
    for (auto& d : shape) {
      d = int(r.uint(4));
      if (d < 1 || d > (1 << 24)) throw MalformedFile("BPNN: bad shape for " + name);
    }
    Param& p = out.add_constant(name, shape, 0.0f);
    for (auto& v : p.value.data) v = std::bit_cast<float>(std::uint32_t(r.uint(4)));
  }
  if (!r.done()) throw MalformedFile("BPNN: trailing bytes");
  return out;
}

void ModelParams::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

ModelParams ModelParams::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

void optimizer_step(ModelParams& params, AdamState& state, float lr) {
  auto& ps = params.all();
  for (const auto& p : ps) {
    if (!p.grad.all_finite()) throw TrainingDivergence("non-finite gradient in parameter " + p.name);
  }
  if (state.m.size() != ps.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : ps) {
      state.m.emplace_back(p.value.shape, 0.0f);
      state.v.emplace_back(p.value.shape, 0.0f);
    }
    state.step = 0;
  }
  ++state.step;
  const float bc1 = 1.0f - std::pow(kAdamBeta1, float(state.step));
  const float bc2 = 1.0f - std::pow(kAdamBeta2, float(state.step));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (state.m[i].shape != ps[i].value.shape) throw ShapeError("optimizer state shape mismatch for " + ps[i].name);
    const auto& g = ps[i].grad.data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    auto& w = ps[i].value.data;
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = kAdamBeta1 * m[k] + (1.0f - kAdamBeta1) * g[k];
      v[k] = kAdamBeta2 * v[k] + (1.0f - kAdamBeta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + kAdamEps);
    }
  }
}

double clip_grad_norm(ModelParams& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.all())
    for (float g : p.grad.data) sq += double(g) * double(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    const float factor = float(max_norm / norm);
    for (auto& p : params.all())
      for (float& g : p.grad.data) g *= factor;
  }
  return norm;
}

}  // namespace lpcc::nn
