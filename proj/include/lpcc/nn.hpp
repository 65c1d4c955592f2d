// SPDX-License-Identifier: Apache-2.0
//
// Small reverse-mode engine with a fixed node vocabulary: enough for a U-Net
// frame predictor and a hyperprior transform coder. Graphs are built eagerly
// (each node computes its value as it is created) and differentiated once.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lpcc/rng.hpp"

namespace lpcc::nn {

/// Dense batch x channels x height x width float array.
struct Grid4 {
  std::array<int, 4> shape{1, 1, 1, 1};
  std::vector<float> data;

  Grid4() : data(1, 0.0f) {}
  Grid4(int n, int c, int h, int w, float fill = 0.0f);
  explicit Grid4(std::array<int, 4> s, float fill = 0.0f) : Grid4(s[0], s[1], s[2], s[3], fill) {}

  int n() const { return shape[0]; }
  int c() const { return shape[1]; }
  int h() const { return shape[2]; }
  int w() const { return shape[3]; }
  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return std::size_t(shape[2]) * std::size_t(shape[3]); }

  float& operator()(int n, int c, int y, int x) { return data[offset(n, c, y, x)]; }
  float operator()(int n, int c, int y, int x) const { return data[offset(n, c, y, x)]; }
  std::size_t offset(int n, int c, int y, int x) const {
    return ((std::size_t(n) * shape[1] + c) * shape[2] + y) * shape[3] + x;
  }

  Eigen::Map<Eigen::ArrayXf> array() { return {data.data(), Eigen::Index(data.size())}; }
  Eigen::Map<const Eigen::ArrayXf> array() const { return {data.data(), Eigen::Index(data.size())}; }
  bool all_finite() const { return array().allFinite(); }
};

std::string shape_string(const std::array<int, 4>& s);

// ---------------------------------------------------------------------------

struct Param {
  std::string name;
  Grid4 value;
  Grid4 grad;
};

/// Named weight arrays. Shapes are fixed once added.
class ModelParams {
 public:
  explicit ModelParams(std::uint64_t seed = 0) : seed_(seed), rng_(seed, 0x1417) {}

  std::uint64_t seed() const { return seed_; }

  /// Fan-in scaled uniform init: U(-b, b) with b = sqrt(6 / ((1 + 0.2^2) fan_in)).
  Param& add(const std::string& name, std::array<int, 4> shape, int fan_in);
  Param& add_constant(const std::string& name, std::array<int, 4> shape, float value);
  /// Adds `<name>.w` [cout, cin, k, k] and zero `<name>.b` [1, cout, 1, 1].
  void add_conv(const std::string& name, int cin, int cout, int k);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  int index_of(const std::string& name) const;
  Param& operator[](const std::string& name) { return params_[std::size_t(index_of(name))]; }
  const Param& operator[](const std::string& name) const { return params_[std::size_t(index_of(name))]; }
  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

  void zero_grad();
  std::size_t scalar_count() const;
  /// FNV-1a over names, shapes and raw values.
  std::uint32_t fingerprint() const;

  /// Copies every array of this object from `other`; names must exist there
  /// with identical shapes.
  void assign_from(const ModelParams& other);

  void save(const std::filesystem::path& path) const;
  /// Reads a "BPNN" file into a fresh object holding exactly its arrays.
  static ModelParams load(const std::filesystem::path& path);
  std::vector<std::uint8_t> serialize() const;
  static ModelParams deserialize(std::span<const std::uint8_t> bytes);

 private:
  std::uint64_t seed_;
  Rng rng_;
  std::vector<Param> params_;
  std::map<std::string, int> index_;
};

// ---------------------------------------------------------------------------

using NodeId = int;

enum class Op {
  input,
  param,
  conv2d,
  leaky_relu,
  upsample2x,
  concat,
  add,
  sub,
  mul,
  scale,
  uniform_noise,
  round_ste,
  softplus,
  abs,
  square,
  sum,
  channel_broadcast,
  gaussian_bits,
};

class Graph {
 public:
  /// `params` may be null for graphs without weights. `noise_seed` drives the
  /// uniform-noise quantizer.
  explicit Graph(ModelParams* params = nullptr, std::uint64_t noise_seed = 0);

  NodeId input(Grid4 value);
  NodeId param(const std::string& name);

  /// Zero-padded convolution, square kernel of odd size, stride 1 or 2.
  NodeId conv2d(NodeId x, NodeId weight, NodeId bias, int stride = 1);
  /// conv2d using params `<name>.w` / `<name>.b`.
  NodeId conv(NodeId x, const std::string& name, int stride = 1);
  NodeId leaky_relu(NodeId x, float slope = 0.2f);
  NodeId upsample2x(NodeId x);
  NodeId concat(std::span<const NodeId> xs);
  NodeId concat(NodeId a, NodeId b) { return concat(std::array<NodeId, 2>{a, b}); }
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, float factor);
  /// x + U[-0.5, 0.5); gradient passes straight through.
  NodeId uniform_noise(NodeId x);
  /// Rounding with a straight-through gradient.
  NodeId round_ste(NodeId x);
  NodeId softplus(NodeId x);
  NodeId abs(NodeId x);
  NodeId square(NodeId x);
  /// Scalar (1x1x1x1) sum of all elements.
  NodeId sum(NodeId x);
  /// Repeats a [1, C, 1, 1] node over the shape of `like`.
  NodeId channel_broadcast(NodeId per_channel, NodeId like);
  /// Bits of x under a unit-bin discretized N(0, max(scale, min_scale)).
  NodeId gaussian_bits(NodeId x, NodeId scale, float min_scale);

  const Grid4& value(NodeId id) const { return nodes_.at(std::size_t(id)).value; }
  const Grid4& grad(NodeId id) const { return nodes_.at(std::size_t(id)).grad; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Reverse sweep from `root` seeded with `seed` (same shape as the root).
  /// Parameter gradients are accumulated into the ModelParams. A graph can be
  /// differentiated once.
  void backward(NodeId root, const Grid4& seed);
  /// Scalar root, seed 1.
  void backward(NodeId root);

 private:
  struct Node {
    Op op = Op::input;
    std::array<NodeId, 3> in{-1, -1, -1};
    int param_index = -1;
    int stride = 1;
    float attr = 0.0f;
    std::vector<NodeId> inputs;  // concat only
    Grid4 value;
    Grid4 grad;
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  void check_same_shape(NodeId a, NodeId b, const char* op) const;
  void backprop(const Node& n);

  ModelParams* params_;
  Rng noise_rng_;
  std::vector<Node> nodes_;
  bool differentiated_ = false;
};

// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<Grid4> m;
  std::vector<Grid4> v;
  long step = 0;
};

inline constexpr float kAdamBeta1 = 0.9f;
inline constexpr float kAdamBeta2 = 0.999f;
inline constexpr float kAdamEps = 1e-8f;

/// Bias-corrected adaptive-moment update of every parameter from its gradient.
/// Throws TrainingDivergence naming the first parameter with a non-finite gradient.
void optimizer_step(ModelParams& params, AdamState& state, float lr);

/// Rescales all gradients together so their joint L2 norm is at most max_norm.
/// Returns the norm before rescaling.
double clip_grad_norm(ModelParams& params, double max_norm);

}  // namespace lpcc::nn
