// Central-difference gradient checking for graph nodes. Every case builds a
// graph from parameter inputs; the scalar probed is sum(w * output) for a
// fixed random w, accumulated in double outside the graph.

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lpcc/nn.hpp"
#include "lpcc/rng.hpp"

namespace gradcheck {

using lpcc::nn::Graph;
using lpcc::nn::Grid4;
using lpcc::nn::NodeId;

struct Case {
  std::string name;
  std::vector<Grid4> inputs;
  std::function<NodeId(Graph&, const std::vector<NodeId>&)> build;
};

struct Result {
  std::string name;
  double worst_relative_error = 0.0;
};

inline Grid4 random_grid(lpcc::Rng& rng, std::array<int, 4> shape, double lo, double hi, double keep_away = 0.0) {
  Grid4 g(shape);
  for (auto& v : g.data) {
    double x;
    do {
      x = rng.uniform(lo, hi);
    } while (std::abs(x) < keep_away);
    v = float(x);
  }
  return g;
}

inline Result check(const Case& c, float h = 1e-3f, std::uint64_t noise_seed = 5) {
  lpcc::nn::ModelParams mp;
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    auto& p = mp.add_constant("in" + std::to_string(i), c.inputs[i].shape, 0.0f);
    p.value = c.inputs[i];
  }
  auto forward = [&](Graph& g) {
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < c.inputs.size(); ++i) ids.push_back(g.param("in" + std::to_string(i)));
    return c.build(g, ids);
  };

  Graph g(&mp, noise_seed);
  const NodeId out = forward(g);
  lpcc::Rng rng(99, c.inputs.size());
  const Grid4 w = random_grid(rng, g.value(out).shape, -1.0, 1.0);
  mp.zero_grad();
  g.backward(out, w);

  auto probe = [&]() {
    Graph e(&mp, noise_seed);
    const Grid4& y = e.value(forward(e));
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += double(w.data[k]) * double(y.data[k]);
    return s;
  };

  Result r{c.name, 0.0};
  for (auto& p : mp.all()) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const float orig = p.value.data[k];
      p.value.data[k] = orig + h;
      const double up = probe();
      p.value.data[k] = orig - h;
      const double down = probe();
      p.value.data[k] = orig;
      // The perturbation actually applied in float.
      const double step = double(orig + h) - double(orig - h);
      const double numeric = (up - down) / step;
      const double analytic = p.grad.data[k];
      diff2 += (numeric - analytic) * (numeric - analytic);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-6});
    r.worst_relative_error = std::max(r.worst_relative_error, std::sqrt(diff2) / denom);
  }
  return r;
}

/// One case per differentiable node type plus small composite networks.
inline std::vector<Case> standard_cases() {
  using A = std::array<int, 4>;
  lpcc::Rng rng(2718, 0);
  auto R = [&](A s, double lo = -1.0, double hi = 1.0, double away = 0.0) { return random_grid(rng, s, lo, hi, away); };
  std::vector<Case> cases;

  cases.push_back({"conv2d 3x3 stride 1", {R({2, 3, 6, 7}), R({4, 3, 3, 3}), R({1, 4, 1, 1})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.conv2d(in[0], in[1], in[2], 1); }});
  cases.push_back({"conv2d 3x3 stride 2", {R({2, 3, 8, 8}), R({4, 3, 3, 3}), R({1, 4, 1, 1})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.conv2d(in[0], in[1], in[2], 2); }});
  cases.push_back({"conv2d 5x5 stride 2", {R({1, 2, 8, 6}), R({3, 2, 5, 5}), R({1, 3, 1, 1})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.conv2d(in[0], in[1], in[2], 2); }});
  cases.push_back({"conv2d 1x1", {R({2, 4, 5, 5}), R({3, 4, 1, 1}), R({1, 3, 1, 1})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.conv2d(in[0], in[1], in[2], 1); }});
  cases.push_back({"leaky_relu", {R({2, 3, 4, 5}, -1, 1, 0.05)},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.leaky_relu(in[0], 0.2f); }});
  cases.push_back({"upsample2x", {R({2, 3, 4, 5})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.upsample2x(in[0]); }});
  cases.push_back({"concat", {R({2, 3, 4, 5}), R({2, 2, 4, 5})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.concat(in[0], in[1]); }});
  cases.push_back({"add", {R({2, 3, 4, 5}), R({2, 3, 4, 5})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.add(in[0], in[1]); }});
  cases.push_back({"sub", {R({2, 3, 4, 5}), R({2, 3, 4, 5})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.sub(in[0], in[1]); }});
  cases.push_back({"mul", {R({2, 3, 4, 5}), R({2, 3, 4, 5})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.mul(in[0], in[1]); }});
  cases.push_back({"scale", {R({2, 3, 4, 5})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.scale(in[0], -2.5f); }});
  cases.push_back({"uniform_noise", {R({2, 3, 4, 5})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.uniform_noise(in[0]); }});
  cases.push_back({"softplus", {R({2, 3, 4, 5}, -3, 3)},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.softplus(in[0]); }});
  cases.push_back({"abs", {R({2, 3, 4, 5}, -1, 1, 0.05)},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.abs(in[0]); }});
  cases.push_back({"square", {R({2, 3, 4, 5})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.square(in[0]); }});
  cases.push_back({"sum", {R({2, 3, 4, 5})},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.sum(in[0]); }});
  cases.push_back({"channel_broadcast", {R({1, 3, 1, 1}), R({2, 3, 4, 5})},
                   [](Graph& g, const std::vector<NodeId>& in) {
                     return g.mul(g.channel_broadcast(in[0], in[1]), in[1]);
                   }});
  cases.push_back({"gaussian_bits", {R({2, 3, 4, 5}, -2, 2), R({2, 3, 4, 5}, 0.4, 3)},
                   [](Graph& g, const std::vector<NodeId>& in) { return g.gaussian_bits(in[0], in[1], 0.11f); }});
  cases.push_back({"composite conv-lrelu-conv",
                   {R({2, 2, 8, 8}), R({4, 2, 3, 3}), R({1, 4, 1, 1}), R({1, 4, 3, 3}), R({1, 1, 1, 1})},
                   [](Graph& g, const std::vector<NodeId>& in) {
                     const NodeId h = g.leaky_relu(g.conv2d(in[0], in[1], in[2], 2));
                     return g.conv2d(g.upsample2x(h), in[3], in[4], 1);
                   }});
  cases.push_back({"composite skip-concat-softplus",
                   {R({1, 2, 4, 4}), R({3, 2, 3, 3}), R({1, 3, 1, 1}), R({1, 5, 3, 3}), R({1, 1, 1, 1})},
                   [](Graph& g, const std::vector<NodeId>& in) {
                     const NodeId h = g.leaky_relu(g.conv2d(in[0], in[1], in[2], 1));
                     return g.softplus(g.conv2d(g.concat(h, in[0]), in[3], in[4], 1));
                   }});
  cases.push_back({"composite rate-distortion",
                   {R({1, 2, 8, 8}), R({3, 2, 3, 3}), R({1, 3, 1, 1}), R({3, 3, 3, 3}), R({1, 3, 1, 1})},
                   [](Graph& g, const std::vector<NodeId>& in) {
                     const NodeId y = g.uniform_noise(g.conv2d(in[0], in[1], in[2], 2));
                     const NodeId s = g.softplus(g.conv2d(y, in[3], in[4], 1));
                     return g.add(g.sum(g.gaussian_bits(y, s, 0.11f)), g.sum(g.square(y)));
                   }});
  return cases;
}

}  // namespace gradcheck
