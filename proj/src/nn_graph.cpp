// SPDX-License-Identifier: Apache-2.0

#include <cassert>
#include <cmath>

#include <Eigen/Dense>

#include "lpcc/errors.hpp"
#include "lpcc/nn.hpp"

namespace lpcc::nn {

namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeom {
  int cin, h, w, cout, k, stride, pad, ho, wo;
  Eigen::Index col_rows() const { return Eigen::Index(cin) * k * k; }
  Eigen::Index col_cols() const { return Eigen::Index(ho) * wo; }
};

void im2col(const float* x, const ConvGeom& g, float* cols) {
  const std::size_t ncols = std::size_t(g.ho) * g.wo;
  for (int c = 0; c < g.cin; ++c) {
    const float* plane = x + std::size_t(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        float* row = cols + (std::size_t(c * g.k + ky) * g.k + kx) * ncols;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride + ky - g.pad;
          float* dst = row + std::size_t(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, 0.0f);
            continue;
          }
          const float* src = plane + std::size_t(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride + kx - g.pad;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* cols, const ConvGeom& g, float* dx) {
  const std::size_t ncols = std::size_t(g.ho) * g.wo;
  for (int c = 0; c < g.cin; ++c) {
    float* plane = dx + std::size_t(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const float* row = cols + (std::size_t(c * g.k + ky) * g.k + kx) * ncols;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          const float* src = row + std::size_t(oy) * g.wo;
          float* dst = plane + std::size_t(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double normal_pdf(double x) { return 0.3989422804014327 * std::exp(-0.5 * x * x); }

constexpr double kLikelihoodBound = 1e-9;

}  // namespace

Grid4::Grid4(int n, int c, int h, int w, float fill) : shape{n, c, h, w} {
  if (n < 1 || c < 1 || h < 1 || w < 1) throw ShapeError("grid dimensions must be >= 1, got " + shape_string(shape));
  data.assign(std::size_t(n) * c * h * w, fill);
}

std::string shape_string(const std::array<int, 4>& s) {
  return "[" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) + "," +
         std::to_string(s[3]) + "]";
}

Graph::Graph(ModelParams* params, std::uint64_t noise_seed) : params_(params), noise_rng_(noise_seed, 0x0153) {}

NodeId Graph::push(Node n) {
  if (differentiated_) throw StateError("graph already differentiated");
  assert(n.value.all_finite());
  nodes_.push_back(std::move(n));
  return NodeId(nodes_.size() - 1);
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id < 0 || std::size_t(id) >= nodes_.size()) throw ShapeError("unknown node id");
  return nodes_[std::size_t(id)];
}

void Graph::check_same_shape(NodeId a, NodeId b, const char* op) const {
  if (node(a).value.shape != node(b).value.shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(node(a).value.shape) + " vs " +
                     shape_string(node(b).value.shape));
  }
}

NodeId Graph::input(Grid4 value) {
  Node n;
  n.op = Op::input;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::param(const std::string& name) {
  if (!params_) throw StateError("graph has no parameters");
  Node n;
  n.op = Op::param;
  n.param_index = params_->index_of(name);
  n.value = params_->all()[std::size_t(n.param_index)].value;
  return push(std::move(n));
}

NodeId Graph::conv2d(NodeId x, NodeId weight, NodeId bias, int stride) {
  const Grid4& X = node(x).value;
  const Grid4& W = node(weight).value;
  const Grid4& B = node(bias).value;
  if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2");
  if (W.h() != W.w() || W.h() % 2 == 0) throw ShapeError("conv2d: kernel must be square and odd");
  if (W.c() != X.c()) {
    throw ShapeError("conv2d: input has " + std::to_string(X.c()) + " channels, kernel expects " +
                     std::to_string(W.c()));
  }
  if (B.size() != std::size_t(W.n())) throw ShapeError("conv2d: bias size mismatch");
  ConvGeom g{X.c(), X.h(), X.w(), W.n(), W.h(), stride, W.h() / 2, 0, 0};
  g.ho = (g.h + 2 * g.pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / stride + 1;

  Node n;
  n.op = Op::conv2d;
  n.in = {x, weight, bias};
  n.stride = stride;
  n.value = Grid4(X.n(), g.cout, g.ho, g.wo);
  // Products and reductions run on Eigen-owned (aligned) copies only: Eigen
  // picks its summation order from operand alignment, and results must not
  // depend on where a std::vector happened to be allocated.
  const MatRM Wm = Eigen::Map<const MatRM>(W.data.data(), g.cout, g.col_rows());
  const Eigen::VectorXf Bv = Eigen::Map<const Eigen::VectorXf>(B.data.data(), g.cout);
  MatRM cols(g.col_rows(), g.col_cols());
  MatRM prod(g.cout, g.col_cols());
  for (int b = 0; b < X.n(); ++b) {
    const float* xin = X.data.data() + std::size_t(b) * g.cin * g.h * g.w;
    if (g.k == 1 && stride == 1) {
      cols = Eigen::Map<const MatRM>(xin, g.col_rows(), g.col_cols());
    } else {
      im2col(xin, g, cols.data());
    }
    prod.noalias() = Wm * cols;
    prod.colwise() += Bv;
    Eigen::Map<MatRM>(n.value.data.data() + std::size_t(b) * g.cout * g.ho * g.wo, g.cout, g.col_cols()) = prod;
  }
  return push(std::move(n));
}

NodeId Graph::conv(NodeId x, const std::string& name, int stride) {
  return conv2d(x, param(name + ".w"), param(name + ".b"), stride);
}

NodeId Graph::leaky_relu(NodeId x, float slope) {
  Node n;
  n.op = Op::leaky_relu;
  n.in[0] = x;
  n.attr = slope;
  n.value = node(x).value;
  auto a = n.value.array();
  a = (a > 0.0f).select(a, a * slope);
  return push(std::move(n));
}

NodeId Graph::upsample2x(NodeId x) {
  const Grid4& X = node(x).value;
  Node n;
  n.op = Op::upsample2x;
  n.in[0] = x;
  n.value = Grid4(X.n(), X.c(), 2 * X.h(), 2 * X.w());
  for (int b = 0; b < X.n(); ++b)
    for (int c = 0; c < X.c(); ++c)
      for (int y = 0; y < 2 * X.h(); ++y)
        for (int xx = 0; xx < 2 * X.w(); ++xx) n.value(b, c, y, xx) = X(b, c, y / 2, xx / 2);
  return push(std::move(n));
}

NodeId Graph::concat(std::span<const NodeId> xs) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const Grid4& first = node(xs[0]).value;
  int channels = 0;
  for (NodeId id : xs) {
    const Grid4& v = node(id).value;
    if (v.n() != first.n() || v.h() != first.h() || v.w() != first.w()) {
      throw ShapeError("concat: spatial shape mismatch " + shape_string(first.shape) + " vs " + shape_string(v.shape));
    }
    channels += v.c();
  }
  Node n;
  n.op = Op::concat;
  n.inputs.assign(xs.begin(), xs.end());
  n.value = Grid4(first.n(), channels, first.h(), first.w());
  const std::size_t plane = first.plane();
  for (int b = 0; b < first.n(); ++b) {
    int c0 = 0;
    for (NodeId id : xs) {
      const Grid4& v = node(id).value;
      std::copy_n(v.data.data() + std::size_t(b) * v.c() * plane, std::size_t(v.c()) * plane,
                  n.value.data.data() + (std::size_t(b) * channels + c0) * plane);
      c0 += v.c();
    }
  }
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  check_same_shape(a, b, "add");
  Node n;
  n.op = Op::add;
  n.in = {a, b, -1};
  n.value = node(a).value;
  n.value.array() += node(b).value.array();
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  check_same_shape(a, b, "sub");
  Node n;
  n.op = Op::sub;
  n.in = {a, b, -1};
  n.value = node(a).value;
  n.value.array() -= node(b).value.array();
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  check_same_shape(a, b, "mul");
  Node n;
  n.op = Op::mul;
  n.in = {a, b, -1};
  n.value = node(a).value;
  n.value.array() *= node(b).value.array();
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, float factor) {
  Node n;
  n.op = Op::scale;
  n.in[0] = x;
  n.attr = factor;
  n.value = node(x).value;
  n.value.array() *= factor;
  return push(std::move(n));
}

NodeId Graph::uniform_noise(NodeId x) {
  Node n;
  n.op = Op::uniform_noise;
  n.in[0] = x;
  n.value = node(x).value;
  for (auto& v : n.value.data) v += float(noise_rng_.uniform() - 0.5);
  return push(std::move(n));
}

NodeId Graph::round_ste(NodeId x) {
  Node n;
  n.op = Op::round_ste;
  n.in[0] = x;
  n.value = node(x).value;
  for (auto& v : n.value.data) v = std::nearbyint(v);
  return push(std::move(n));
}

NodeId Graph::softplus(NodeId x) {
  Node n;
  n.op = Op::softplus;
  n.in[0] = x;
  n.value = node(x).value;
  for (auto& v : n.value.data) v = v > 20.0f ? v : std::log1p(std::exp(v));
  return push(std::move(n));
}

NodeId Graph::abs(NodeId x) {
  Node n;
  n.op = Op::abs;
  n.in[0] = x;
  n.value = node(x).value;
  n.value.array() = n.value.array().abs();
  return push(std::move(n));
}

NodeId Graph::square(NodeId x) {
  Node n;
  n.op = Op::square;
  n.in[0] = x;
  n.value = node(x).value;
  n.value.array() = n.value.array().square();
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  Node n;
  n.op = Op::sum;
  n.in[0] = x;
  double acc = 0.0;
  for (float v : node(x).value.data) acc += v;
  n.value = Grid4(1, 1, 1, 1, float(acc));
  return push(std::move(n));
}

NodeId Graph::channel_broadcast(NodeId per_channel, NodeId like) {
  const Grid4& P = node(per_channel).value;
  const Grid4& L = node(like).value;
  if (P.n() != 1 || P.h() != 1 || P.w() != 1 || P.c() != L.c()) {
    throw ShapeError("channel_broadcast: expected [1," + std::to_string(L.c()) + ",1,1], got " + shape_string(P.shape));
  }
  Node n;
  n.op = Op::channel_broadcast;
  n.in = {per_channel, like, -1};
  n.value = Grid4(L.shape);
  const std::size_t plane = L.plane();
  for (int b = 0; b < L.n(); ++b)
    for (int c = 0; c < L.c(); ++c)
      std::fill_n(n.value.data.data() + (std::size_t(b) * L.c() + c) * plane, plane, P.data[std::size_t(c)]);
  return push(std::move(n));
}

NodeId Graph::gaussian_bits(NodeId x, NodeId scale_node, float min_scale) {
  check_same_shape(x, scale_node, "gaussian_bits");
  Node n;
  n.op = Op::gaussian_bits;
  n.in = {x, scale_node, -1};
  n.attr = min_scale;
  const Grid4& X = node(x).value;
  const Grid4& S = node(scale_node).value;
  n.value = Grid4(X.shape);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double s = std::max<double>(S.data[i], min_scale);
    const double v = std::abs(double(X.data[i]));
    const double p = normal_cdf((0.5 - v) / s) - normal_cdf((-0.5 - v) / s);
    n.value.data[i] = float(-std::log2(std::max(p, kLikelihoodBound)));
  }
  return push(std::move(n));
}

// ---------------------------------------------------------------------------

void Graph::backward(NodeId root) {
  if (node(root).value.size() != 1) throw ShapeError("backward: root is not a scalar");
  backward(root, Grid4(1, 1, 1, 1, 1.0f));
}

void Graph::backward(NodeId root, const Grid4& seed) {
  if (nodes_.empty()) throw StateError("backward before forward");
  if (differentiated_) throw StateError("graph already differentiated");
  if (node(root).value.shape != seed.shape) throw ShapeError("backward: seed shape mismatch");
  differentiated_ = true;
  for (auto& n : nodes_) n.grad = Grid4(n.value.shape, 0.0f);
  nodes_[std::size_t(root)].grad = seed;
  for (NodeId id = root; id >= 0; --id) {
    const Node& n = nodes_[std::size_t(id)];
    if (n.op == Op::param) {
      params_->all()[std::size_t(n.param_index)].grad.array() += n.grad.array();
      continue;
    }
    if (n.op == Op::input) continue;
    backprop(n);
  }
}

void Graph::backprop(const Node& n) {
  const Grid4& G = n.grad;
  auto grad_of = [&](NodeId id) -> Grid4& { return nodes_[std::size_t(id)].grad; };
  switch (n.op) {
    case Op::input:
    case Op::param:
      break;
    case Op::conv2d: {
      const Grid4& X = node(n.in[0]).value;
      const Grid4& W = node(n.in[1]).value;
      ConvGeom g{X.c(), X.h(), X.w(), W.n(), W.h(), n.stride, W.h() / 2, n.value.h(), n.value.w()};
      // Aligned copies throughout, as in the forward pass.
      const MatRM Wt = Eigen::Map<const MatRM>(W.data.data(), g.cout, g.col_rows()).transpose();
      MatRM dW = MatRM::Zero(g.cout, g.col_rows());
      Eigen::VectorXf dB = Eigen::VectorXf::Zero(g.cout);
      Grid4& dX = grad_of(n.in[0]);
      MatRM cols(g.col_rows(), g.col_cols());
      MatRM dcols(g.col_rows(), g.col_cols());
      MatRM dOut(g.cout, g.col_cols());
      for (int b = 0; b < X.n(); ++b) {
        const float* xin = X.data.data() + std::size_t(b) * g.cin * g.h * g.w;
        float* dxin = dX.data.data() + std::size_t(b) * g.cin * g.h * g.w;
        dOut = Eigen::Map<const MatRM>(G.data.data() + std::size_t(b) * g.cout * g.ho * g.wo, g.cout, g.col_cols());
        dB += dOut.rowwise().sum();
        if (g.k == 1 && n.stride == 1) {
          cols = Eigen::Map<const MatRM>(xin, g.col_rows(), g.col_cols());
        } else {
          im2col(xin, g, cols.data());
        }
        dW.noalias() += dOut * cols.transpose();
        dcols.noalias() = Wt * dOut;
        if (g.k == 1 && n.stride == 1) {
          Eigen::Map<MatRM>(dxin, g.col_rows(), g.col_cols()).array() += dcols.array();
        } else {
          col2im(dcols.data(), g, dxin);
        }
      }
      Eigen::Map<MatRM>(grad_of(n.in[1]).data.data(), g.cout, g.col_rows()).array() += dW.array();
      Eigen::Map<Eigen::VectorXf>(grad_of(n.in[2]).data.data(), g.cout).array() += dB.array();
      break;
    }
    case Op::leaky_relu: {
      const auto x = node(n.in[0]).value.array();
      grad_of(n.in[0]).array() += (x > 0.0f).select(G.array(), G.array() * n.attr);
      break;
    }
    case Op::upsample2x: {
      Grid4& dX = grad_of(n.in[0]);
      for (int b = 0; b < G.n(); ++b)
        for (int c = 0; c < G.c(); ++c)
          for (int y = 0; y < G.h(); ++y)
            for (int x = 0; x < G.w(); ++x) dX(b, c, y / 2, x / 2) += G(b, c, y, x);
      break;
    }
    case Op::concat: {
      const std::size_t plane = G.plane();
      for (int b = 0; b < G.n(); ++b) {
        int c0 = 0;
        for (NodeId id : n.inputs) {
          Grid4& d = grad_of(id);
          const std::size_t len = std::size_t(d.c()) * plane;
          Eigen::Map<Eigen::ArrayXf>(d.data.data() + std::size_t(b) * len, Eigen::Index(len)) +=
              Eigen::Map<const Eigen::ArrayXf>(G.data.data() + (std::size_t(b) * G.c() + c0) * plane, Eigen::Index(len));
          c0 += d.c();
        }
      }
      break;
    }
    case Op::add:
      grad_of(n.in[0]).array() += G.array();
      grad_of(n.in[1]).array() += G.array();
      break;
    case Op::sub:
      grad_of(n.in[0]).array() += G.array();
      grad_of(n.in[1]).array() -= G.array();
      break;
    case Op::mul:
      grad_of(n.in[0]).array() += G.array() * node(n.in[1]).value.array();
      grad_of(n.in[1]).array() += G.array() * node(n.in[0]).value.array();
      break;
    case Op::scale:
      grad_of(n.in[0]).array() += G.array() * n.attr;
      break;
    case Op::uniform_noise:
    case Op::round_ste:
      grad_of(n.in[0]).array() += G.array();
      break;
    case Op::softplus: {
      // Scalar exp: Eigen's packet exp rounds differently from std::exp and
      // would make results depend on buffer alignment.
      const Grid4& X = node(n.in[0]).value;
      Grid4& dX = grad_of(n.in[0]);
      for (std::size_t i = 0; i < X.size(); ++i) dX.data[i] += G.data[i] / (1.0f + std::exp(-X.data[i]));
      break;
    }
    case Op::abs: {
      const auto x = node(n.in[0]).value.array();
      grad_of(n.in[0]).array() += G.array() * x.sign();
      break;
    }
    case Op::square:
      grad_of(n.in[0]).array() += 2.0f * G.array() * node(n.in[0]).value.array();
      break;
    case Op::sum:
      grad_of(n.in[0]).array() += G.data[0];
      break;
    case Op::channel_broadcast: {
      Grid4& dP = grad_of(n.in[0]);
      const std::size_t plane = G.plane();
      for (int b = 0; b < G.n(); ++b)
        for (int c = 0; c < G.c(); ++c) {
          double acc = 0.0;
          const float* g = G.data.data() + (std::size_t(b) * G.c() + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) acc += g[i];
          dP.data[std::size_t(c)] += float(acc);
        }
      break;
    }
    case Op::gaussian_bits: {
      const Grid4& X = node(n.in[0]).value;
      const Grid4& S = node(n.in[1]).value;
      Grid4& dX = grad_of(n.in[0]);
      Grid4& dS = grad_of(n.in[1]);
      for (std::size_t i = 0; i < X.size(); ++i) {
        const bool floored = S.data[i] < n.attr;
        const double s = floored ? double(n.attr) : double(S.data[i]);
        const double x = X.data[i];
        const double a = (x + 0.5) / s, b = (x - 0.5) / s;
        const double v = std::abs(x);
        const double p = normal_cdf((0.5 - v) / s) - normal_cdf((-0.5 - v) / s);
        if (p < kLikelihoodBound) continue;
        const double k = -double(G.data[i]) / (p * std::log(2.0));
        dX.data[i] += float(k * (normal_pdf(a) - normal_pdf(b)) / s);
        if (!floored) dS.data[i] += float(k * -(a * normal_pdf(a) - b * normal_pdf(b)) / s);
      }
      break;
    }
  }
}

}  // namespace lpcc::nn
