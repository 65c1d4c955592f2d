// SPDX-License-Identifier: Apache-2.0

#include "lpcc/predictor.hpp"

#include <cmath>
#include <numeric>

#include "lpcc/errors.hpp"
#include "lpcc/range_projection.hpp"
#include "lpcc/rng.hpp"

namespace lpcc {

namespace {

constexpr float kRangeScale = 20.0f;  // meters per network input unit
constexpr float kOutputScale = 1.0f;  // meters per unit of the correction head

std::string level_name(const char* prefix, int level, const char* suffix) {
  return std::string(prefix) + std::to_string(level) + suffix;
}


}  // namespace

RangeImage predict_average(const RangeImage& ref_a, const RangeImage& ref_b, const Mask& mask) {
  if (ref_a.values.rows() != ref_b.values.rows() || ref_a.values.cols() != ref_b.values.cols() ||
      mask.rows() != ref_a.values.rows() || mask.cols() != ref_a.values.cols()) {
    throw ShapeError("predict_average: shape mismatch");
  }
  RangeImage out = ref_a;
  const auto& a = ref_a.values;
  const auto& b = ref_b.values;
  const auto both = (a != 0.0f) && (b != 0.0f);
  out.values = both.select(0.5f * (a + b), (a != 0.0f).select(a, b));
  out.values *= mask.cast<float>();
  return out;
}

PredictorModel::PredictorModel(PredictionMode mode, bool use_mask, UNetArch arch, std::uint64_t seed)
    : mode_(mode), use_mask_(use_mask), arch_(arch), params_(seed) {
  if (arch.depth < 1 || arch.depth > 6 || arch.base_channels < 1) throw ConfigError("bad U-Net architecture");
  const int in_ch = 2 + (use_mask ? 1 : 0);
  auto ch = [&](int level) { return arch_.base_channels << level; };
  params_.add_conv("enc0.in", in_ch, ch(0), 3);
  params_.add_conv("enc0.conv", ch(0), ch(0), 3);
  for (int l = 1; l <= arch_.depth; ++l) {
    params_.add_conv(level_name("enc", l, ".down"), ch(l - 1), ch(l), 3);
    params_.add_conv(level_name("enc", l, ".conv"), ch(l), ch(l), 3);
  }
  for (int l = arch_.depth - 1; l >= 0; --l) {
    params_.add_conv(level_name("dec", l, ".conv"), ch(l + 1) + ch(l), ch(l), 3);
  }
  params_.add_constant("out.w", {1, ch(0), 3, 3}, 0.0f);
  params_.add_constant("out.b", {1, 1, 1, 1}, 0.0f);
}

nn::NodeId PredictorModel::forward(nn::Graph& g, const nn::Grid4& refs, const nn::Grid4& mask) const {
  const int N = refs.n(), H = refs.h(), W = refs.w();
  if (refs.c() != 2) throw ShapeError("predictor expects 2 reference channels, got " + std::to_string(refs.c()));
  if (mask.shape != std::array<int, 4>{N, 1, H, W}) {
    throw ShapeError("predictor mask shape " + nn::shape_string(mask.shape) + " does not match references");
  }
  const int stride = 1 << arch_.depth;
  if (H % stride != 0 || W % stride != 0) {
    throw ShapeError("predictor input " + std::to_string(H) + "x" + std::to_string(W) + " not divisible by " +
                     std::to_string(stride));
  }

  nn::Grid4 base(N, 1, H, W);
  nn::Grid4 scaled = refs;
  scaled.array() *= 1.0f / kRangeScale;
  for (int b = 0; b < N; ++b) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const float older = refs(b, 0, y, x), newer = refs(b, 1, y, x);
        float v;
        if (mode_ == PredictionMode::bidirectional) {
          v = (older != 0.0f && newer != 0.0f) ? 0.5f * (older + newer) : (older != 0.0f ? older : newer);
        } else {
          v = newer != 0.0f ? newer : older;
        }
        base(b, 0, y, x) = v;
      }
    }
  }

  const nn::NodeId x_in = g.input(std::move(scaled));
  const nn::NodeId m = g.input(mask);
  nn::NodeId h = use_mask_ ? g.concat(x_in, m) : x_in;
  std::vector<nn::NodeId> skips;
  h = g.leaky_relu(g.conv(h, "enc0.in"));
  h = g.leaky_relu(g.conv(h, "enc0.conv"));
  for (int l = 1; l <= arch_.depth; ++l) {
    skips.push_back(h);
    h = g.leaky_relu(g.conv(h, level_name("enc", l, ".down"), 2));
    h = g.leaky_relu(g.conv(h, level_name("enc", l, ".conv")));
  }
  for (int l = arch_.depth - 1; l >= 0; --l) {
    h = g.concat(g.upsample2x(h), skips[std::size_t(l)]);
    h = g.leaky_relu(g.conv(h, level_name("dec", l, ".conv")));
  }
  const nn::NodeId delta = g.conv(h, "out");
  nn::NodeId out = g.softplus(g.add(g.input(std::move(base)), g.scale(delta, kOutputScale)));
  if (use_mask_) out = g.mul(out, m);
  return out;
}

void PredictorModel::save(const std::filesystem::path& path) const {
  nn::ModelParams copy = params_;
  copy.add_constant("meta.mode", {1, 1, 1, 1}, float(mode_));
  copy.add_constant("meta.use_mask", {1, 1, 1, 1}, use_mask_ ? 1.0f : 0.0f);
  copy.add_constant("meta.depth", {1, 1, 1, 1}, float(arch_.depth));
  copy.add_constant("meta.base_channels", {1, 1, 1, 1}, float(arch_.base_channels));
  copy.save(path);
}

PredictorModel PredictorModel::load(const std::filesystem::path& path) {
  const nn::ModelParams file = nn::ModelParams::load(path);
  for (const char* key : {"meta.mode", "meta.use_mask", "meta.depth", "meta.base_channels"}) {
    if (!file.contains(key)) throw ConfigError(path.string() + " is not a predictor model (missing " + key + ")");
  }
  const int mode = int(file["meta.mode"].value.data[0]);
  if (mode != 0 && mode != 1) throw ConfigError("unknown predictor mode in " + path.string());
  UNetArch arch{int(file["meta.depth"].value.data[0]), int(file["meta.base_channels"].value.data[0])};
  PredictorModel model(PredictionMode(mode), file["meta.use_mask"].value.data[0] != 0.0f, arch, file.seed());
  model.params_.assign_from(file);
  return model;
}

RangeImage predict(const PredictorModel& model, std::span<const RangeImage> refs, const Mask& mask) {
  if (refs.size() != 2) throw ShapeError("predict needs exactly 2 reference frames");
  const int H = refs[0].rows(), W = refs[0].cols();
  if (refs[1].rows() != H || refs[1].cols() != W || mask.rows() != H || mask.cols() != W) {
    throw ShapeError("predict: reference/mask shape mismatch");
  }
  nn::Grid4 in(1, 2, H, W), m(1, 1, H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      in(0, 0, y, x) = refs[0].values(y, x);
      in(0, 1, y, x) = refs[1].values(y, x);
      m(0, 0, y, x) = mask(y, x) ? 1.0f : 0.0f;
    }
  }
  nn::Graph g(&const_cast<PredictorModel&>(model).params());
  const nn::NodeId out = model.forward(g, in, m);
  RangeImage result(refs[0].sensor, refs[0].frame_index);
  const nn::Grid4& v = g.value(out);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) result.values(y, x) = v(0, 0, y, x);
  return result;
}

PredictionSample make_prediction_sample(PredictionMode mode, std::span<const RangeImage> frames, int t) {
  PredictionSample s;
  if (mode == PredictionMode::bidirectional) {
    if (t < 1 || std::size_t(t) + 1 >= frames.size()) throw ConfigError("bidirectional sample needs t-1 and t+1");
    s.refs = {frames[std::size_t(t - 1)], frames[std::size_t(t + 1)]};
  } else {
    if (t < 2 || std::size_t(t) >= frames.size()) throw ConfigError("unidirectional sample needs t-2 and t-1");
    s.refs = {frames[std::size_t(t - 2)], frames[std::size_t(t - 1)]};
  }
  s.target = frames[std::size_t(t)];
  s.mask = extract_mask(s.target);
  return s;
}

std::vector<double> train_predictor(PredictorModel& model, const std::vector<PredictionSample>& data,
                                    const PredictorTrainOptions& options) {
  if (data.empty()) throw ConfigError("empty predictor training set");
  const int H = data[0].target.rows(), W = data[0].target.cols();
  const int cw = options.crop_width > 0 ? std::min(options.crop_width, W) : W;
  const int batch = std::max(1, options.batch_size);
  Rng rng(options.seed, 0x7a1e);
  nn::AdamState adam;
  std::vector<double> history;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(batch)) {
      const int nb = int(std::min<std::size_t>(std::size_t(batch), order.size() - start));
      nn::Grid4 refs(nb, 2, H, cw), mask(nb, 1, H, cw), target(nb, 1, H, cw);
      double valid = 0.0;
      for (int b = 0; b < nb; ++b) {
        const auto& s = data[order[start + std::size_t(b)]];
        const int off = cw == W ? 0 : int(rng.below(std::uint64_t(W)));
        for (int y = 0; y < H; ++y) {
          for (int x = 0; x < cw; ++x) {
            const int sx = (x + off) % W;
            refs(b, 0, y, x) = s.refs[0].values(y, sx);
            refs(b, 1, y, x) = s.refs[1].values(y, sx);
            mask(b, 0, y, x) = s.mask(y, sx) ? 1.0f : 0.0f;
            target(b, 0, y, x) = s.target.values(y, sx);
            valid += s.mask(y, sx) ? 1.0 : 0.0;
          }
        }
      }
      model.params().zero_grad();
      nn::Graph g(&model.params());
      const nn::NodeId pred = model.forward(g, refs, mask);
      const nn::NodeId err = g.sum(g.abs(g.sub(pred, g.input(std::move(target)))));
      const nn::NodeId loss = g.scale(err, float(1.0 / std::max(valid, 1.0)));
      const double lv = g.value(loss).data[0];
      if (!std::isfinite(lv)) throw TrainingDivergence("predictor loss is not finite");
      g.backward(loss);
      if (options.max_grad_norm > 0) nn::clip_grad_norm(model.params(), options.max_grad_norm);
      nn::optimizer_step(model.params(), adam, options.lr);
      epoch_loss += lv;
      ++steps;
    }
    history.push_back(epoch_loss / steps);
  }
  return history;
}

}  // namespace lpcc
