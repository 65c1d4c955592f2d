// SPDX-License-Identifier: Apache-2.0
//
// Learned residual coder: analysis/synthesis transforms with a scale
// hyperprior. Stream layout (little-endian):
//   u8  version
//   u32 model fingerprint
//   u32 z length, z bytes   (per-channel Gaussian prior, channel-major raster)
//   u32 y length, y bytes   (zero-mean Gaussian with per-element scale)

#include "lpcc/residual_codec.hpp"

#include <cmath>
#include <numeric>

#include "lpcc/entropy_models.hpp"
#include "lpcc/errors.hpp"
#include "lpcc/range_coder.hpp"
#include "lpcc/rng.hpp"

namespace lpcc {

namespace {

constexpr float kInputScale = 10.0f;  // network works in decimeters
constexpr float kLeak = 0.2f;

int round_up(int v, int m) { return (v + m - 1) / m * m; }

/// Residual (edge replicated) and mask (zero padded) as a [1,2,Hp,Wp] grid.
/// Columns are read cyclically from `col_offset`.
void fill_inputs(nn::Grid4& in, nn::Grid4* target, int b, const ResidualFrame& r, const Mask& mask, int col_offset) {
  const int H = int(r.rows()), W = int(r.cols());
  const int Hp = in.h(), Wp = in.w();
  const bool crop = col_offset >= 0;
  for (int y = 0; y < Hp; ++y) {
    for (int x = 0; x < Wp; ++x) {
      int sy = std::min(y, H - 1);
      int sx = crop ? (x + col_offset) % W : std::min(x, W - 1);
      const bool inside = y < H && (crop || x < W);
      in(b, 0, y, x) = r(sy, sx) * kInputScale;
      in(b, 1, y, x) = inside && mask(sy, sx) ? 1.0f : 0.0f;
      if (target) (*target)(b, 0, y, x) = inside ? r(sy, sx) : 0.0f;
    }
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw DecodeError("learned residual stream truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(in[pos + std::size_t(i)]) << (8 * i);
  pos += 4;
  return v;
}

float softplus(float v) { return v > 20.0f ? v : std::log1p(std::exp(v)); }

}  // namespace

HyperpriorModel::HyperpriorModel(double lambda, HyperpriorArch arch, std::uint64_t seed)
    : lambda_(lambda), arch_(arch), params_(seed) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be > 0");
  if (arch.c1 < 1 || arch.c2 < 1 || arch.latent < 1 || arch.hyper < 1) throw ConfigError("bad hyperprior architecture");
  auto res = [&](const std::string& name, int c) {
    params_.add_conv(name + ".a", c, c, 3);
    params_.add_conv(name + ".b", c, c, 3);
  };
  params_.add_conv("ga0", 2, arch.c1, 5);
  res("ga0.res", arch.c1);
  params_.add_conv("ga1", arch.c1, arch.c2, 5);
  res("ga1.res", arch.c2);
  params_.add_conv("ga2", arch.c2, arch.latent, 5);
  res("ga2.res", arch.latent);

  params_.add_conv("gs2", arch.latent, arch.c2, 5);
  res("gs2.res", arch.c2);
  params_.add_conv("gs1", arch.c2, arch.c1, 5);
  res("gs1.res", arch.c1);
  params_.add_conv("gs0", arch.c1, 1, 5);

  params_.add_conv("ha0", arch.latent, arch.hyper, 3);
  params_.add_conv("ha1", arch.hyper, arch.hyper, 3);
  params_.add_conv("hs1", arch.hyper, arch.hyper, 3);
  params_.add_conv("hs0", arch.hyper, arch.latent, 3);

  params_.add_constant("z.mean", {1, arch.hyper, 1, 1}, 0.0f);
  // softplus(0.5413) = 1
  params_.add_constant("z.scale", {1, arch.hyper, 1, 1}, 0.5413f);
}

nn::NodeId HyperpriorModel::res_block(nn::Graph& g, nn::NodeId x, const std::string& name) const {
  const nn::NodeId h = g.conv(g.leaky_relu(g.conv(x, name + ".a"), kLeak), name + ".b");
  return g.add(x, h);
}

nn::NodeId HyperpriorModel::analysis(nn::Graph& g, nn::NodeId x) const {
  nn::NodeId h = res_block(g, g.leaky_relu(g.conv(x, "ga0", 2), kLeak), "ga0.res");
  h = res_block(g, g.leaky_relu(g.conv(h, "ga1", 2), kLeak), "ga1.res");
  return res_block(g, g.conv(h, "ga2", 2), "ga2.res");
}

nn::NodeId HyperpriorModel::synthesis(nn::Graph& g, nn::NodeId y_hat, nn::NodeId mask) const {
  nn::NodeId h = res_block(g, g.leaky_relu(g.conv(g.upsample2x(y_hat), "gs2"), kLeak), "gs2.res");
  h = res_block(g, g.leaky_relu(g.conv(g.upsample2x(h), "gs1"), kLeak), "gs1.res");
  h = g.conv(g.upsample2x(h), "gs0");
  return g.mul(g.scale(h, 1.0f / kInputScale), mask);
}

nn::NodeId HyperpriorModel::hyper_analysis(nn::Graph& g, nn::NodeId y) const {
  return g.conv(g.leaky_relu(g.conv(g.abs(y), "ha0", 2), kLeak), "ha1", 2);
}

nn::NodeId HyperpriorModel::hyper_synthesis(nn::Graph& g, nn::NodeId z_hat) const {
  const nn::NodeId h = g.leaky_relu(g.conv(g.upsample2x(z_hat), "hs1"), kLeak);
  return g.softplus(g.conv(g.upsample2x(h), "hs0"));
}

nn::NodeId HyperpriorModel::prior_mean(nn::Graph& g) const { return g.param("z.mean"); }
nn::NodeId HyperpriorModel::prior_scale(nn::Graph& g) const { return g.softplus(g.param("z.scale")); }

void HyperpriorModel::save(const std::filesystem::path& path) const {
  nn::ModelParams copy = params_;
  copy.add_constant("meta.lambda", {1, 1, 1, 1}, float(lambda_));
  copy.add_constant("meta.arch", {1, 1, 1, 4}, 0.0f);
  auto& a = copy["meta.arch"].value.data;
  a = {float(arch_.c1), float(arch_.c2), float(arch_.latent), float(arch_.hyper)};
  copy.save(path);
}

HyperpriorModel HyperpriorModel::load(const std::filesystem::path& path) {
  const nn::ModelParams file = nn::ModelParams::load(path);
  if (!file.contains("meta.lambda") || !file.contains("meta.arch") || file["meta.arch"].value.size() != 4) {
    throw ConfigError(path.string() + " is not a residual model");
  }
  const auto& a = file["meta.arch"].value.data;
  HyperpriorModel model(file["meta.lambda"].value.data[0], {int(a[0]), int(a[1]), int(a[2]), int(a[3])}, file.seed());
  model.params_.assign_from(file);
  return model;
}

// ---------------------------------------------------------------------------

namespace {

struct ZPrior {
  std::vector<float> mean;
  std::vector<int> table;  // bank index per channel
};

ZPrior z_prior(const HyperpriorModel& model) {
  const auto& p = model.params();
  ZPrior zp;
  const auto& bank = GaussianTableBank::instance();
  for (int c = 0; c < model.arch().hyper; ++c) {
    zp.mean.push_back(p["z.mean"].value.data[std::size_t(c)]);
    zp.table.push_back(bank.index_for(softplus(p["z.scale"].value.data[std::size_t(c)])));
  }
  return zp;
}

/// Per-element bank indices for y from the decoded hyper-latent.
std::vector<int> y_tables(const HyperpriorModel& model, const nn::Grid4& z_hat) {
  nn::Graph g(&const_cast<HyperpriorModel&>(model).params());
  const nn::Grid4& sigma = g.value(model.hyper_synthesis(g, g.input(z_hat)));
  const auto& bank = GaussianTableBank::instance();
  std::vector<int> idx(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) idx[i] = bank.index_for(sigma.data[i]);
  return idx;
}

}  // namespace

LearnedEncoding learned_encode(const HyperpriorModel& model, const ResidualFrame& r, const Mask& mask) {
  if (mask.rows() != r.rows() || mask.cols() != r.cols()) throw ShapeError("learned_encode: mask shape mismatch");
  if (r.size() == 0) throw ShapeError("learned_encode: empty residual");
  if (!r.allFinite()) throw EncodeError("learned_encode: residual is not finite");
  const int m = HyperpriorModel::kPadMultiple;
  nn::Grid4 in(1, 2, round_up(int(r.rows()), m), round_up(int(r.cols()), m));
  fill_inputs(in, nullptr, 0, r, mask, -1);

  nn::Graph g(&const_cast<HyperpriorModel&>(model).params());
  const nn::NodeId y = model.analysis(g, g.input(std::move(in)));
  const nn::Grid4& z = g.value(model.hyper_analysis(g, y));
  const nn::Grid4& yv = g.value(y);

  const auto& bank = GaussianTableBank::instance();
  const ZPrior zp = z_prior(model);
  LearnedEncoding result;

  RangeEncoder zenc;
  nn::Grid4 z_hat(z.shape);
  for (int c = 0; c < z.c(); ++c) {
    const GaussianTable& t = bank.table(zp.table[std::size_t(c)]);
    for (int i = 0; i < z.h(); ++i) {
      for (int j = 0; j < z.w(); ++j) {
        const auto s = std::int32_t(std::nearbyint(z(0, c, i, j) - zp.mean[std::size_t(c)]));
        t.encode(zenc, s);
        result.ideal_bits_z += t.cost_bits(s);
        z_hat(0, c, i, j) = float(s) + zp.mean[std::size_t(c)];
      }
    }
  }
  const std::vector<std::uint8_t> zbytes = zenc.finish();

  const std::vector<int> tables = y_tables(model, z_hat);
  RangeEncoder yenc;
  for (std::size_t i = 0; i < yv.size(); ++i) {
    const double v = std::nearbyint(double(yv.data[i]));
    if (!(std::abs(v) < 2147483647.0)) throw EncodeError("latent value overflow");
    const GaussianTable& t = bank.table(tables[i]);
    t.encode(yenc, std::int32_t(v));
    result.ideal_bits_y += t.cost_bits(std::int32_t(v));
  }
  const std::vector<std::uint8_t> ybytes = yenc.finish();

  auto& out = result.bytes;
  out.push_back(HyperpriorModel::kStreamVersion);
  put_u32(out, model.fingerprint());
  put_u32(out, std::uint32_t(zbytes.size()));
  out.insert(out.end(), zbytes.begin(), zbytes.end());
  put_u32(out, std::uint32_t(ybytes.size()));
  out.insert(out.end(), ybytes.begin(), ybytes.end());
  result.z_stream_bytes = zbytes.size();
  result.y_stream_bytes = ybytes.size();
  return result;
}

ResidualFrame learned_decode(const HyperpriorModel& model, std::span<const std::uint8_t> bytes, const Mask& mask) {
  if (bytes.empty()) throw DecodeError("learned residual stream truncated");
  if (bytes[0] != HyperpriorModel::kStreamVersion) {
    throw DecodeError("learned residual stream version " + std::to_string(bytes[0]) + " not supported");
  }
  std::size_t pos = 1;
  const std::uint32_t fp = get_u32(bytes, pos);
  if (fp != model.fingerprint()) throw DecodeError("learned residual stream was written by a different model");
  const std::uint32_t zlen = get_u32(bytes, pos);
  if (pos + zlen > bytes.size()) throw DecodeError("learned residual stream truncated");
  const auto zspan = bytes.subspan(pos, zlen);
  pos += zlen;
  const std::uint32_t ylen = get_u32(bytes, pos);
  if (pos + ylen != bytes.size()) throw DecodeError("learned residual stream length mismatch");
  const auto yspan = bytes.subspan(pos, ylen);

  const int m = HyperpriorModel::kPadMultiple;
  const int Hp = round_up(int(mask.rows()), m), Wp = round_up(int(mask.cols()), m);
  const auto& bank = GaussianTableBank::instance();
  const ZPrior zp = z_prior(model);

  RangeDecoder zdec(zspan);
  nn::Grid4 z_hat(1, model.arch().hyper, Hp / m, Wp / m);
  for (int c = 0; c < z_hat.c(); ++c) {
    const GaussianTable& t = bank.table(zp.table[std::size_t(c)]);
    for (int i = 0; i < z_hat.h(); ++i)
      for (int j = 0; j < z_hat.w(); ++j) z_hat(0, c, i, j) = float(t.decode(zdec)) + zp.mean[std::size_t(c)];
  }
  if (zdec.position() != zspan.size()) throw DecodeError("learned residual z stream has trailing bytes");

  const std::vector<int> tables = y_tables(model, z_hat);
  const int f = HyperpriorModel::kDownsample;
  nn::Grid4 y_hat(1, model.arch().latent, Hp / f, Wp / f);
  RangeDecoder ydec(yspan);
  for (std::size_t i = 0; i < y_hat.size(); ++i) y_hat.data[i] = float(bank.table(tables[i]).decode(ydec));
  if (ydec.position() != yspan.size()) throw DecodeError("learned residual y stream has trailing bytes");

  nn::Grid4 mk(1, 1, Hp, Wp);
  for (int y = 0; y < mask.rows(); ++y)
    for (int x = 0; x < mask.cols(); ++x) mk(0, 0, y, x) = mask(y, x) ? 1.0f : 0.0f;
  nn::Graph g(&const_cast<HyperpriorModel&>(model).params());
  const nn::Grid4& out = g.value(model.synthesis(g, g.input(std::move(y_hat)), g.input(std::move(mk))));
  ResidualFrame r(mask.rows(), mask.cols());
  for (int y = 0; y < mask.rows(); ++y)
    for (int x = 0; x < mask.cols(); ++x) r(y, x) = mask(y, x) ? out(0, 0, y, x) : 0.0f;
  return r;
}

// ---------------------------------------------------------------------------

std::vector<RDHistoryEntry> train_residual(HyperpriorModel& model, const std::vector<ResidualSample>& data,
                                           const ResidualTrainOptions& options) {
  if (data.empty()) throw ConfigError("empty residual training set");
  const int H = int(data[0].residual.rows()), W = int(data[0].residual.cols());
  for (const auto& s : data) {
    if (s.residual.rows() != H || s.residual.cols() != W || s.mask.rows() != H || s.mask.cols() != W) {
      throw ShapeError("residual training samples differ in shape");
    }
  }
  const int m = HyperpriorModel::kPadMultiple;
  if (options.crop_width > 0 && options.crop_width % m != 0) {
    throw ConfigError("crop width must be a multiple of " + std::to_string(m));
  }
  const bool crop = options.crop_width > 0 && options.crop_width < W;
  const int Hp = round_up(H, m), Wp = crop ? options.crop_width : round_up(W, m);
  const int batch = std::max(1, options.batch_size);
  const double unit2 = 1.0 / (kDistortionUnit * kDistortionUnit);

  Rng rng(options.seed, 0x4e5d);
  nn::AdamState adam;
  std::vector<RDHistoryEntry> history;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    RDHistoryEntry mean;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(batch)) {
      const int nb = int(std::min<std::size_t>(std::size_t(batch), order.size() - start));
      nn::Grid4 in(nb, 2, Hp, Wp), target(nb, 1, Hp, Wp), mk(nb, 1, Hp, Wp);
      for (int b = 0; b < nb; ++b) {
        const auto& s = data[order[start + std::size_t(b)]];
        const int off = crop ? int(rng.below(std::uint64_t(W))) : -1;
        fill_inputs(in, &target, b, s.residual, s.mask, off);
        for (int y = 0; y < Hp; ++y)
          for (int x = 0; x < Wp; ++x) mk(b, 0, y, x) = in(b, 1, y, x);
      }
      const double pixels = double(nb) * H * (crop ? Wp : W);

      model.params().zero_grad();
      nn::Graph g(&model.params(), options.seed * 0x9E3779B97F4A7C15ull + ++step);
      const nn::NodeId x = g.input(std::move(in));
      const nn::NodeId y = model.analysis(g, x);
      const nn::NodeId z = model.hyper_analysis(g, y);
      const nn::NodeId y_t = g.uniform_noise(y);
      const nn::NodeId mu = g.channel_broadcast(model.prior_mean(g), z);
      const nn::NodeId z_c = g.uniform_noise(g.sub(z, mu));
      const nn::NodeId z_t = g.add(z_c, mu);
      const nn::NodeId sigma_z = g.channel_broadcast(model.prior_scale(g), z);
      const nn::NodeId sigma_y = model.hyper_synthesis(g, z_t);
      const nn::NodeId bits = g.add(g.sum(g.gaussian_bits(y_t, sigma_y, float(kSigmaMin))),
                                    g.sum(g.gaussian_bits(z_c, sigma_z, float(kSigmaMin))));
      const nn::NodeId r_hat = model.synthesis(g, y_t, g.input(std::move(mk)));
      const nn::NodeId se = g.sum(g.square(g.sub(r_hat, g.input(std::move(target)))));
      const nn::NodeId rate = g.scale(bits, float(1.0 / pixels));
      const nn::NodeId dist = g.scale(se, float(unit2 / pixels));
      const nn::NodeId loss = g.add(rate, g.scale(dist, float(model.lambda())));
      const double lv = g.value(loss).data[0];
      if (!std::isfinite(lv)) throw TrainingDivergence("residual coder loss is not finite");
      mean.rate += g.value(rate).data[0];
      mean.distortion += g.value(dist).data[0];
      mean.loss += lv;
      ++steps;
      g.backward(loss);
      nn::optimizer_step(model.params(), adam, options.lr);
    }
    mean.rate /= steps;
    mean.distortion /= steps;
    mean.loss /= steps;
    history.push_back(mean);
  }
  return history;
}

}  // namespace lpcc
