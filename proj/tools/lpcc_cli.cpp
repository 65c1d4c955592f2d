// SPDX-License-Identifier: Apache-2.0
//
// lpcc command-line front end. Failures print one JSON object on stderr,
// {"status":"error","kind":...,"message":...}, and exit nonzero.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "lpcc/bitstream.hpp"
#include "lpcc/codec.hpp"
#include "lpcc/config.hpp"
#include "lpcc/errors.hpp"
#include "lpcc/metrics.hpp"
#include "lpcc/pointcloud_io.hpp"

namespace fs = std::filesystem;
using namespace lpcc;

namespace {

constexpr const char* kCsvHeader = "frame,bits_mask,bits_residual,bits_intra,bpp,chamfer,rmse,acc";

// ---------------------------------------------------------------------------
// Shared option groups

struct InputOptions {
  std::string dir;
  bool synthetic = false;
  std::uint64_t seed = 0;
  int frames = 3;
  double dropout = 0.02;
  double max_range = 60.0;

  void add(CLI::App* app) {
    app->add_option("--input", dir, "Directory of .bin / .xyz frames");
    app->add_flag("--synthetic", synthetic, "Use a generated street scene instead of --input");
    app->add_option("--synthetic-seed", seed, "Scene seed");
    app->add_option("--frames", frames, "Synthetic frame count");
    app->add_option("--dropout", dropout, "Synthetic per-pixel dropout rate");
    app->add_option("--max-range", max_range, "Synthetic sensor range limit in meters (0 = none)");
  }

  std::vector<PointCloud> load(const SensorConfig& sensor) const {
    if (synthetic == !dir.empty()) throw ConfigError("give exactly one of --input and --synthetic");
    if (synthetic) return generate_scene(make_street_scene(seed, frames, dropout, max_range), sensor);
    auto clouds = load_frame_dir(dir);
    if (clouds.empty()) throw ConfigError("no .bin or .xyz frames in " + dir);
    return clouds;
  }
};

struct ConfigOptions {
  std::string file;
  std::vector<std::string> set;
  std::optional<int> height, width, k, seeds;
  std::optional<float> q, intra_q, residual_q;
  std::optional<std::string> residual, residual_model, predictor_model;

  void add(CLI::App* app) {
    app->add_option("--config", file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", set, "Extra key=value setting (repeatable)");
    app->add_option("--height", height, "Range image rows");
    app->add_option("--width", width, "Range image columns");
    app->add_option("--k", k, "Inter frames per coding unit");
    app->add_option("--seeds", seeds, "Intra seed count");
    app->add_option("--q", q, "Quantization step for intra and residual, meters");
    app->add_option("--intra-q", intra_q, "Intra quantization step, meters");
    app->add_option("--residual-q", residual_q, "Handcrafted residual quantization step, meters");
    app->add_option("--residual", residual, "Residual backend: handcrafted or learned");
    app->add_option("--residual-model", residual_model, "Learned residual model file");
    app->add_option("--predictor-model", predictor_model, "U-Net predictor file (default: reference average)");
  }

  CodecConfig resolve() const {
    CodecConfig c = file.empty() ? CodecConfig{} : load_config(file);
    for (const auto& kv : set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
      apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (height) c.sensor.height = *height;
    if (width) c.sensor.width = *width;
    if (k) c.k = *k;
    if (seeds) c.intra_seeds = *seeds;
    if (q) c.intra_q = c.residual_q = *q;
    if (intra_q) c.intra_q = *intra_q;
    if (residual_q) c.residual_q = *residual_q;
    if (residual) apply_setting(c, "residual", *residual);
    if (residual_model) {
      c.residual_model = *residual_model;
      if (!residual) c.residual = ResidualBackend::learned;
    }
    if (predictor_model) c.predictor_model = *predictor_model;
    c.validate();
    return c;
  }
};

std::size_t total_points(const std::vector<PointCloud>& clouds) {
  return std::accumulate(clouds.begin(), clouds.end(), std::size_t(0),
                         [](std::size_t a, const PointCloud& c) { return a + c.size(); });
}

std::string frame_file(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06d.xyz", i);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(9);
  o << v;
  return o.str();
}

// ---------------------------------------------------------------------------
// Commands

int cmd_encode(const InputOptions& in, const ConfigOptions& co, const std::string& output) {
  const CodecConfig config = co.resolve();
  const CodecModels models = CodecModels::load(config);
  const auto clouds = in.load(config.sensor);
  std::vector<ProjectionStats> stats;
  const auto frames = project_sequence(clouds, config.sensor, &stats);
  const EncodeResult enc = encode_sequence(frames, config, models);
  const std::size_t bytes = write_container(enc.container, output);

  const std::size_t points = total_points(clouds);
  std::size_t discarded = 0;
  for (const auto& s : stats) discarded += s.out_of_fov;
  std::cout << "frame,type,bits_mask,bits_residual,bits_intra,bits_framing\n";
  for (const auto& fb : enc.frame_bits) {
    std::cout << fb.frame << ',' << (fb.type == FrameType::intra ? "intra" : "inter") << ',' << fb.bits_mask << ','
              << fb.bits_residual << ',' << fb.bits_intra << ',' << fb.bits_framing << '\n';
  }
  std::cout << "header_bits=" << 8 * kHeaderBytes << "\ntotal_bits=" << 8 * bytes << "\npoints=" << points
            << "\nout_of_fov=" << discarded << "\nbpp=" << fmt(bpp(8 * bytes, points)) << '\n';
  return 0;
}

int cmd_decode(const std::string& input, const std::string& out_dir, const ConfigOptions& co) {
  const Container c = read_container(input);
  CodecModels models;
  if (co.predictor_model) {
    CodecConfig pc;
    pc.sensor = c.header.sensor();
    pc.predictor_model = *co.predictor_model;
    models.predictor = CodecModels::load(pc).predictor;
  }
  if (co.residual_model) {
    if (!fs::exists(*co.residual_model)) throw ConfigError("model file not found: " + *co.residual_model);
    models.residual = std::make_shared<HyperpriorModel>(HyperpriorModel::load(*co.residual_model));
  }
  const auto frames = decode_sequence(c, models);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    save_xyz(backproject(frames[i]), fs::path(out_dir) / frame_file(int(i)));
  }
  std::cout << "frames=" << frames.size() << "\n";
  return 0;
}

struct EvalTable {
  std::string csv;
  double mean_chamfer = 0.0;
};

/// CSV rows for decoded clouds against originals. `bits` may be empty.
EvalTable eval_rows(const std::vector<PointCloud>& originals, const std::vector<PointCloud>& decoded,
                    const SensorConfig& sensor, const std::vector<FrameBits>& bits, std::uint64_t file_bits) {
  if (originals.size() != decoded.size()) {
    throw ConfigError("original and decoded frame counts differ: " + std::to_string(originals.size()) + " vs " +
                      std::to_string(decoded.size()));
  }
  std::ostringstream o;
  o << kCsvHeader << '\n';
  double cd_sum = 0.0, sq_sum = 0.0, hit_sum = 0.0;
  std::size_t valid_sum = 0;
  std::uint64_t m = 0, r = 0, a = 0;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    const double cd = chamfer(originals[i], decoded[i]);
    const RangeImage truth = project(originals[i], sensor);
    const RangeImage pred = project(decoded[i], sensor);
    const Mask mask = extract_mask(truth);
    const std::size_t valid = popcount(mask);
    double rmse = std::nan(""), acc = std::nan("");
    if (valid > 0) {
      const RangeMetrics rm = range_metrics(pred, truth, mask);
      rmse = rm.rmse;
      acc = rm.acc;
      sq_sum += rm.rmse * rm.rmse * double(valid);
      hit_sum += rm.acc * double(valid);
      valid_sum += valid;
    }
    const FrameBits fb = i < bits.size() ? bits[i] : FrameBits{};
    m += fb.bits_mask;
    r += fb.bits_residual;
    a += fb.bits_intra;
    const double frame_bpp = bits.empty() ? 0.0 : bpp(fb.total(), originals[i].size());
    o << i << ',' << fb.bits_mask << ',' << fb.bits_residual << ',' << fb.bits_intra << ',' << fmt(frame_bpp) << ','
      << fmt(cd) << ',' << fmt(rmse) << ',' << fmt(acc) << '\n';
    cd_sum += cd;
  }
  const double mean_cd = cd_sum / double(originals.size());
  const double total_bpp = bits.empty() ? 0.0 : bpp(file_bits, total_points(originals));
  const double rmse = valid_sum ? std::sqrt(sq_sum / double(valid_sum)) : std::nan("");
  const double acc = valid_sum ? hit_sum / double(valid_sum) : std::nan("");
  o << "all," << m << ',' << r << ',' << a << ',' << fmt(total_bpp) << ',' << fmt(mean_cd) << ',' << fmt(rmse) << ','
    << fmt(acc) << '\n';
  return {o.str(), mean_cd};
}

int cmd_eval(const InputOptions& in, const std::string& decoded_dir, const std::string& container_path,
             const ConfigOptions& co, const std::string& csv_path) {
  SensorConfig sensor = co.resolve().sensor;
  std::vector<FrameBits> bits;
  std::uint64_t file_bits = 0;
  if (!container_path.empty()) {
    const Container c = read_container(container_path);
    sensor = c.header.sensor();
    bits = frame_bits(c);
    file_bits = 8 * fs::file_size(container_path);
  }
  const auto originals = in.load(sensor);
  const auto decoded = load_frame_dir(decoded_dir);
  write_text(csv_path, eval_rows(originals, decoded, sensor, bits, file_bits).csv);
  return 0;
}

std::vector<float> parse_list(const std::string& s) {
  std::vector<float> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    CodecConfig scratch;
    apply_setting(scratch, "q", item);
    out.push_back(scratch.intra_q);
  }
  return out;
}

int cmd_rd_sweep(const InputOptions& in, const ConfigOptions& co, const std::string& q_grid,
                 const std::vector<std::string>& residual_models, const std::string& csv_path) {
  const CodecConfig base = co.resolve();
  const auto clouds = in.load(base.sensor);
  const auto frames = project_sequence(clouds, base.sensor);
  const std::size_t points = total_points(clouds);

  std::vector<std::pair<std::string, CodecConfig>> settings;
  if (residual_models.empty()) {
    for (float q : parse_list(q_grid)) {
      CodecConfig c = base;
      c.intra_q = c.residual_q = q;
      c.residual = ResidualBackend::handcrafted;
      settings.emplace_back("q=" + fmt(q), c);
    }
  } else {
    for (const auto& path : residual_models) {
      CodecConfig c = base;
      c.residual = ResidualBackend::learned;
      c.residual_model = path;
      settings.emplace_back("model=" + path, c);
    }
  }
  std::ostringstream o;
  o << "setting,bpp,chamfer\n";
  for (const auto& [name, config] : settings) {
    config.validate();
    const CodecModels models = CodecModels::load(config);
    const EncodeResult enc = encode_sequence(frames, config, models);
    const auto decoded = decode_sequence(parse_container(enc.bytes), models);
    double cd = 0.0;
    for (std::size_t i = 0; i < clouds.size(); ++i) cd += chamfer(clouds[i], backproject(decoded[i]));
    o << name << ',' << fmt(bpp(8 * enc.bytes.size(), points)) << ',' << fmt(cd / double(clouds.size())) << '\n';
  }
  write_text(csv_path, o.str());
  return 0;
}

struct TrainOptions {
  int epochs = 10;
  float lr = 1e-3f;
  int batch = 4;
  int crop = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string history;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--batch", batch, "Batch size");
    app->add_option("--crop", crop, "Random column crop width (0 = full frames)");
    app->add_option("--seed", seed, "Initialization and sampling seed");
    app->add_option("--out", out, "Model file to write")->required();
    app->add_option("--history", history, "Loss-history CSV path (default: stdout)");
  }
};

int cmd_train_predictor(const InputOptions& in, const ConfigOptions& co, const TrainOptions& t,
                        const std::string& mode_name, bool no_mask, int depth, int channels) {
  PredictionMode mode;
  if (mode_name == "bidirectional") mode = PredictionMode::bidirectional;
  else if (mode_name == "unidirectional") mode = PredictionMode::unidirectional;
  else throw ConfigError("--mode must be bidirectional or unidirectional");
  const CodecConfig config = co.resolve();
  const auto frames = project_sequence(in.load(config.sensor), config.sensor);
  std::vector<PredictionSample> data;
  const int first = mode == PredictionMode::bidirectional ? 1 : 2;
  const int end = mode == PredictionMode::bidirectional ? int(frames.size()) - 1 : int(frames.size());
  for (int i = first; i < end; ++i) data.push_back(make_prediction_sample(mode, frames, i));
  if (data.empty()) throw ConfigError("not enough frames to form a training sample");

  PredictorModel model(mode, !no_mask, UNetArch{depth, channels}, t.seed);
  const auto history = train_predictor(model, data, {t.epochs, t.lr, t.batch, t.crop, t.seed});
  model.save(t.out);
  std::ostringstream o;
  o << "epoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) o << i + 1 << ',' << fmt(history[i]) << '\n';
  write_text(t.history, o.str());
  return 0;
}

int cmd_train_residual(const InputOptions& in, const ConfigOptions& co, const TrainOptions& t, double lambda,
                       int lambda_index) {
  if (lambda_index >= 0) {
    if (lambda_index >= int(std::size(kLambdaLadder))) throw ConfigError("--lambda-index out of range");
    lambda = kLambdaLadder[lambda_index];
  }
  CodecConfig config = co.resolve();
  config.residual = ResidualBackend::handcrafted;
  const CodecModels models = CodecModels::load(config);
  const auto frames = project_sequence(in.load(config.sensor), config.sensor);
  const auto data = residual_training_samples(frames, config, models);
  if (data.empty()) throw ConfigError("need at least 3 frames to form a residual sample");

  HyperpriorModel model(lambda, {}, t.seed);
  const auto history = train_residual(model, data, {t.epochs, t.lr, t.batch, t.crop, t.seed});
  model.save(t.out);
  std::ostringstream o;
  o << "epoch,rate,distortion,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    o << i + 1 << ',' << fmt(history[i].rate) << ',' << fmt(history[i].distortion) << ',' << fmt(history[i].loss)
      << '\n';
  }
  write_text(t.history, o.str());
  return 0;
}

int cmd_info(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  char magic[4] = {};
  f.read(magic, 4);
  const std::string m(magic, 4);
  if (m == "BPCC") {
    const Container c = read_container(path);
    const auto& h = c.header;
    std::cout << "format=BPCC\nversion=" << int(h.version) << "\nheight=" << h.height << "\nwidth=" << h.width
              << "\nfov_up=" << h.fov_up << "\nfov_down=" << h.fov_down << "\nframe_count=" << h.frame_count
              << "\nk=" << int(h.k) << "\nintra_codec=" << int(h.intra_codec)
              << "\nresidual_codec=" << int(h.residual_codec) << "\nmask_codec=" << int(h.mask_codec)
              << "\nquality=" << h.quality << "\npredictor=" << int(h.predictor)
              << "\npredictor_fingerprint=" << h.predictor_fingerprint
              << "\nresidual_fingerprint=" << h.residual_fingerprint << "\nbytes=" << fs::file_size(path) << "\n";
    std::cout << "frame,type,bits_mask,bits_residual,bits_intra,bits_framing\n";
    for (const auto& fb : frame_bits(c)) {
      std::cout << fb.frame << ',' << (fb.type == FrameType::intra ? "intra" : "inter") << ',' << fb.bits_mask << ','
                << fb.bits_residual << ',' << fb.bits_intra << ',' << fb.bits_framing << '\n';
    }
    return 0;
  }
  if (m == "BPNN") {
    const nn::ModelParams p = nn::ModelParams::load(path);
    std::cout << "format=BPNN\nseed=" << p.seed() << "\narrays=" << p.all().size()
              << "\nscalars=" << p.scalar_count() << "\nfingerprint=" << p.fingerprint() << "\n";
    for (const auto& a : p.all()) std::cout << a.name << ' ' << nn::shape_string(a.value.shape) << '\n';
    return 0;
  }
  throw UnsupportedFormat(path + " is neither a BPCC container nor a BPNN model");
}

// ---------------------------------------------------------------------------

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const MalformedFile*>(&e)) return "malformed_file";
  if (dynamic_cast<const UnsupportedFormat*>(&e)) return "unsupported_format";
  if (dynamic_cast<const DecodeError*>(&e)) return "decode_error";
  if (dynamic_cast<const EncodeError*>(&e)) return "encode_error";
  if (dynamic_cast<const EmptyFrame*>(&e)) return "empty_frame";
  if (dynamic_cast<const UndefinedMetric*>(&e)) return "undefined_metric";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape_error";
  if (dynamic_cast<const StateError*>(&e)) return "state_error";
  if (dynamic_cast<const TrainingDivergence*>(&e)) return "training_divergence";
  if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const Error*>(&e)) return "error";
  return "internal_error";
}

int report(const std::string& kind, const std::string& message, int code) {
  const nlohmann::json line = {{"status", "error"}, {"kind", kind}, {"message", message}};
  std::cerr << line.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR range-image sequence codec"};
  app.require_subcommand(1);

  InputOptions enc_in;
  ConfigOptions enc_cfg;
  std::string enc_out;
  auto* encode = app.add_subcommand("encode", "Encode a frame sequence into a container");
  enc_in.add(encode);
  enc_cfg.add(encode);
  encode->add_option("--output,-o", enc_out, "Container path")->required();

  std::string dec_in, dec_out;
  ConfigOptions dec_cfg;
  auto* decode = app.add_subcommand("decode", "Decode a container into .xyz frames");
  decode->add_option("--input,-i", dec_in, "Container path")->required()->check(CLI::ExistingFile);
  decode->add_option("--output-dir,-o", dec_out, "Directory for frame_NNNNNN.xyz files")->required();
  decode->add_option("--residual-model", dec_cfg.residual_model, "Learned residual model file");
  decode->add_option("--predictor-model", dec_cfg.predictor_model, "U-Net predictor file");

  InputOptions ev_in;
  ConfigOptions ev_cfg;
  std::string ev_decoded, ev_container, ev_csv;
  auto* eval = app.add_subcommand("eval", "Per-frame metrics of decoded frames against originals");
  ev_in.add(eval);
  ev_cfg.add(eval);
  eval->add_option("--decoded", ev_decoded, "Directory of decoded frames")->required();
  eval->add_option("--container", ev_container, "Container, for bit counts and sensor geometry");
  eval->add_option("--csv", ev_csv, "Output CSV (default: stdout)");

  InputOptions rd_in;
  ConfigOptions rd_cfg;
  std::string rd_grid = "0.02,0.05,0.1,0.2", rd_csv;
  std::vector<std::string> rd_models;
  auto* rd = app.add_subcommand("rd-sweep", "Rate-distortion sweep over quantization steps or residual models");
  rd_in.add(rd);
  rd_cfg.add(rd);
  rd->add_option("--q-grid", rd_grid, "Comma-separated quantization steps");
  rd->add_option("--residual-models", rd_models, "Learned residual models to sweep instead of q")->delimiter(',');
  rd->add_option("--csv", rd_csv, "Output CSV (default: stdout)");

  InputOptions tp_in;
  ConfigOptions tp_cfg;
  TrainOptions tp;
  std::string tp_mode = "bidirectional";
  bool tp_no_mask = false;
  int tp_depth = 3, tp_channels = 16;
  auto* train_p = app.add_subcommand("train-predictor", "Train a U-Net frame predictor");
  tp_in.add(train_p);
  tp_cfg.add(train_p);
  tp.add(train_p);
  train_p->add_option("--mode", tp_mode, "bidirectional or unidirectional");
  train_p->add_flag("--no-mask", tp_no_mask, "Do not feed or apply the validity mask");
  train_p->add_option("--depth", tp_depth, "U-Net levels");
  train_p->add_option("--channels", tp_channels, "Channels of the first level");

  InputOptions tr_in;
  ConfigOptions tr_cfg;
  TrainOptions tr;
  tr.batch = 2;
  double tr_lambda = 0.03;
  int tr_lambda_index = -1;
  auto* train_r = app.add_subcommand("train-residual", "Train a learned residual coder");
  tr_in.add(train_r);
  tr_cfg.add(train_r);
  tr.add(train_r);
  train_r->add_option("--lambda", tr_lambda, "Rate-distortion weight");
  train_r->add_option("--lambda-index", tr_lambda_index, "Index into the ladder 0.003,0.01,0.03,0.1,0.3");

  std::string info_path;
  auto* info = app.add_subcommand("info", "Describe a container or model file");
  info->add_option("path", info_path, "File")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage_error", e.what(), 2);
  }

  try {
    if (*encode) return cmd_encode(enc_in, enc_cfg, enc_out);
    if (*decode) return cmd_decode(dec_in, dec_out, dec_cfg);
    if (*eval) return cmd_eval(ev_in, ev_decoded, ev_container, ev_cfg, ev_csv);
    if (*rd) return cmd_rd_sweep(rd_in, rd_cfg, rd_grid, rd_models, rd_csv);
    if (*train_p) return cmd_train_predictor(tp_in, tp_cfg, tp, tp_mode, tp_no_mask, tp_depth, tp_channels);
    if (*train_r) return cmd_train_residual(tr_in, tr_cfg, tr, tr_lambda, tr_lambda_index);
    if (*info) return cmd_info(info_path);
  } catch (const std::exception& e) {
    return report(error_kind(e), e.what(), 1);
  }
  return 0;
}
