// SPDX-License-Identifier: Apache-2.0

#include "lpcc/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lpcc/errors.hpp"

namespace lpcc {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(std::string_view key, std::string_view v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("setting '" + std::string(key) + "': not an integer: " + std::string(v));
  }
  return out;
}

float to_float(std::string_view key, std::string_view v) {
  // from_chars for floating point is unavailable on some toolchains still in use.
  const std::string s(v);
  char* end = nullptr;
  const float out = std::strtof(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    throw ConfigError("setting '" + std::string(key) + "': not a number: " + s);
  }
  return out;
}

}  // namespace

void apply_setting(CodecConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "height") c.sensor.height = to_int(key, value);
  else if (key == "width") c.sensor.width = to_int(key, value);
  else if (key == "fov_up") c.sensor.fov_up = to_float(key, value);
  else if (key == "fov_down") c.sensor.fov_down = to_float(key, value);
  else if (key == "k") c.k = to_int(key, value);
  else if (key == "intra_seeds") c.intra_seeds = to_int(key, value);
  else if (key == "intra_q") c.intra_q = to_float(key, value);
  else if (key == "residual_q") c.residual_q = to_float(key, value);
  else if (key == "q") c.intra_q = c.residual_q = to_float(key, value);
  else if (key == "residual_model") c.residual_model = std::string(value);
  else if (key == "predictor_model") c.predictor_model = std::string(value);
  else if (key == "residual") {
    if (value == "handcrafted") c.residual = ResidualBackend::handcrafted;
    else if (value == "learned") c.residual = ResidualBackend::learned;
    else throw ConfigError("setting 'residual': expected handcrafted or learned, got " + std::string(value));
  } else {
    throw ConfigError("unknown setting '" + std::string(key) + "'");
  }
}

CodecConfig parse_config(std::string_view text, CodecConfig base) {
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": '" + std::string(key) + "' set twice");
    }
    try {
      apply_setting(base, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

CodecConfig load_config(const std::filesystem::path& path, CodecConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const CodecConfig& c) {
  std::ostringstream o;
  o.precision(9);
  o << "height = " << c.sensor.height << "\nwidth = " << c.sensor.width << "\nfov_up = " << c.sensor.fov_up
    << "\nfov_down = " << c.sensor.fov_down << "\nk = " << c.k << "\nintra_seeds = " << c.intra_seeds
    << "\nintra_q = " << c.intra_q
    << "\nresidual = " << (c.residual == ResidualBackend::learned ? "learned" : "handcrafted")
    << "\nresidual_q = " << c.residual_q << "\n";
  if (!c.residual_model.empty()) o << "residual_model = " << c.residual_model << "\n";
  if (!c.predictor_model.empty()) o << "predictor_model = " << c.predictor_model << "\n";
  return o.str();
}

}  // namespace lpcc
