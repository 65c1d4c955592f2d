// SPDX-License-Identifier: Apache-2.0

#include "lpcc/pointcloud_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "lpcc/errors.hpp"

namespace lpcc {

namespace {

float read_le_f32(const unsigned char* p) {
  std::uint32_t u = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
                    (std::uint32_t(p[3]) << 24);
  return std::bit_cast<float>(u);
}

void write_le_f32(std::ostream& os, float v) {
  const auto u = std::bit_cast<std::uint32_t>(v);
  const char b[4] = {char(u & 0xff), char((u >> 8) & 0xff), char((u >> 16) & 0xff), char(u >> 24)};
  os.write(b, 4);
}

}  // namespace

PointCloud load_kitti_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 16 != 0) {
    throw MalformedFile(path.string() + ": length " + std::to_string(bytes.size()) +
                        " is not a multiple of 16");
  }
  PointCloud cloud;
  cloud.points.reserve(bytes.size() / 16);
  for (std::size_t off = 0; off < bytes.size(); off += 16) {
    Point3 p(read_le_f32(&bytes[off]), read_le_f32(&bytes[off + 4]), read_le_f32(&bytes[off + 8]));
    if (!p.allFinite()) throw MalformedFile(path.string() + ": non-finite coordinate");
    cloud.points.push_back(p);
  }
  return cloud;
}

void save_kitti_bin(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : cloud.points) {
    write_le_f32(out, p.x());
    write_le_f32(out, p.y());
    write_le_f32(out, p.z());
    write_le_f32(out, 0.0f);
  }
}

void save_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  char line[128];
  for (const auto& p : cloud.points) {
    const int n = std::snprintf(line, sizeof(line), "%.6f %.6f %.6f\n", p.x(), p.y(), p.z());
    out.write(line, n);
  }
  if (!out) throw Error("write failed: " + path.string());
}

PointCloud load_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    float x, y, z;
    std::string rest;
    if (!(ss >> x >> y >> z) || (ss >> rest)) {
      throw MalformedFile(path.string() + ": unparsable point at line " + std::to_string(lineno));
    }
    Point3 p(x, y, z);
    if (!p.allFinite()) {
      throw MalformedFile(path.string() + ": non-finite point at line " + std::to_string(lineno));
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

std::vector<PointCloud> load_frame_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".bin" || ext == ".xyz")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PointCloud> frames;
  frames.reserve(files.size());
  for (const auto& f : files) {
    frames.push_back(f.extension() == ".bin" ? load_kitti_bin(f) : load_xyz(f));
  }
  return frames;
}

}  // namespace lpcc
