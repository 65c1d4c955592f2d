// SPDX-License-Identifier: Apache-2.0

#include "lpcc/bitstream.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "lpcc/errors.hpp"

namespace lpcc {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::span<const std::uint8_t> b) { out.insert(out.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> out;

 private:
  void le(std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
  }
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> in, std::string context) : in_(in), context_(std::move(context)) {}

  std::uint8_t u8() { return std::uint8_t(le(1)); }
  std::uint16_t u16() { return std::uint16_t(le(2)); }
  std::uint32_t u32() { return le(4); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  void set_context(std::string c) { context_ = std::move(c); }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw DecodeError(context_ + ": truncated");
  }
  std::uint32_t le(int n) {
    need(std::size_t(n));
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint32_t(in_[pos_ + std::size_t(i)]) << (8 * i);
    pos_ += std::size_t(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::string context_;
};

}  // namespace

SensorConfig ContainerHeader::sensor() const {
  SensorConfig s;
  s.height = height;
  s.width = width;
  s.fov_up = fov_up;
  s.fov_down = fov_down;
  return s;
}

const Chunk* FrameRecord::find(ChunkId id) const {
  for (const auto& c : chunks)
    if (c.id == std::uint8_t(id)) return &c;
  return nullptr;
}

std::vector<std::uint8_t> serialize_container(const Container& c) {
  const auto& h = c.header;
  if (c.records.size() != h.frame_count) throw EncodeError("container record count differs from frame_count");
  Writer w;
  for (char ch : kContainerMagic) w.u8(std::uint8_t(ch));
  w.u8(h.version);
  w.u16(h.height);
  w.u16(h.width);
  w.f32(h.fov_up);
  w.f32(h.fov_down);
  w.u32(h.frame_count);
  w.u8(h.k);
  w.u8(h.intra_codec);
  w.u8(h.residual_codec);
  w.u8(h.mask_codec);
  w.f32(h.quality);
  w.u8(h.predictor);
  w.u32(h.predictor_fingerprint);
  w.u32(h.residual_fingerprint);
  for (const auto& r : c.records) {
    if (r.chunks.size() > 0xFFFF) throw EncodeError("too many chunks in a record");
    w.u32(r.frame_index);
    w.u8(std::uint8_t(r.type));
    w.u16(std::uint16_t(r.chunks.size()));
    for (const auto& ch : r.chunks) {
      if (ch.bytes.size() > 0xFFFFFFFFu) throw EncodeError("chunk too large");
      w.u8(ch.id);
      w.u32(std::uint32_t(ch.bytes.size()));
      w.raw(ch.bytes);
    }
  }
  return std::move(w.out);
}

Container parse_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || !std::equal(kContainerMagic.begin(), kContainerMagic.end(), bytes.begin(),
                                      [](char a, std::uint8_t b) { return std::uint8_t(a) == b; })) {
    throw UnsupportedFormat("not a BPCC container (bad magic)");
  }
  if (bytes[4] != kContainerVersion) {
    throw UnsupportedFormat("unsupported container version " + std::to_string(bytes[4]));
  }
  Reader rd(bytes.subspan(5), "header");
  Container c;
  auto& h = c.header;
  h.version = bytes[4];
  h.height = rd.u16();
  h.width = rd.u16();
  h.fov_up = rd.f32();
  h.fov_down = rd.f32();
  h.frame_count = rd.u32();
  h.k = rd.u8();
  h.intra_codec = rd.u8();
  h.residual_codec = rd.u8();
  h.mask_codec = rd.u8();
  h.quality = rd.f32();
  h.predictor = rd.u8();
  h.predictor_fingerprint = rd.u32();
  h.residual_fingerprint = rd.u32();
  for (std::uint32_t i = 0; i < h.frame_count; ++i) {
    rd.set_context("record " + std::to_string(i));
    FrameRecord r;
    r.frame_index = rd.u32();
    const std::uint8_t type = rd.u8();
    if (type > 1) throw DecodeError("record " + std::to_string(i) + ": unknown frame type " + std::to_string(type));
    r.type = FrameType(type);
    const std::uint16_t n = rd.u16();
    for (std::uint16_t j = 0; j < n; ++j) {
      Chunk ch;
      ch.id = rd.u8();
      const std::uint32_t len = rd.u32();
      const auto b = rd.raw(len);
      ch.bytes.assign(b.begin(), b.end());
      r.chunks.push_back(std::move(ch));
    }
    c.records.push_back(std::move(r));
  }
  if (rd.remaining() != 0) throw DecodeError("container has " + std::to_string(rd.remaining()) + " trailing bytes");
  return c;
}

std::size_t write_container(const Container& c, const std::filesystem::path& path) {
  const auto bytes = serialize_container(c);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw Error("write failed: " + path.string());
  return bytes.size();
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_container(bytes);
}

std::vector<std::uint8_t> serialize_intra(const IntraPayload& p) {
  if (p.seeds.size() != p.region_means.size()) throw EncodeError("intra payload: seed/mean count mismatch");
  if (p.seeds.size() > 0xFFFF) throw EncodeError("intra payload: too many seeds");
  Writer w;
  w.f32(p.q);
  w.u16(std::uint16_t(p.seeds.size()));
  for (std::size_t i = 0; i < p.seeds.size(); ++i) {
    w.u16(std::uint16_t(p.seeds[i].row));
    w.u16(std::uint16_t(p.seeds[i].col));
    w.f32(p.region_means[i]);
  }
  w.u32(std::uint32_t(p.mask_chunk.size()));
  w.raw(p.mask_chunk);
  w.u32(std::uint32_t(p.residual_stream.size()));
  w.raw(p.residual_stream);
  return std::move(w.out);
}

IntraPayload parse_intra(std::span<const std::uint8_t> bytes) {
  Reader rd(bytes, "intra payload");
  IntraPayload p;
  p.q = rd.f32();
  const std::uint16_t n = rd.u16();
  for (std::uint16_t i = 0; i < n; ++i) {
    const int row = rd.u16();
    const int col = rd.u16();
    p.seeds.push_back({row, col});
    p.region_means.push_back(rd.f32());
  }
  auto m = rd.raw(rd.u32());
  p.mask_chunk.assign(m.begin(), m.end());
  auto r = rd.raw(rd.u32());
  p.residual_stream.assign(r.begin(), r.end());
  if (rd.remaining() != 0) throw DecodeError("intra payload has trailing bytes");
  return p;
}

std::size_t ByteAccounting::total() const {
  std::size_t t = header + framing;
  for (const auto& [id, n] : chunks) t += n;
  return t;
}

ByteAccounting account(const Container& c) {
  ByteAccounting a;
  a.header = kHeaderBytes;
  for (const auto& r : c.records) {
    a.framing += kRecordFramingBytes + kChunkFramingBytes * r.chunks.size();
    for (const auto& ch : r.chunks) a.chunks[ch.id] += ch.bytes.size();
  }
  return a;
}

std::map<std::uint8_t, std::size_t> record_chunk_bytes(const FrameRecord& r) {
  std::map<std::uint8_t, std::size_t> m;
  for (const auto& ch : r.chunks) m[ch.id] += ch.bytes.size();
  return m;
}

}  // namespace lpcc
