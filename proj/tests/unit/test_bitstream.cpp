#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "lpcc/bitstream.hpp"
#include "lpcc/errors.hpp"
#include "lpcc/rng.hpp"

using namespace lpcc;

namespace {

ContainerHeader sample_header(std::uint32_t frames) {
  ContainerHeader h;
  h.height = 64;
  h.width = 256;
  h.fov_up = 2.0f;
  h.fov_down = -24.9f;
  h.frame_count = frames;
  h.k = 2;
  h.intra_codec = 1;
  h.residual_codec = 1;
  h.mask_codec = 1;
  h.quality = 0.05f;
  h.predictor = std::uint8_t(PredictorId::unet);
  h.predictor_fingerprint = 0xDEADBEEF;
  h.residual_fingerprint = 0x01020304;
  return h;
}

std::vector<std::uint8_t> random_bytes(Rng& rng, std::size_t n) {
  std::vector<std::uint8_t> b(n);
  for (auto& v : b) v = std::uint8_t(rng.below(256));
  return b;
}

Container random_container(Rng& rng, std::uint32_t frames) {
  Container c;
  c.header = sample_header(frames);
  for (std::uint32_t i = 0; i < frames; ++i) {
    FrameRecord r;
    r.frame_index = (i * 7) % frames;
    r.type = i % 3 == 0 ? FrameType::intra : FrameType::inter;
    if (r.type == FrameType::intra) {
      r.chunks.push_back({std::uint8_t(ChunkId::intra), random_bytes(rng, rng.below(300))});
    } else {
      r.chunks.push_back({std::uint8_t(ChunkId::mask), random_bytes(rng, rng.below(100))});
      r.chunks.push_back({std::uint8_t(ChunkId::residual_handcrafted), random_bytes(rng, rng.below(500))});
    }
    c.records.push_back(std::move(r));
  }
  return c;
}

}  // namespace

TEST_CASE("a zero-frame container is the bare header") {
  Container c;
  c.header = sample_header(0);
  const auto bytes = serialize_container(c);
  CHECK(bytes.size() == kHeaderBytes);
  CHECK(std::memcmp(bytes.data(), "BPCC", 4) == 0);
  CHECK(bytes[4] == kContainerVersion);
  CHECK(parse_container(bytes) == c);
}

TEST_CASE("header fields sit at fixed little-endian offsets") {
  Container c;
  c.header = sample_header(0);
  const auto b = serialize_container(c);
  CHECK((b[5] | b[6] << 8) == 64);
  CHECK((b[7] | b[8] << 8) == 256);
  float fov_up;
  std::memcpy(&fov_up, &b[9], 4);
  CHECK(fov_up == 2.0f);
  CHECK(b[21] == 2);  // k
  CHECK(b[29] == std::uint8_t(PredictorId::unet));
  CHECK((std::uint32_t(b[30]) | std::uint32_t(b[31]) << 8 | std::uint32_t(b[32]) << 16 | std::uint32_t(b[33]) << 24) ==
        0xDEADBEEFu);
}

TEST_CASE("read after write is the identity") {
  Rng rng(1);
  for (std::uint32_t frames : {1u, 2u, 5u, 17u}) {
    const Container c = random_container(rng, frames);
    const auto bytes = serialize_container(c);
    CHECK(parse_container(bytes) == c);
    CHECK(serialize_container(parse_container(bytes)) == bytes);
  }
  const Container c = random_container(rng, 4);
  const auto path = std::filesystem::temp_directory_path() / "lpcc_test_container.bpcc";
  const std::size_t written = write_container(c, path);
  CHECK(written == std::filesystem::file_size(path));
  CHECK(read_container(path) == c);
  std::filesystem::remove(path);
}

TEST_CASE("byte accounting adds up to the serialized size") {
  Rng rng(2);
  const Container c = random_container(rng, 9);
  const ByteAccounting acc = account(c);
  CHECK(acc.total() == serialize_container(c).size());
  CHECK(acc.header == kHeaderBytes);
  std::size_t chunks = 0, framing = 0;
  for (const auto& r : c.records) {
    framing += kRecordFramingBytes + kChunkFramingBytes * r.chunks.size();
    for (const auto& ch : r.chunks) chunks += ch.bytes.size();
  }
  CHECK(acc.framing == framing);
  std::size_t sum = 0;
  for (const auto& [id, n] : acc.chunks) sum += n;
  CHECK(sum == chunks);
  const auto per = record_chunk_bytes(c.records[1]);
  CHECK(per.at(std::uint8_t(ChunkId::mask)) == c.records[1].chunks[0].bytes.size());
}

TEST_CASE("find returns the first chunk with an id") {
  FrameRecord r;
  r.chunks.push_back({2, {1}});
  r.chunks.push_back({3, {2}});
  REQUIRE(r.find(ChunkId::residual_handcrafted) != nullptr);
  CHECK(r.find(ChunkId::residual_handcrafted)->bytes[0] == 2);
  CHECK(r.find(ChunkId::intra) == nullptr);
}

TEST_CASE("bad magic and versions are unsupported formats") {
  Rng rng(3);
  const auto good = serialize_container(random_container(rng, 2));
  auto magic = good;
  magic[1] = 'X';
  CHECK_THROWS_AS(parse_container(magic), UnsupportedFormat);
  auto version = good;
  version[4] = 2;
  CHECK_THROWS_AS(parse_container(version), UnsupportedFormat);
  CHECK_THROWS_AS(parse_container(std::span<const std::uint8_t>(good.data(), 3)), Error);
}

TEST_CASE("truncation names the broken record") {
  Rng rng(4);
  const Container c = random_container(rng, 3);
  const auto good = serialize_container(c);
  const std::size_t first = kHeaderBytes + kRecordFramingBytes + kChunkFramingBytes + c.records[0].chunks[0].bytes.size();
  const std::vector<std::uint8_t> cut(good.begin(), good.begin() + std::ptrdiff_t(first + 4));
  try {
    parse_container(cut);
    FAIL("expected a decode error");
  } catch (const DecodeError& e) {
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }
  const std::vector<std::uint8_t> short_header(good.begin(), good.begin() + 20);
  CHECK_THROWS_AS(parse_container(short_header), DecodeError);
  auto trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(parse_container(trailing), DecodeError);
}

TEST_CASE("intra payloads round-trip") {
  Rng rng(5);
  IntraPayload p;
  p.q = 0.05f;
  for (int s = 0; s < 10; ++s) {
    p.seeds.push_back({int(rng.below(64)), int(rng.below(2048))});
    p.region_means.push_back(float(rng.uniform(1, 80)));
  }
  p.mask_chunk = random_bytes(rng, 77);
  p.residual_stream = random_bytes(rng, 301);
  const auto bytes = serialize_intra(p);
  CHECK(bytes.size() == 4 + 2 + 10 * 8 + 4 + 77 + 4 + 301);
  const IntraPayload back = parse_intra(bytes);
  CHECK(back.q == p.q);
  REQUIRE(back.seeds.size() == 10);
  for (int s = 0; s < 10; ++s) {
    CHECK(back.seeds[s].row == p.seeds[s].row);
    CHECK(back.seeds[s].col == p.seeds[s].col);
  }
  CHECK(back.region_means == p.region_means);
  CHECK(back.mask_chunk == p.mask_chunk);
  CHECK(back.residual_stream == p.residual_stream);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 1);
  CHECK_THROWS_AS(parse_intra(cut), DecodeError);
}
