// SPDX-License-Identifier: Apache-2.0
//
// Container format (all integers little-endian, floats IEEE-754 binary32):
//
//   header (38 bytes)
//     "BPCC"  u8 version  u16 H  u16 W  f32 fov_up  f32 fov_down
//     u32 frame_count  u8 k  u8 intra_codec  u8 residual_codec  u8 mask_codec
//     f32 quality  u8 predictor  u32 predictor_fingerprint  u32 residual_fingerprint
//   frame_count records, in coding order
//     u32 frame_index  u8 frame_type (0 intra, 1 inter)  u16 chunk_count
//     chunk_count x { u8 chunk_id  u32 length  length bytes }
//
// Intra chunk payload:
//   f32 q  u16 seed_count  seed_count x { u16 row  u16 col  f32 mean }
//   u32 mask_length  mask bytes  u32 residual_length  residual bytes

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "lpcc/intra_codec.hpp"
#include "lpcc/scheduler.hpp"
#include "lpcc/types.hpp"

namespace lpcc {

inline constexpr std::array<char, 4> kContainerMagic{'B', 'P', 'C', 'C'};
inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::size_t kHeaderBytes = 38;
inline constexpr std::size_t kRecordFramingBytes = 7;
inline constexpr std::size_t kChunkFramingBytes = 5;

enum class ChunkId : std::uint8_t { intra = 1, mask = 2, residual_handcrafted = 3, residual_learned = 4 };

enum class PredictorId : std::uint8_t { average = 0, unet = 1 };

struct ContainerHeader {
  std::uint8_t version = kContainerVersion;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  float fov_up = 0.0f;
  float fov_down = 0.0f;
  std::uint32_t frame_count = 0;
  std::uint8_t k = 1;
  std::uint8_t intra_codec = 0;
  std::uint8_t residual_codec = 0;
  std::uint8_t mask_codec = 0;
  /// Handcrafted step q in meters, or the learned model's lambda.
  float quality = 0.0f;
  std::uint8_t predictor = 0;
  std::uint32_t predictor_fingerprint = 0;
  std::uint32_t residual_fingerprint = 0;

  SensorConfig sensor() const;
  friend bool operator==(const ContainerHeader&, const ContainerHeader&) = default;
};

struct Chunk {
  std::uint8_t id = 0;
  std::vector<std::uint8_t> bytes;
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct FrameRecord {
  std::uint32_t frame_index = 0;
  FrameType type = FrameType::intra;
  std::vector<Chunk> chunks;

  /// First chunk with `id`, or null.
  const Chunk* find(ChunkId id) const;
  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct Container {
  ContainerHeader header;
  std::vector<FrameRecord> records;
  friend bool operator==(const Container&, const Container&) = default;
};

std::vector<std::uint8_t> serialize_container(const Container& c);
/// Throws UnsupportedFormat for a bad magic or version and DecodeError naming
/// the record index on truncation.
Container parse_container(std::span<const std::uint8_t> bytes);

/// Returns the number of bytes written.
std::size_t write_container(const Container& c, const std::filesystem::path& path);
Container read_container(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_intra(const IntraPayload& p);
IntraPayload parse_intra(std::span<const std::uint8_t> bytes);

/// Byte totals by chunk id plus framing; `total()` equals the serialized size.
struct ByteAccounting {
  std::size_t header = 0;
  std::size_t framing = 0;
  std::map<std::uint8_t, std::size_t> chunks;
  std::size_t total() const;
};

ByteAccounting account(const Container& c);
/// Chunk payload bytes of one record, by chunk id.
std::map<std::uint8_t, std::size_t> record_chunk_bytes(const FrameRecord& r);

}  // namespace lpcc
