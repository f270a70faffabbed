#pragma once

// Fixed 40-byte wearable frame and the KSLOG dataset container.
//
// Frame layout (little-endian):
//   0  u16  magic 0x4B53 ("KS": bytes 0x4B 0x53)
//   2  u8   version (1)
//   3  u8   athlete_id
//   4  u8   channel
//   5  u8   reserved (0)
//   6  u64  timestamp_us
//   14 24B  payload
//            IMU:     6 x f32 (ax, ay, az, gx, gy, gz)
//            impact:  f32 force, 20 zero bytes
//            contact: u8 zone_mask, u8 foot_part_mask, 22 zero bytes
//   38 u16  CRC-16/CCITT-FALSE over bytes [0, 38)
//
// Header (14) + payload (24) + CRC (2) fill the 40 bytes exactly; no padding.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kickscore/error.hpp"
#include "kickscore/sensor.hpp"

namespace kickscore::wire {

inline constexpr std::size_t kFrameSize = 40;
inline constexpr std::size_t kCrcCoverage = 38;
inline constexpr std::size_t kPayloadOffset = 14;
inline constexpr std::size_t kPayloadSize = 24;
inline constexpr std::uint8_t kMagic0 = 0x4B;
inline constexpr std::uint8_t kMagic1 = 0x53;
inline constexpr std::uint8_t kFrameVersion = 1;

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

namespace detail {

constexpr std::array<std::uint16_t, 256> make_crc_table() {
  std::array<std::uint16_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
    for (int bit = 0; bit < 8; ++bit)
      crc = (crc & 0x8000U) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021U)
                            : static_cast<std::uint16_t>(crc << 1);
    table[i] = crc;
  }
  return table;
}

inline constexpr auto kCrcTable = make_crc_table();

inline void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v & 0xFFU);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}
inline void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
inline void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
inline void put_f32(std::uint8_t* p, float f) { put_u32(p, std::bit_cast<std::uint32_t>(f)); }

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
inline std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}
inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace detail

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
inline std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data) noexcept {
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t b : data)
    crc = static_cast<std::uint16_t>((crc << 8) ^ detail::kCrcTable[((crc >> 8) ^ b) & 0xFFU]);
  return crc;
}

inline FrameBytes encode_frame(const SensorFrame& frame) {
  FrameBytes out{};
  out[0] = kMagic0;
  out[1] = kMagic1;
  out[2] = kFrameVersion;
  out[3] = frame.athlete_id;
  out[4] = static_cast<std::uint8_t>(frame.channel);
  out[5] = 0;
  detail::put_u64(&out[6], frame.timestamp_us);
  std::uint8_t* payload = &out[kPayloadOffset];
  if (const auto* imu = std::get_if<ImuSample>(&frame.payload)) {
    for (int i = 0; i < 3; ++i) detail::put_f32(payload + 4 * i, imu->accel[i]);
    for (int i = 0; i < 3; ++i) detail::put_f32(payload + 12 + 4 * i, imu->gyro[i]);
  } else if (const auto* imp = std::get_if<ImpactSample>(&frame.payload)) {
    detail::put_f32(payload, imp->force);
  } else if (const auto* c = std::get_if<ContactSample>(&frame.payload)) {
    payload[0] = c->zone_mask;
    payload[1] = c->foot_part_mask;
  }
  const std::uint16_t crc = crc16_ccitt_false(std::span(out.data(), kCrcCoverage));
  detail::put_u16(&out[kCrcCoverage], crc);
  return out;
}

/// Inverse of encode_frame. Throws Error with the offending byte offset.
inline SensorFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kFrameSize)
    throw Error(ErrorCode::BadLength, "expected 40 bytes, got " + std::to_string(bytes.size()),
                bytes.size());
  if (bytes[0] != kMagic0 || bytes[1] != kMagic1)
    throw Error(ErrorCode::BadMagic, "", bytes[0] != kMagic0 ? 0 : 1);
  if (bytes[2] != kFrameVersion)
    throw Error(ErrorCode::BadVersion, "version " + std::to_string(bytes[2]), 2);
  const std::uint16_t stored = detail::get_u16(&bytes[kCrcCoverage]);
  if (stored != crc16_ccitt_false(bytes.first(kCrcCoverage)))
    throw Error(ErrorCode::BadCrc, "", kCrcCoverage);
  const auto channel = channel_from_byte(bytes[4]);
  if (!channel) throw Error(ErrorCode::BadChannel, "channel " + std::to_string(bytes[4]), 4);

  SensorFrame f;
  f.athlete_id = bytes[3];
  f.channel = *channel;
  f.timestamp_us = detail::get_u64(&bytes[6]);
  const std::uint8_t* payload = &bytes[kPayloadOffset];
  if (is_imu(*channel)) {
    ImuSample s;
    for (int i = 0; i < 3; ++i) s.accel[i] = detail::get_f32(payload + 4 * i);
    for (int i = 0; i < 3; ++i) s.gyro[i] = detail::get_f32(payload + 12 + 4 * i);
    for (int i = 0; i < 6; ++i) {
      const float v = i < 3 ? s.accel[i] : s.gyro[i - 3];
      if (!std::isfinite(v))
        throw Error(ErrorCode::NonFinitePayload, "", kPayloadOffset + 4 * static_cast<std::size_t>(i));
    }
    f.payload = s;
  } else if (is_impact(*channel)) {
    ImpactSample s{detail::get_f32(payload)};
    if (!std::isfinite(s.force)) throw Error(ErrorCode::NonFinitePayload, "", kPayloadOffset);
    f.payload = s;
  } else {
    f.payload = ContactSample{payload[0], payload[1]};
  }
  try {
    validate_frame(f);
  } catch (const Error& e) {
    throw Error(e.code(), e.detail(), kPayloadOffset);
  }
  return f;
}

// ---------------------------------------------------------------------------
// KSLOG dataset container: 16-byte header followed by 40-byte frames.
//   0  6B  "KSLOG\0"
//   6  u16 version (1)
//   8  u32 rate_hz
//   12 u32 reserved (0)

inline constexpr std::size_t kLogHeaderSize = 16;
inline constexpr std::uint16_t kLogVersion = 1;
inline constexpr std::array<std::uint8_t, 6> kLogMagic{'K', 'S', 'L', 'O', 'G', '\0'};

struct LogHeader {
  std::uint16_t version = kLogVersion;
  std::uint32_t rate_hz = 200;
};

inline std::array<std::uint8_t, kLogHeaderSize> encode_log_header(const LogHeader& h) {
  std::array<std::uint8_t, kLogHeaderSize> out{};
  std::memcpy(out.data(), kLogMagic.data(), kLogMagic.size());
  detail::put_u16(&out[6], h.version);
  detail::put_u32(&out[8], h.rate_hz);
  detail::put_u32(&out[12], 0);
  return out;
}

inline LogHeader decode_log_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kLogHeaderSize)
    throw Error(ErrorCode::BadLength, "log header truncated", bytes.size());
  if (!std::equal(kLogMagic.begin(), kLogMagic.end(), bytes.begin()))
    throw Error(ErrorCode::BadMagic, "not a KSLOG file", 0);
  LogHeader h;
  h.version = detail::get_u16(&bytes[6]);
  if (h.version != kLogVersion)
    throw Error(ErrorCode::BadVersion, "log version " + std::to_string(h.version), 6);
  h.rate_hz = detail::get_u32(&bytes[8]);
  return h;
}

inline std::vector<std::uint8_t> encode_log(const LogHeader& header,
                                            std::span<const SensorFrame> frames) {
  std::vector<std::uint8_t> out;
  out.reserve(kLogHeaderSize + frames.size() * kFrameSize);
  const auto h = encode_log_header(header);
  out.insert(out.end(), h.begin(), h.end());
  for (const auto& f : frames) {
    const auto b = encode_frame(f);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

struct DecodedLog {
  LogHeader header;
  std::vector<SensorFrame> frames;
  std::size_t dropped_frames = 0;
};

/// Decodes a KSLOG image. Corrupt frames are skipped and counted unless strict.
inline DecodedLog decode_log(std::span<const std::uint8_t> bytes, bool strict = false) {
  DecodedLog log;
  log.header = decode_log_header(bytes);
  const std::size_t body = bytes.size() - kLogHeaderSize;
  if (body % kFrameSize != 0) {
    if (strict) throw Error(ErrorCode::BadLength, "trailing partial frame", bytes.size());
    ++log.dropped_frames;
  }
  log.frames.reserve(body / kFrameSize);
  for (std::size_t off = kLogHeaderSize; off + kFrameSize <= bytes.size(); off += kFrameSize) {
    try {
      log.frames.push_back(decode_frame(bytes.subspan(off, kFrameSize)));
    } catch (const Error& e) {
      if (strict) throw Error(e.code(), e.detail(), off + e.offset().value_or(0));
      ++log.dropped_frames;
    }
  }
  return log;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace kickscore::wire
