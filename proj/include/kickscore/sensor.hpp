#pragma once

// Sensor data model: one timestamped reading from one wearable channel.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

#include "kickscore/error.hpp"

namespace kickscore {

enum class Channel : std::uint8_t {
  FootImuLeft = 0,
  FootImuRight = 1,
  TrunkImu = 2,
  TrunkImpact = 3,
  HeadImpact = 4,
  ContactMask = 5,
};

inline constexpr std::size_t kChannelCount = 6;

inline constexpr std::array<Channel, kChannelCount> kAllChannels{
    Channel::FootImuLeft, Channel::FootImuRight, Channel::TrunkImu,
    Channel::TrunkImpact, Channel::HeadImpact,   Channel::ContactMask};

constexpr bool is_imu(Channel c) noexcept {
  return c == Channel::FootImuLeft || c == Channel::FootImuRight || c == Channel::TrunkImu;
}
constexpr bool is_impact(Channel c) noexcept {
  return c == Channel::TrunkImpact || c == Channel::HeadImpact;
}
constexpr std::size_t index_of(Channel c) noexcept { return static_cast<std::size_t>(c); }

constexpr std::optional<Channel> channel_from_byte(std::uint8_t b) noexcept {
  if (b < kChannelCount) return static_cast<Channel>(b);
  return std::nullopt;
}

constexpr std::string_view to_string(Channel c) noexcept {
  switch (c) {
    case Channel::FootImuLeft: return "FootImuLeft";
    case Channel::FootImuRight: return "FootImuRight";
    case Channel::TrunkImu: return "TrunkImu";
    case Channel::TrunkImpact: return "TrunkImpact";
    case Channel::HeadImpact: return "HeadImpact";
    case Channel::ContactMask: return "ContactMask";
  }
  return "?";
}

/// Gravity-compensated linear acceleration (m/s^2) and angular rate (rad/s).
/// Components are float because that is what the wire carries.
struct ImuSample {
  std::array<float, 3> accel{};
  std::array<float, 3> gyro{};

  friend bool operator==(const ImuSample&, const ImuSample&) = default;
};

inline constexpr double kMaxAccelMagnitude = 2000.0;

/// Calibrated impact force in newtons.
struct ImpactSample {
  float force = 0.0F;

  friend bool operator==(const ImpactSample&, const ImpactSample&) = default;
};

namespace zone_bits {
inline constexpr std::uint8_t TrunkFront = 1U << 0;
inline constexpr std::uint8_t TrunkLeft = 1U << 1;
inline constexpr std::uint8_t TrunkRight = 1U << 2;
inline constexpr std::uint8_t Head = 1U << 3;
inline constexpr std::uint8_t TrunkAny = TrunkFront | TrunkLeft | TrunkRight;
inline constexpr std::uint8_t All = TrunkAny | Head;
}  // namespace zone_bits

namespace foot_bits {
inline constexpr std::uint8_t Toes = 1U << 0;
inline constexpr std::uint8_t Instep = 1U << 1;
inline constexpr std::uint8_t Heel = 1U << 2;
inline constexpr std::uint8_t All = Toes | Instep | Heel;
}  // namespace foot_bits

struct ContactSample {
  std::uint8_t zone_mask = 0;
  std::uint8_t foot_part_mask = 0;

  friend bool operator==(const ContactSample&, const ContactSample&) = default;
};

using Payload = std::variant<ImuSample, ImpactSample, ContactSample>;

struct SensorFrame {
  std::uint8_t athlete_id = 0;
  Channel channel = Channel::FootImuLeft;
  std::uint64_t timestamp_us = 0;
  Payload payload{ImuSample{}};

  friend bool operator==(const SensorFrame&, const SensorFrame&) = default;
};

inline bool payload_matches_channel(const SensorFrame& f) noexcept {
  if (is_imu(f.channel)) return std::holds_alternative<ImuSample>(f.payload);
  if (is_impact(f.channel)) return std::holds_alternative<ImpactSample>(f.payload);
  return std::holds_alternative<ContactSample>(f.payload);
}

inline double magnitude(const std::array<float, 3>& v) noexcept {
  const double x = v[0], y = v[1], z = v[2];
  return std::sqrt(x * x + y * y + z * z);
}

/// Throws InvalidFrame (or NonFinitePayload) when a frame breaks the data-model invariants.
inline void validate_frame(const SensorFrame& f) {
  if (!payload_matches_channel(f)) {
    throw Error(ErrorCode::InvalidFrame,
                "payload does not match channel " + std::string(to_string(f.channel)));
  }
  if (const auto* imu = std::get_if<ImuSample>(&f.payload)) {
    for (float v : imu->accel)
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinitePayload, "accel component");
    for (float v : imu->gyro)
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinitePayload, "gyro component");
    if (magnitude(imu->accel) > kMaxAccelMagnitude)
      throw Error(ErrorCode::InvalidFrame, "accel magnitude above sanity bound");
  } else if (const auto* imp = std::get_if<ImpactSample>(&f.payload)) {
    if (!std::isfinite(imp->force)) throw Error(ErrorCode::NonFinitePayload, "force");
    if (imp->force < 0.0F) throw Error(ErrorCode::InvalidFrame, "negative force");
  } else if (const auto* c = std::get_if<ContactSample>(&f.payload)) {
    if ((c->zone_mask & ~zone_bits::All) != 0 || (c->foot_part_mask & ~foot_bits::All) != 0)
      throw Error(ErrorCode::InvalidFrame, "unknown contact bits");
    if (c->foot_part_mask != 0 && c->zone_mask == 0)
      throw Error(ErrorCode::InvalidFrame, "foot-part trigger without zone contact");
  }
}

}  // namespace kickscore
