#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kickscore {

enum class ErrorCode {
  // wire format
  BadMagic,
  BadVersion,
  BadLength,
  BadCrc,
  BadChannel,
  NonFinitePayload,
  InvalidFrame,
  // ingestion / alignment
  NonMonotonicTimestamp,
  EmptyChannel,
  InvalidSpan,
  // synthesis
  InvalidTemplate,
  OverlapSameAthlete,
  // features / classifier
  EmptyDataset,
  TooFewClasses,
  TooFewSamples,
  NonFiniteFeature,
  SchemaMismatch,
  VersionMismatch,
  CorruptPayload,
  ModelLoadFailure,
  // scoring
  UnknownEvent,
  AlreadyResolved,
  NotReferred,
  // plumbing
  InvalidConfig,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::BadLength: return "BadLength";
    case ErrorCode::BadCrc: return "BadCrc";
    case ErrorCode::BadChannel: return "BadChannel";
    case ErrorCode::NonFinitePayload: return "NonFinitePayload";
    case ErrorCode::InvalidFrame: return "InvalidFrame";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::EmptyChannel: return "EmptyChannel";
    case ErrorCode::InvalidSpan: return "InvalidSpan";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::OverlapSameAthlete: return "OverlapSameAthlete";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::TooFewClasses: return "TooFewClasses";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptPayload: return "CorruptPayload";
    case ErrorCode::ModelLoadFailure: return "ModelLoadFailure";
    case ErrorCode::UnknownEvent: return "UnknownEvent";
    case ErrorCode::AlreadyResolved: return "AlreadyResolved";
    case ErrorCode::NotReferred: return "NotReferred";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Library-wide exception. Byte offset is set for wire/file decoding errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail,
        std::optional<std::size_t> offset = std::nullopt)
      : std::runtime_error(format(code, detail, offset)),
        code_(code),
        offset_(offset),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  static std::string format(ErrorCode code, const std::string& detail,
                            std::optional<std::size_t> offset) {
    std::string msg{to_string(code)};
    if (offset) msg += " at byte " + std::to_string(*offset);
    if (!detail.empty()) msg += ": " + detail;
    return msg;
  }

  ErrorCode code_;
  std::optional<std::size_t> offset_;
  std::string detail_;
};

}  // namespace kickscore
