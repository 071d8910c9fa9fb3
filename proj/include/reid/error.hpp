#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reid {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NonFinite,
  DuplicateName,
  MissingAttribute,
  LabelOutOfRange,
  NoValidTriplet,
  EpochOutOfRange,
  NotEnoughIdentities,
  ZeroVector,
  NameMismatch,
  DimensionError,
  AxisMisalignment,
  UnknownGalleryInTracklet,
  EmptyRelevantSet,
  MissingGroundTruth,
  MissingRanking,
  DegenerateImage,
  CropTooLarge,
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  ParseError,
  DuplicateAcrossTracklets,
  UnknownName,
  IoError,
};

constexpr std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::MissingAttribute: return "MissingAttribute";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::NoValidTriplet: return "NoValidTriplet";
    case ErrorCode::EpochOutOfRange: return "EpochOutOfRange";
    case ErrorCode::NotEnoughIdentities: return "NotEnoughIdentities";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NameMismatch: return "NameMismatch";
    case ErrorCode::DimensionError: return "DimensionError";
    case ErrorCode::AxisMisalignment: return "AxisMisalignment";
    case ErrorCode::UnknownGalleryInTracklet: return "UnknownGalleryInTracklet";
    case ErrorCode::EmptyRelevantSet: return "EmptyRelevantSet";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::MissingRanking: return "MissingRanking";
    case ErrorCode::DegenerateImage: return "DegenerateImage";
    case ErrorCode::CropTooLarge: return "CropTooLarge";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateAcrossTracklets: return "DuplicateAcrossTracklets";
    case ErrorCode::UnknownName: return "UnknownName";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library. `code()` is the stable category; the
/// message carries the location (row, line, byte offset) of the problem.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view category() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace reid
