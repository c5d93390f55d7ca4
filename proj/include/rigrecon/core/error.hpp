#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rigrecon {

// Every failure the library reports carries one of these codes. The CLI maps
// them onto process exit codes, so the numeric values are stable.
enum class ErrorCode : int {
  InvalidArgument = 1,
  PointBehindCamera = 2,
  NoConvergence = 3,
  OutsideInvertibleRegion = 4,
  EmptyImage = 5,
  DegenerateSpectrum = 6,
  TooFewFrames = 7,
  NoOverlap = 8,
  InsufficientFrames = 9,
  UnknownImage = 10,
  IndexOutOfRange = 11,
  DuplicateMatch = 12,
  TooFewMatches = 13,
  DegenerateConfiguration = 14,
  NotConverged = 15,
  RankDeficient = 16,
  NoValidSeedPair = 17,
  RegistrationFailed = 18,
  EmptyModel = 19,
  DivergenceDetected = 20,
  IoFailure = 21,
  ParseError = 22,
  ConfigInvalid = 23,
  MissingInput = 24,
  StageFailed = 25,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PointBehindCamera: return "PointBehindCamera";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::OutsideInvertibleRegion: return "OutsideInvertibleRegion";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::InsufficientFrames: return "InsufficientFrames";
    case ErrorCode::UnknownImage: return "UnknownImage";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DuplicateMatch: return "DuplicateMatch";
    case ErrorCode::TooFewMatches: return "TooFewMatches";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoValidSeedPair: return "NoValidSeedPair";
    case ErrorCode::RegistrationFailed: return "RegistrationFailed";
    case ErrorCode::EmptyModel: return "EmptyModel";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::StageFailed: return "StageFailed";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace rigrecon
