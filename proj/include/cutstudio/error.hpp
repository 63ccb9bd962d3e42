#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cutstudio {

enum class ErrorCode {
  // knowledge base
  SchemaError,
  UnknownType,
  DuplicateId,
  EmptyCorpus,
  UnknownPattern,
  // ideation
  EmptyTemplateCorpus,
  EmptyIdea,
  ParseError,
  // retrieval
  ZeroVector,
  DimensionMismatch,
  EmbedderFault,
  UnknownGroundTruth,
  EmptyEvaluation,
  // pattern engine
  EmptyImage,
  EmptyMask,
  DisconnectedMask,
  TooFewExemplars,
  PointOnOppositeClass,
  EmptyResult,
  // gateway
  Timeout,
  ProviderError,
  OfflineMiss,
  SegmentationFailed,
  // mood board
  UnknownId,
  SingularTransform,
  CrossParentGroup,
  NotAGroup,
  NoOverlap,
  NotACutout,
  UnsupportedFeature,
  CorruptSession,
  // service
  StaleState,
  Conflict,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<ErrorCode> cause = std::nullopt)
      : std::runtime_error(message), code_(code), cause_(cause) {}

  ErrorCode code() const noexcept { return code_; }
  /// The underlying failure when this error wraps another one.
  std::optional<ErrorCode> cause() const noexcept { return cause_; }

 private:
  ErrorCode code_;
  std::optional<ErrorCode> cause_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace cutstudio
