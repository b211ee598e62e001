#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace engrave {

// Error categories surfaced to callers and, one per line, by the CLI.
enum class ErrorCode {
  kMalformedXml,
  kUnsupportedElement,
  kInconsistentTiming,
  kUnrepresentableDuration,
  kEmptyScore,
  kShapeMismatch,
  kRelationMismatch,
  kNonFiniteLoss,
  kLabelOutOfRange,
  kLengthMismatch,
  kUnfillableGap,
  kEmptyCorpus,
  kDivergedLoss,
  kBadConfig,
  kMissingInput,
  kChecksumMismatch,
  kBadCheckpoint,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace engrave
