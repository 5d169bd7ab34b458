#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace swipeforge {

enum class ErrorCode {
  kInvalidArgument,
  kSchema,
  kDuplicateChar,
  kOutOfBounds,
  kUnknownChar,
  kShapeMismatch,
  kNonFinite,
  kImpossibleTarget,
  kEmptyInput,
  kIo,
  kConfigConflict,
  kLayoutMismatch,
  kMissingCheckpoint,
};

/// Stable, machine-readable name for an error code (used in CLI error lines
/// and HTTP error bodies).
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace swipeforge
