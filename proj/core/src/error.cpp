#include "swipeforge/error.hpp"

namespace swipeforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kDuplicateChar: return "duplicate_char";
    case ErrorCode::kOutOfBounds: return "out_of_bounds";
    case ErrorCode::kUnknownChar: return "unknown_char";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kImpossibleTarget: return "impossible_target";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfigConflict: return "config_conflict";
    case ErrorCode::kLayoutMismatch: return "layout_mismatch";
    case ErrorCode::kMissingCheckpoint: return "missing_checkpoint";
  }
  return "unknown";
}

}  // namespace swipeforge
