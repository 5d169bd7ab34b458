#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "swipeforge/pipeline.hpp"

namespace swipeforge::cli {

/// Exit status for a bad command line (unknown flag, missing path).
inline constexpr int kUsageExit = 2;
/// Exit status for a failure while running a valid command.
inline constexpr int kFailureExit = 1;

/// Runs one command line; `args` excludes the program name. Results go to
/// `out`; on failure a single JSON error line goes to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// {"error": {"code": ..., "message": ...}} on one line.
std::string error_line(std::string_view code, std::string_view message);

/// The body shared by `decode` and POST /decode:
/// {"suggestions": [{word, score, score_kind, stage_provenance}], ...}.
/// `timing_ms` is omitted when negative.
std::string decode_response_json(const DecodeResult& result, double timing_ms = -1.0);

}  // namespace swipeforge::cli
