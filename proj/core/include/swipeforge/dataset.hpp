#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "swipeforge/synth.hpp"

namespace swipeforge {

/// One line of a trace dataset. `target` is the word the pipeline should
/// finally produce; it equals `trace.word` unless the task transliterates.
struct TraceRecord {
  Trace trace;
  std::u32string target;
};

/// Single-line JSON: {"word", "layout_name", "points": [[x, y], ...]} plus
/// "target" when it differs from the word.
std::string trace_record_to_json(const TraceRecord& record);
TraceRecord trace_record_from_json(const std::string& line);

void write_trace_records(std::ostream& out, const std::vector<TraceRecord>& records);
void write_trace_records(const std::filesystem::path& path, const std::vector<TraceRecord>& records);
/// Blank lines are skipped. Errors name the offending line.
std::vector<TraceRecord> read_trace_records(std::istream& in);
std::vector<TraceRecord> read_trace_records(const std::filesystem::path& path);

struct LexiconEntry {
  std::u32string source;  // the word that is traced
  std::u32string target;  // the word to output
};

/// Lines of `source<TAB>target`, or a single word (target = source). Blank
/// lines and lines starting with '#' are ignored.
std::vector<LexiconEntry> read_lexicon(const std::filesystem::path& path);
std::vector<LexiconEntry> parse_lexicon(const std::string& text);

/// One word per line, duplicates removed keeping the first occurrence.
std::vector<std::u32string> read_vocabulary(const std::filesystem::path& path);
std::vector<std::u32string> parse_vocabulary(const std::string& text);

/// `traces_per_word` traces for every entry. Entry i draws from its own
/// generator seeded with derive_seed(master_seed, i), so the output does not
/// depend on how the entries are scheduled.
std::vector<TraceRecord> generate_dataset(const KeyboardLayout& layout, const std::vector<LexiconEntry>& entries,
                                          int traces_per_word, const SynthConfig& config, std::uint64_t master_seed);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace swipeforge
