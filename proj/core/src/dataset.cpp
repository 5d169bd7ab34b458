#include "swipeforge/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "swipeforge/error.hpp"

namespace swipeforge {

std::string trace_record_to_json(const TraceRecord& record) {
  nlohmann::ordered_json doc;
  doc["word"] = u32_to_utf8(record.trace.word);
  doc["layout_name"] = record.trace.layout_name;
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (const Point& p : record.trace.points) points.push_back({p.x, p.y});
  doc["points"] = std::move(points);
  if (record.target != record.trace.word) doc["target"] = u32_to_utf8(record.target);
  return doc.dump();
}

TraceRecord trace_record_from_json(const std::string& line) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kSchema, std::string("trace record is not valid JSON: ") + e.what());
  }
  TraceRecord record;
  try {
    record.trace.word = utf8_to_u32(doc.at("word").get<std::string>());
    record.trace.layout_name = doc.at("layout_name").get<std::string>();
    for (const auto& p : doc.at("points")) {
      if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::kSchema, "each point must be [x, y]");
      const Point pt{p[0].get<double>(), p[1].get<double>()};
      if (!std::isfinite(pt.x) || !std::isfinite(pt.y)) throw Error(ErrorCode::kNonFinite, "non-finite point");
      record.trace.points.push_back(pt);
    }
    record.target = doc.contains("target") ? utf8_to_u32(doc["target"].get<std::string>()) : record.trace.word;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("invalid trace record: ") + e.what());
  }
  return record;
}

void write_trace_records(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) out << trace_record_to_json(r) << '\n';
}

void write_trace_records(const std::filesystem::path& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_trace_records(out, records);
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

std::vector<TraceRecord> read_trace_records(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(trace_record_from_json(line));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TraceRecord> read_trace_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_trace_records(in);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<LexiconEntry> parse_lexicon(const std::string& text) {
  std::vector<LexiconEntry> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto tab = t.find('\t');
    LexiconEntry entry;
    try {
      if (tab == std::string::npos) {
        entry.source = utf8_to_u32(t);
        entry.target = entry.source;
      } else {
        entry.source = utf8_to_u32(trim(t.substr(0, tab)));
        entry.target = utf8_to_u32(trim(t.substr(tab + 1)));
      }
    } catch (const Error& e) {
      throw Error(e.code(), "lexicon line " + std::to_string(number) + ": " + e.what());
    }
    if (entry.source.empty() || entry.target.empty()) {
      throw Error(ErrorCode::kSchema, "lexicon line " + std::to_string(number) + " has an empty field");
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<LexiconEntry> read_lexicon(const std::filesystem::path& path) { return parse_lexicon(read_text_file(path)); }

std::vector<std::u32string> parse_vocabulary(const std::string& text) {
  std::vector<std::u32string> out;
  std::unordered_set<std::u32string> seen;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::u32string w = utf8_to_u32(t);
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::vector<std::u32string> read_vocabulary(const std::filesystem::path& path) {
  return parse_vocabulary(read_text_file(path));
}

std::vector<TraceRecord> generate_dataset(const KeyboardLayout& layout, const std::vector<LexiconEntry>& entries,
                                          int traces_per_word, const SynthConfig& config, std::uint64_t master_seed) {
  if (traces_per_word < 1) throw Error(ErrorCode::kInvalidArgument, "traces_per_word must be at least 1");
  std::vector<TraceRecord> out;
  out.reserve(entries.size() * static_cast<std::size_t>(traces_per_word));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Rng rng(derive_seed(master_seed, i));
    for (int r = 0; r < traces_per_word; ++r) {
      out.push_back({synthesize_trace(layout, entries[i].source, config, rng), entries[i].target});
    }
  }
  return out;
}

}  // namespace swipeforge
