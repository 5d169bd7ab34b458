#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "swipeforge/dataset.hpp"
#include "swipeforge/error.hpp"

using namespace swipeforge;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("swipeforge_dataset_" + name);
}

}  // namespace

TEST_CASE("trace record JSON round-trip") {
  TraceRecord r{Trace{{{0.1, 0.2}, {0.30000000000000004, 1.0 / 3.0}}, U"ab", "qwerty_en"}, U"ab"};
  const std::string line = trace_record_to_json(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.find("\"target\"") == std::string::npos);
  const TraceRecord back = trace_record_from_json(line);
  CHECK(back.trace.points == r.trace.points);
  CHECK(back.trace.word == U"ab");
  CHECK(back.target == U"ab");
  CHECK(back.trace.layout_name == "qwerty_en");

  r.target = U"अब";
  const TraceRecord back2 = trace_record_from_json(trace_record_to_json(r));
  CHECK(back2.target == U"अब");

  CHECK_THROWS_AS(trace_record_from_json("{"), Error);
  CHECK_THROWS_AS(trace_record_from_json(R"({"word": "a", "layout_name": "x", "points": [[1]]})"), Error);
  CHECK_THROWS_AS(trace_record_from_json(R"({"word": "a", "points": [[1, 2]]})"), Error);
}

TEST_CASE("trace files") {
  const KeyboardLayout layout = bundled_layout("qwerty_en");
  const auto records = generate_dataset(layout, {{U"hello", U"hello"}, {U"world", U"world"}}, 3, SynthConfig{}, 5);
  CHECK(records.size() == 6);
  const auto path = temp_path("traces.jsonl");
  write_trace_records(path, records);
  const auto back = read_trace_records(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].trace.points == records[i].trace.points);
    CHECK(back[i].trace.word == records[i].trace.word);
  }
  std::istringstream in(trace_record_to_json(records[0]) + "\n\n" + trace_record_to_json(records[1]) + "\n");
  CHECK(read_trace_records(in).size() == 2);
  std::istringstream bad(trace_record_to_json(records[0]) + "\nnot json\n");
  try {
    read_trace_records(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(read_trace_records(temp_path("missing.jsonl")), Error);
  std::filesystem::remove(path);
}

TEST_CASE("lexicon and vocabulary parsing") {
  const auto entries = parse_lexicon("# comment\nnamaste\tनमस्ते\n\nhello\n");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].source == U"namaste");
  CHECK(entries[0].target == U"नमस्ते");
  CHECK(entries[1].target == U"hello");
  CHECK(parse_lexicon("a\t\n").front().target == U"a");
  CHECK_THROWS_AS(parse_lexicon("ok\n\xff\n"), Error);
  CHECK(parse_vocabulary("b\na\nb\n\nc\n") == std::vector<std::u32string>{U"b", U"a", U"c"});

  const auto tsv = read_lexicon(testing::data_dir() / "lexicons" / "hi_translit.tsv");
  CHECK(tsv.size() == 400);
  CHECK(tsv[0].source == U"ke");
  CHECK(read_vocabulary(testing::data_dir() / "lexicons" / "hi_vocab.txt").size() == 600);
}

TEST_CASE("dataset generation is deterministic and per-entry") {
  const KeyboardLayout layout = bundled_layout("qwerty_en");
  const std::vector<LexiconEntry> entries{{U"alpha", U"alpha"}, {U"beta", U"beta"}, {U"gamma", U"gamma"}};
  const auto a = generate_dataset(layout, entries, 4, SynthConfig{}, 42);
  const auto b = generate_dataset(layout, entries, 4, SynthConfig{}, 42);
  std::ostringstream sa, sb;
  write_trace_records(sa, a);
  write_trace_records(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(a.size() == 12);

  // Entry i only depends on (master seed, i).
  const auto first = generate_dataset(layout, {entries[0]}, 4, SynthConfig{}, 42);
  for (std::size_t i = 0; i < 4; ++i) CHECK(first[i].trace.points == a[i].trace.points);
  const auto other = generate_dataset(layout, entries, 4, SynthConfig{}, 43);
  CHECK(other[0].trace.points != a[0].trace.points);

  CHECK_THROWS_AS(generate_dataset(layout, entries, 0, SynthConfig{}, 1), Error);
  CHECK_THROWS_AS(generate_dataset(layout, {{U"ünï", U"x"}}, 1, SynthConfig{}, 1), Error);
}
