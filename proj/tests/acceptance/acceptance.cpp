// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any
// failure. Heavy fixtures are trained once and shared between criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "grad_suite.hpp"
#include "oracles.hpp"
#include "swipeforge/correct.hpp"
#include "swipeforge/ctc.hpp"
#include "swipeforge/dataset.hpp"
#include "swipeforge/error.hpp"
#include "swipeforge/pipeline.hpp"
#include "swipeforge/synth.hpp"
#include "swipeforge/translit.hpp"

using namespace swipeforge;
namespace t = swipeforge::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

std::string pct(double value) { return fmt("%.2f%%", value); }

bool monotone(const std::array<double, 3>& acc) { return acc[0] <= acc[1] && acc[1] <= acc[2]; }

// ---------------------------------------------------------------------------
// Shared fixtures

struct DeskFixture {
  std::shared_ptr<const KeyboardLayout> layout;
  std::vector<TraceRecord> records;
  DatasetSplit<TraceRecord> split;
  std::vector<std::u32string> vocabulary;
  PipelineTrainConfig config;
  TrainedPipeline trained;
  Evaluation full;
  double train_seconds = 0.0;
};

std::vector<TraceRecord> desk_records(const KeyboardLayout& layout) {
  auto entries = read_lexicon(t::data_dir() / "lexicons" / "en_words.txt");
  entries.resize(50);
  return generate_dataset(layout, entries, 30, SynthConfig{}, 42);
}

DeskFixture& desk() {
  static DeskFixture fx = [] {
    DeskFixture d;
    d.layout = std::make_shared<const KeyboardLayout>(bundled_layout("qwerty_en"));
    d.records = desk_records(*d.layout);
    d.config = default_train_config(TaskKind::kIndicToIndic);
    d.config.path = PathDecoderConfig{};
    d.config.seed = 1;
    d.split = split_dataset(d.records, d.config.seed);
    std::set<std::u32string> words;
    for (const auto& r : d.records) words.insert(r.target);
    d.vocabulary.assign(words.begin(), words.end());
    const auto start = Clock::now();
    d.trained = train_pipeline(TaskKind::kIndicToIndic, d.layout, d.split.train, d.split.validation, d.vocabulary,
                               d.config);
    d.train_seconds = seconds_since(start);
    d.full = evaluate(d.trained.pipeline, d.split.test, 3);
    return d;
  }();
  return fx;
}

struct CorrectionFixture {
  std::vector<std::u32string> words;
  std::vector<CorrectionPair> held_out;
  double dense_accuracy = 0.0;
  double euclidean_accuracy = 0.0;
  double oracle_ceiling = 0.0;
  double dense_seconds = 0.0;
  double euclidean_seconds = 0.0;
};

double correction_accuracy(const CorrectionModel& model, const std::vector<std::u32string>& words,
                           const std::vector<CorrectionPair>& pairs) {
  const Vocabulary vocab(model, words);
  std::size_t hit = 0;
  for (const auto& p : pairs) {
    if (correct(model, vocab, p.corrupted).word == p.truth) ++hit;
  }
  return 100.0 * static_cast<double>(hit) / static_cast<double>(pairs.size());
}

// Share of held-out inputs whose truth is the unique nearest vocabulary
// word under Damerau distance.
double edit_distance_ceiling(const std::vector<std::u32string>& words, const std::vector<CorrectionPair>& pairs) {
  std::size_t hit = 0;
  for (const auto& p : pairs) {
    int best = std::numeric_limits<int>::max();
    std::size_t at_best = 0;
    bool truth_at_best = false;
    for (const auto& w : words) {
      const int d = t::damerau_distance(p.corrupted, w);
      if (d < best) {
        best = d;
        at_best = 0;
        truth_at_best = false;
      }
      if (d == best) {
        ++at_best;
        truth_at_best = truth_at_best || w == p.truth;
      }
    }
    if (truth_at_best && at_best == 1) ++hit;
  }
  return 100.0 * static_cast<double>(hit) / static_cast<double>(pairs.size());
}

CorrectionFixture& correction() {
  static CorrectionFixture fx = [] {
    CorrectionFixture c;
    c.words = read_vocabulary(t::data_dir() / "lexicons" / "hi_vocab.txt");
    c.words.resize(500);
    const Alphabet alphabet = Alphabet::from_words(c.words);
    CorruptionConfig corruption;
    Rng train_rng(3);
    const auto train = generate_corruptions(c.words, alphabet, corruption, train_rng);
    corruption.variants_per_word = 1;
    Rng test_rng(99);
    std::set<std::u32string> seen;
    for (const auto& p : train) seen.insert(p.corrupted);
    for (auto& p : generate_corruptions(c.words, alphabet, corruption, test_rng)) {
      if (seen.count(p.corrupted) == 0) c.held_out.push_back(std::move(p));
    }
    CorrectConfig dense;
    auto start = Clock::now();
    const CorrectionModel dense_model = train_correct(CorrectionModel(alphabet, dense), c.words, train);
    c.dense_accuracy = correction_accuracy(dense_model, c.words, c.held_out);
    c.dense_seconds = seconds_since(start);
    CorrectConfig euclidean;
    euclidean.dense_scorer = false;
    start = Clock::now();
    const CorrectionModel euclidean_model = train_correct(CorrectionModel(alphabet, euclidean), c.words, train);
    c.euclidean_accuracy = correction_accuracy(euclidean_model, c.words, c.held_out);
    c.euclidean_seconds = seconds_since(start);
    c.oracle_ceiling = edit_distance_ceiling(c.words, c.held_out);
    return c;
  }();
  return fx;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome ctc_oracle() {
  const auto start = Clock::now();
  const t::CtcOracleStats s = t::ctc_oracle_sweep(3, 6, 2024);
  const double secs = seconds_since(start);
  const bool ok = s.max_abs_error < 1e-10 && s.all_rejections_correct && secs < 30.0;
  return {ok, std::to_string(s.cases) + " targets, " + std::to_string(s.impossible) +
                  " impossible rejected, max |diff| " + fmt("%.2e", s.max_abs_error) + ", " + fmt("%.1f s", secs)};
}

Outcome ctc_normalization() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const t::CtcOracleStats s = t::ctc_oracle_sweep(2, 5, seed);
    worst = std::max(worst, s.max_normalization_error);
    cases += s.cases;
  }
  const double secs = seconds_since(start);
  return {worst < 1e-9 && secs < 10.0,
          "10 seeds, " + std::to_string(cases) + " targets, max |sum - 1| " + fmt("%.2e", worst) + ", " +
              fmt("%.1f s", secs)};
}

Outcome gradient_suite() {
  const auto start = Clock::now();
  const auto results = t::gradient_suite();
  const double secs = seconds_since(start);
  double worst = 0.0;
  std::string worst_name;
  bool finite = true;
  for (const auto& r : results) {
    if (!std::isfinite(r.max_relative_error)) finite = false;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = r.name;
    }
  }
  return {finite && worst < 1e-4 && secs < 120.0,
          std::to_string(results.size()) + " checks, worst " + worst_name + " " + fmt("%.2e", worst) + ", " +
              fmt("%.1f s", secs)};
}

Outcome minimum_jerk() {
  const auto start = Clock::now();
  std::vector<std::string> failures;
  const auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const Point p0{rng.uniform(), rng.uniform()}, p1{rng.uniform(), rng.uniform()};
    const auto pts = min_jerk_segment(p0, p1, 21);
    expect(pts.front() == p0 && pts.back() == p1, "endpoints");
    const Point mid = p0 + 0.5 * (p1 - p0);
    expect(distance(pts[10], mid) < 1e-15, "midpoint");
  }
  for (double tau : {0.0, 1.0}) {
    expect(std::abs(min_jerk_profile(tau, 1)) < 1e-9 && std::abs(min_jerk_profile(tau, 2)) < 1e-9, "rest");
  }
  double peak = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double tau = i / 200000.0;
    // Independent velocity polynomial of 10t^3 - 15t^4 + 6t^5.
    peak = std::max(peak, 30 * tau * tau - 60 * tau * tau * tau + 30 * tau * tau * tau * tau);
  }
  expect(std::abs(peak - 1.875) < 1e-6, "peak speed polynomial");
  expect(std::abs(min_jerk_profile(0.5, 1) - 1.875) < 1e-6, "peak speed");

  double worst_via = 0.0, worst_junction = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Point p0{rng.uniform(), rng.uniform()}, p1{rng.uniform(), rng.uniform()};
    const Point pv = sample_via(p0, p1, rng);
    const int n = 3 + static_cast<int>(rng.index(40));
    double nearest = 1e9;
    for (const auto& p : via_point_segment(p0, pv, p1, n)) nearest = std::min(nearest, distance(p, pv));
    worst_via = std::max(worst_via, nearest);
    const double tv = rng.uniform(0.2, 0.8);
    const ViaPointTrajectory traj(p0, pv, p1, tv);
    for (int order = 0; order <= 2; ++order) {
      const Point l = traj.derivative(tv, order, ViaPointTrajectory::Side::kLeft);
      const Point r = traj.derivative(tv, order, ViaPointTrajectory::Side::kRight);
      worst_junction = std::max(worst_junction, distance(l, r) / std::max(1.0, norm(l)));
    }
  }
  expect(worst_via < 1e-9, "via interpolation");
  expect(worst_junction < 1e-9, "junction continuity");

  // Speed profile on zero-noise segments of real words: one rise, one fall.
  const KeyboardLayout layout = bundled_layout("qwerty_en");
  std::size_t segments = 0;
  for (const auto& word : t::lexicon_words("en_words.txt", 50)) {
    for (std::size_t i = 0; i + 1 < word.size(); ++i) {
      const Point a = layout.key_center(word[i]);
      const Point b = layout.key_center(word[i + 1]);
      if (a == b) continue;
      const int n = std::max(3, static_cast<int>(std::ceil(40.0 * distance(a, b))) + 1);
      const auto pts = min_jerk_segment(a, b, n);
      std::vector<double> steps;
      for (std::size_t j = 1; j < pts.size(); ++j) steps.push_back(distance(pts[j], pts[j - 1]));
      const auto top = static_cast<std::size_t>(std::max_element(steps.begin(), steps.end()) - steps.begin());
      for (std::size_t j = 1; j <= top; ++j) expect(steps[j] >= steps[j - 1] - 1e-15, "unimodal rise");
      for (std::size_t j = top + 1; j < steps.size(); ++j) expect(steps[j] <= steps[j - 1] + 1e-15, "unimodal fall");
      ++segments;
    }
  }
  const double secs = seconds_since(start);
  expect(secs < 10.0, "runtime");
  std::string detail = "peak " + fmt("%.9f", peak) + ", via " + fmt("%.1e", worst_via) + ", junction " +
                       fmt("%.1e", worst_junction) + ", " + std::to_string(segments) + " unimodal segments, " +
                       fmt("%.1f s", secs);
  if (!failures.empty()) detail += ", failed: " + failures.front();
  return {failures.empty(), detail};
}

Outcome geometric_round_trip() {
  const auto start = Clock::now();
  const KeyboardLayout layout = bundled_layout("qwerty_en");
  const SynthConfig cfg = SynthConfig::zero_noise();
  Rng rng(1);
  const auto words = t::lexicon_words("en_words.txt", 200);
  std::size_t ok = 0;
  for (const auto& word : words) {
    const Trace trace = synthesize_trace(layout, word, cfg, rng);
    if (t::collapse_key_visits(trace, layout, 0.5 * cfg.repeat_loop_radius * 0.1) == word) ++ok;
  }
  const double secs = seconds_since(start);
  return {ok == words.size() && words.size() == 200 && secs < 10.0,
          std::to_string(ok) + "/" + std::to_string(words.size()) + " words, " + fmt("%.1f s", secs)};
}

Outcome path_decoder_trend() {
  const auto start = Clock::now();
  const DeskFixture& d = desk();
  const double secs = seconds_since(start);
  const EvalReport& r = d.full.report;
  return {r.ctc_accuracy_post_head >= 90.0 && secs < 900.0,
          "test " + std::to_string(r.test_size) + ", path decode " + pct(r.ctc_accuracy_post_head) + " (argmax " +
              pct(r.ctc_accuracy_pre_head) + "), training " + fmt("%.1f s", d.train_seconds) + ", " +
              fmt("%.1f s", secs)};
}

Outcome transliteration() {
  const auto start = Clock::now();
  const std::u32string from = U"abcdefghijklmnopqrstuvwxyz";
  std::vector<char32_t> shuffled(from.begin(), from.end());
  Rng perm(11);
  perm.shuffle(shuffled);
  const std::u32string to(shuffled.begin(), shuffled.end());
  Rng rng(5);
  const auto encipher = [&](const std::u32string& s) {
    std::u32string out;
    for (char32_t c : s) out.push_back(to[from.find(c)]);
    return out;
  };
  const auto draw = [&](std::size_t n, const std::set<std::u32string>& exclude) {
    std::vector<TranslitPair> out;
    std::set<std::u32string> used;
    while (out.size() < n) {
      std::u32string s;
      const std::size_t len = 3 + rng.index(6);
      for (std::size_t j = 0; j < len; ++j) s.push_back(from[rng.index(from.size())]);
      if (exclude.count(s) || !used.insert(s).second) continue;
      out.push_back({s, encipher(s)});
    }
    return out;
  };
  const auto train = draw(500, {});
  std::set<std::u32string> train_sources;
  for (const auto& p : train) train_sources.insert(p.source);
  const auto test = draw(500, train_sources);

  const TranslitModel model = train_translit(train, Alphabet(from), Alphabet(to), TranslitConfig{});
  std::size_t exact = 0, k1_equal = 0;
  for (const auto& p : test) {
    const TranslitCandidate g = greedy_decode(model, p.source);
    if (g.text == p.target) ++exact;
    const auto beam = beam_search(model, p.source, 1);
    if (beam.size() == 1 && beam[0].text == g.text && beam[0].log_prob == g.log_prob) ++k1_equal;
  }
  const double accuracy = 100.0 * static_cast<double>(exact) / static_cast<double>(test.size());

  bool exhaustive = true;
  std::size_t ranked = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TranslitConfig cfg;
    cfg.embedding_dim = 4;
    cfg.hidden_dim = 6;
    cfg.attention_dim = 5;
    cfg.seed = seed;
    const TranslitModel tiny(Alphabet(U"ab"), Alphabet(U"xy"), cfg);
    for (const std::u32string src : {U"a", U"b", U"ab", U"bba"}) {
      const auto beam = beam_search(tiny, src, 9, 2);
      const auto brute = t::enumerate_outputs(tiny, src, 2);
      if (beam.size() != brute.size()) {
        exhaustive = false;
        continue;
      }
      for (std::size_t i = 0; i < beam.size(); ++i) {
        if (beam[i].text != brute[i].text || std::abs(beam[i].log_prob - brute[i].log_prob) > 1e-12) exhaustive = false;
      }
      ranked += beam.size();
    }
  }
  const double secs = seconds_since(start);
  return {accuracy >= 95.0 && k1_equal == test.size() && exhaustive && secs < 600.0,
          "cipher " + pct(accuracy) + " held-out, k=1 == greedy on " + std::to_string(k1_equal) + "/" +
              std::to_string(test.size()) + ", exhaustive beam " + (exhaustive ? "matches" : "differs") + " on " +
              std::to_string(ranked) + " ranked outputs, " + fmt("%.1f s", secs)};
}

Outcome correction_trend() {
  const auto start = Clock::now();
  const CorrectionFixture& c = correction();
  DeskFixture& d = desk();
  Pipeline bypass = d.trained.pipeline;
  bypass.bypass_correction = true;
  const EvalReport b = evaluate(bypass, d.split.test, 3).report;
  const bool bypass_equal = b.final_accuracy == b.pre_correction_accuracy;
  const bool mono = monotone(d.full.report.final_accuracy) && monotone(d.full.report.pre_correction_accuracy) &&
                    monotone(b.final_accuracy);
  const double secs = seconds_since(start);
  return {c.dense_accuracy >= 80.0 && bypass_equal && mono && secs < 900.0,
          "500 words, " + std::to_string(c.held_out.size()) + " held-out corruptions, top-1 " +
              pct(c.dense_accuracy) + " (edit-distance ceiling " + pct(c.oracle_ceiling) + "), pipeline " +
              pct(d.full.report.pre_correction_accuracy[0]) + " -> " + pct(d.full.report.final_accuracy[0]) +
              ", bypass " + (bypass_equal ? "equal" : "differs") + ", k-monotone " + (mono ? "yes" : "no") + ", " +
              fmt("%.1f s", secs)};
}

Outcome ablation_directions() {
  const auto start = Clock::now();
  DeskFixture& d = desk();
  const CorrectionFixture& c = correction();
  Ablations no_derivatives;
  no_derivatives.derivatives = true;
  const Evaluation ablated =
      ablate(TaskKind::kIndicToIndic, d.layout, d.records, d.vocabulary, d.config, no_derivatives);
  const double full = d.full.report.ctc_accuracy_post_head;
  const double without = ablated.report.ctc_accuracy_post_head;
  const bool mono = monotone(ablated.report.final_accuracy);
  const double secs = seconds_since(start) + d.train_seconds + c.dense_seconds + c.euclidean_seconds;
  return {without <= full && c.euclidean_accuracy <= c.dense_accuracy && mono && secs < 1800.0,
          "path decode " + pct(full) + " full vs " + pct(without) + " without derivatives; correction " +
              pct(c.dense_accuracy) + " dense vs " + pct(c.euclidean_accuracy) + " Euclidean; " +
              fmt("%.1f s", secs) + " paired"};
}

Outcome determinism() {
  const auto start = Clock::now();
  std::vector<std::string> failures;
  const KeyboardLayout layout = bundled_layout("qwerty_en");

  const auto dump = [](const std::vector<TraceRecord>& records) {
    std::ostringstream out;
    write_trace_records(out, records);
    return out.str();
  };
  const std::string a = dump(desk_records(layout));
  const std::string b = dump(desk_records(layout));
  if (a != b) failures.push_back("dataset bytes");
  auto entries = read_lexicon(t::data_dir() / "lexicons" / "en_words.txt");
  entries.resize(50);
  if (dump(generate_dataset(layout, entries, 30, SynthConfig{}, 43)) == a) failures.push_back("seed ignored");

  auto shared_layout = std::make_shared<const KeyboardLayout>(bundled_layout("qwerty_en"));
  auto lexicon = read_lexicon(t::data_dir() / "lexicons" / "hi_translit.tsv");
  lexicon.resize(6);
  const auto records = generate_dataset(*shared_layout, lexicon, 10, SynthConfig::zero_noise(), 5);
  std::vector<std::u32string> vocab;
  for (const auto& e : lexicon) vocab.push_back(e.target);
  PipelineTrainConfig cfg = default_train_config(TaskKind::kEnglishToIndic);
  cfg.path.encoder.heads = 2;
  cfg.path.encoder.model_dim = 16;
  cfg.path.encoder.ff_dim = 32;
  cfg.path.recurrent_layers = 1;
  cfg.path.recurrent_hidden = 16;
  cfg.path.head_layers = 1;
  cfg.path.head_hidden = 16;
  cfg.path.lr = 0.003;
  cfg.path.ctc_epochs = 12;
  cfg.path.head_epochs = 2;
  cfg.translit.epochs = 3;
  cfg.correct.epochs = 2;
  const auto split = split_dataset(records, 3);
  const auto train_once = [&] {
    return train_pipeline(TaskKind::kEnglishToIndic, shared_layout, split.train, split.validation, vocab, cfg);
  };
  const TrainedPipeline first = train_once();
  const TrainedPipeline second = train_once();
  if (first.path_report.ctc_epoch_losses != second.path_report.ctc_epoch_losses ||
      first.path_report.head_epoch_losses != second.path_report.head_epoch_losses ||
      first.translit_report.epoch_losses != second.translit_report.epoch_losses ||
      first.correct_report.epoch_losses != second.correct_report.epoch_losses) {
    failures.push_back("training losses");
  }
  const std::string r1 = to_json(evaluate(first.pipeline, split.test, 3).report);
  const std::string r2 = to_json(evaluate(second.pipeline, split.test, 3).report);
  if (r1 != r2) failures.push_back("eval report");
  DeskFixture& d = desk();
  if (to_json(evaluate(d.trained.pipeline, d.split.test, 3).report) != to_json(d.full.report)) {
    failures.push_back("desk eval report");
  }
  const double secs = seconds_since(start);
  std::string detail = std::to_string(a.size()) + " dataset bytes, " +
                       std::to_string(first.path_report.ctc_epoch_losses.size() +
                                      first.path_report.head_epoch_losses.size() +
                                      first.translit_report.epoch_losses.size() +
                                      first.correct_report.epoch_losses.size()) +
                       " epoch losses, 3 eval reports compared, " + fmt("%.1f s", secs);
  if (!failures.empty()) detail += ", differs: " + failures.front();
  return {failures.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ctc-oracle-equivalence", ctc_oracle},
      {"ctc-normalization", ctc_normalization},
      {"gradient-suite", gradient_suite},
      {"minimum-jerk-properties", minimum_jerk},
      {"geometric-round-trip", geometric_round_trip},
      {"path-decoder-trend", path_decoder_trend},
      {"transliteration-correctness", transliteration},
      {"correction-trend", correction_trend},
      {"ablation-directions", ablation_directions},
      {"determinism", determinism},
  };
  const auto start = Clock::now();
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << failed << " of " << criteria.size() << " criteria failed, total " << fmt("%.1f s", seconds_since(start))
            << std::endl;
  return failed == 0 ? 0 : 1;
}
