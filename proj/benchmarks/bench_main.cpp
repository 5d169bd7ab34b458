#include <algorithm>

#include <benchmark/benchmark.h>

#include "swipeforge/correct.hpp"
#include "swipeforge/ctc.hpp"
#include "swipeforge/path_decoder.hpp"
#include "swipeforge/synth.hpp"

using namespace swipeforge;

namespace {

EmissionSequence random_emissions(Eigen::Index frames, Eigen::Index symbols, Rng& rng) {
  EmissionSequence e;
  e.probs.resize(frames, symbols);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index s = 0; s < symbols; ++s) e.probs(t, s) = 0.05 + rng.uniform();
    e.probs.row(t) /= e.probs.row(t).sum();
  }
  return e;
}

Trace word_trace(const std::u32string& word) {
  static const KeyboardLayout layout = bundled_layout("qwerty_en");
  Rng rng(3);
  return synthesize_trace(layout, word, SynthConfig{}, rng);
}

void BM_CtcLoss(benchmark::State& state) {
  Rng rng(1);
  const auto frames = static_cast<Eigen::Index>(state.range(0));
  const EmissionSequence e = random_emissions(frames, 27, rng);
  std::vector<int> target;
  for (Eigen::Index i = 0; i < frames / 8; ++i) target.push_back(static_cast<int>(rng.index(26)));
  for (auto _ : state) benchmark::DoNotOptimize(ctc_log_loss(e, target));
  state.SetItemsProcessed(state.iterations() * frames);
}
BENCHMARK(BM_CtcLoss)->Arg(64)->Arg(256)->Arg(1024);

void BM_Featurize(benchmark::State& state) {
  const KeyboardLayout layout = bundled_layout("qwerty_en");
  const Trace trace = word_trace(U"keyboard");
  for (auto _ : state) benchmark::DoNotOptimize(featurize(trace, layout));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trace.points.size()));
}
BENCHMARK(BM_Featurize);

void BM_SynthesizeTrace(benchmark::State& state) {
  const KeyboardLayout layout = bundled_layout("qwerty_en");
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_trace(layout, U"keyboard", SynthConfig{}, rng));
}
BENCHMARK(BM_SynthesizeTrace);

void BM_EncodePath(benchmark::State& state) {
  const KeyboardLayout layout = bundled_layout("qwerty_en");
  PathDecoderConfig cfg;
  cfg.recurrent_layers = static_cast<int>(state.range(0));
  const PathDecoderModel model(layout.alphabet(), FeatureSequence::kOneHotOffset + 26, cfg);
  const FeatureSequence features = featurize(word_trace(U"keyboard"), layout);
  for (auto _ : state) benchmark::DoNotOptimize(model.encode_path(features));
  state.SetLabel(std::to_string(features.length()) + " frames");
}
BENCHMARK(BM_EncodePath)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_Correct(benchmark::State& state) {
  Rng rng(9);
  std::vector<std::u32string> words;
  const std::u32string letters = U"abcdefghijklmnopqrstuvwxyz";
  while (words.size() < static_cast<std::size_t>(state.range(0))) {
    std::u32string w;
    for (int i = 0; i < 4 + static_cast<int>(rng.index(6)); ++i) w.push_back(letters[rng.index(letters.size())]);
    if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
  }
  const CorrectionModel model(Alphabet(letters), CorrectConfig{});
  const Vocabulary vocab(model, words);
  for (auto _ : state) benchmark::DoNotOptimize(correct(model, vocab, U"keybord"));
}
BENCHMARK(BM_Correct)->Arg(500)->Arg(5000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
