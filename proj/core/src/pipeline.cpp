#include "swipeforge/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "swipeforge/error.hpp"

namespace swipeforge {

std::string to_string(TaskKind kind) {
  return kind == TaskKind::kEnglishToIndic ? "english_to_indic" : "indic_to_indic";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "english_to_indic") return TaskKind::kEnglishToIndic;
  if (text == "indic_to_indic") return TaskKind::kIndicToIndic;
  throw Error(ErrorCode::kInvalidArgument, "unknown task '" + text + "' (english_to_indic or indic_to_indic)");
}

std::vector<std::string> Ablations::names() const {
  std::vector<std::string> out;
  if (derivatives) out.emplace_back("derivatives");
  if (attention) out.emplace_back("attention");
  if (correction) out.emplace_back("correction");
  if (dense) out.emplace_back("dense");
  return out;
}

Ablations parse_ablations(std::span<const std::string> switches) {
  Ablations out;
  for (const auto& s : switches) {
    if (s == "derivatives") {
      out.derivatives = true;
    } else if (s == "attention") {
      out.attention = true;
    } else if (s == "correction") {
      out.correction = true;
    } else if (s == "dense") {
      out.dense = true;
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown ablation '" + s + "' (derivatives, attention, correction, dense)");
    }
  }
  return out;
}

void validate_pipeline(const Pipeline& p) {
  if (!p.layout) throw Error(ErrorCode::kInvalidArgument, "pipeline has no layout");
  if (!p.path) throw Error(ErrorCode::kMissingCheckpoint, "pipeline has no path decoder");
  if (p.task == TaskKind::kEnglishToIndic && !p.translit) {
    throw Error(ErrorCode::kConfigConflict, "english_to_indic requires a transliteration model");
  }
  if (p.task == TaskKind::kIndicToIndic && p.translit) {
    throw Error(ErrorCode::kConfigConflict, "indic_to_indic does not use a transliteration model");
  }
  if (!p.bypass_correction && (!p.corrector || !p.vocabulary)) {
    throw Error(ErrorCode::kMissingCheckpoint, "correction is enabled but no corrector or vocabulary is loaded");
  }
  if (p.beam_k < 1) throw Error(ErrorCode::kInvalidArgument, "beam size must be at least 1");
  if (!(p.path->alphabet() == p.layout->alphabet())) {
    throw Error(ErrorCode::kLayoutMismatch, "path decoder alphabet does not match the layout");
  }
}

namespace {

void push_unique(std::vector<Candidate>& out, Candidate c) {
  for (const auto& existing : out) {
    if (existing.word == c.word) return;
  }
  out.push_back(std::move(c));
}

double best_path_log_prob(const EmissionSequence& emissions) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < emissions.length(); ++t) total += std::log(emissions.probs.row(t).maxCoeff());
  return total;
}

}  // namespace

DecodeResult run_pipeline(const Pipeline& p, const Trace& trace) {
  if (!p.layout) throw Error(ErrorCode::kInvalidArgument, "pipeline has no layout");
  if (!trace.layout_name.empty() && trace.layout_name != p.layout->name()) {
    throw Error(ErrorCode::kLayoutMismatch,
                "trace layout '" + trace.layout_name + "' differs from the pipeline's '" + p.layout->name() + "'");
  }
  return run_pipeline(p, featurize(trace, *p.layout));
}

DecodeResult run_pipeline(const Pipeline& p, const FeatureSequence& features) {
  validate_pipeline(p);
  DecodeResult r;
  if (features.length() == 0) return r;
  const EmissionSequence emissions = p.path->encode_path(features);
  const ContractedSequence contracted = greedy_aggregate(emissions);
  for (int c : contracted.chars) r.path_argmax.push_back(p.path->alphabet().symbol(static_cast<std::size_t>(c)));
  r.path_decoded = p.use_decoder_head ? p.path->decode_characters(contracted) : r.path_argmax;

  if (p.task == TaskKind::kEnglishToIndic) {
    std::u32string source;
    for (char32_t c : r.path_decoded) {
      if (p.translit->source_alphabet().find(c)) source.push_back(c);
    }
    if (!source.empty()) r.transliterations = beam_search(*p.translit, source, p.beam_k);
    for (const auto& beam : r.transliterations) {
      if (beam.text.empty()) continue;
      if (p.bypass_correction) {
        push_unique(r.candidates, {beam.text, beam.log_prob, "log_prob", "translit", false});
        continue;
      }
      Correction c = correct(*p.corrector, *p.vocabulary, beam.text);
      push_unique(r.candidates, {c.word, c.score, "correction_distance", c.fallback ? "fallback" : "correction",
                                 c.fallback});
      r.corrections.push_back(std::move(c));
    }
    return r;
  }

  if (r.path_decoded.empty()) return r;
  if (p.bypass_correction) {
    r.candidates.push_back({r.path_decoded, best_path_log_prob(emissions), "log_prob", "path", false});
    return r;
  }
  r.corrections = correct_top_k(*p.corrector, *p.vocabulary, r.path_decoded, p.beam_k);
  for (const auto& c : r.corrections) {
    push_unique(r.candidates, {c.word, c.score, "correction_distance", c.fallback ? "fallback" : "correction",
                               c.fallback});
  }
  return r;
}

std::string to_json(const DecodeResult& r) {
  nlohmann::ordered_json doc;
  doc["path_argmax"] = u32_to_utf8(r.path_argmax);
  doc["path_decoded"] = u32_to_utf8(r.path_decoded);
  doc["transliterations"] = nlohmann::ordered_json::array();
  for (const auto& t : r.transliterations) {
    doc["transliterations"].push_back({{"text", u32_to_utf8(t.text)}, {"log_prob", t.log_prob}, {"truncated", t.truncated}});
  }
  doc["corrections"] = nlohmann::ordered_json::array();
  for (const auto& c : r.corrections) {
    doc["corrections"].push_back({{"word", u32_to_utf8(c.word)}, {"score", c.score}, {"fallback", c.fallback}});
  }
  doc["candidates"] = nlohmann::ordered_json::array();
  for (const auto& c : r.candidates) {
    doc["candidates"].push_back({{"word", u32_to_utf8(c.word)},
                                 {"score", c.score},
                                 {"score_kind", c.score_kind},
                                 {"provenance", c.provenance},
                                 {"fallback", c.fallback}});
  }
  return doc.dump(2);
}

DatasetSplit<std::size_t> split_indices(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw Error(ErrorCode::kInvalidArgument, "splitting needs at least 10 records");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5b1));
  rng.shuffle(order);
  const std::size_t train = n * 7 / 10;
  const std::size_t validation = n * 2 / 10;
  DatasetSplit<std::size_t> out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train));
  out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(train),
                        order.begin() + static_cast<std::ptrdiff_t>(train + validation));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train + validation), order.end());
  return out;
}

namespace {

double percent(std::size_t hits, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

bool in_first(const std::vector<std::u32string>& list, const std::u32string& gold, std::size_t k) {
  const std::size_t n = std::min(k, list.size());
  return std::find(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n), gold) !=
         list.begin() + static_cast<std::ptrdiff_t>(n);
}

}  // namespace

std::vector<LengthBin> length_bins(std::span<const Prediction> predictions) {
  std::map<std::size_t, LengthBin> bins;
  for (const auto& p : predictions) {
    LengthBin& b = bins[p.gold.size()];
    b.length = p.gold.size();
    ++b.count;
    if (p.correct) ++b.correct;
  }
  std::vector<LengthBin> out;
  for (auto& [len, b] : bins) {
    b.accuracy = percent(b.correct, b.count);
    out.push_back(b);
  }
  return out;
}

Evaluation evaluate(const Pipeline& pipeline, std::span<const TraceRecord> test, int k) {
  if (test.empty()) throw Error(ErrorCode::kEmptyInput, "evaluation set is empty");
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  Pipeline p = pipeline;
  p.beam_k = k;
  validate_pipeline(p);
  const bool transliterates = p.task == TaskKind::kEnglishToIndic;

  Evaluation out;
  std::size_t pre_head = 0;
  std::size_t post_head = 0;
  std::array<std::size_t, 3> translit_hits{};
  std::array<std::size_t, 3> pre_hits{};
  std::array<std::size_t, 3> final_hits{};
  for (const auto& record : test) {
    const DecodeResult r = run_pipeline(p, record.trace);
    Prediction pred;
    pred.traced_word = record.trace.word;
    pred.gold = record.target;
    pred.path_argmax = r.path_argmax;
    pred.path_decoded = r.path_decoded;
    if (transliterates) {
      for (const auto& t : r.transliterations) pred.pre_correction.push_back(t.text);
    } else if (!r.path_decoded.empty()) {
      pred.pre_correction.push_back(r.path_decoded);
    }
    for (const auto& c : r.candidates) pred.candidates.push_back(c.word);
    pred.correct = in_first(pred.candidates, pred.gold, 1);
    if (r.path_argmax == record.trace.word) ++pre_head;
    if (r.path_decoded == record.trace.word) ++post_head;
    for (std::size_t i = 0; i < 3; ++i) {
      if (in_first(pred.pre_correction, pred.gold, i + 1)) {
        ++pre_hits[i];
        if (transliterates) ++translit_hits[i];
      }
      if (in_first(pred.candidates, pred.gold, i + 1)) ++final_hits[i];
    }
    out.predictions.push_back(std::move(pred));
  }

  EvalReport& rep = out.report;
  rep.task = to_string(p.task);
  rep.test_size = test.size();
  rep.evaluated = test.size();
  rep.ctc_accuracy_pre_head = percent(pre_head, test.size());
  rep.ctc_accuracy_post_head = percent(post_head, test.size());
  if (transliterates) {
    rep.translit_accuracy = std::array<double, 3>{};
    for (std::size_t i = 0; i < 3; ++i) (*rep.translit_accuracy)[i] = percent(translit_hits[i], test.size());
  }
  for (std::size_t i = 0; i < 3; ++i) {
    rep.pre_correction_accuracy[i] = percent(pre_hits[i], test.size());
    rep.final_accuracy[i] = percent(final_hits[i], test.size());
  }
  rep.length_bins = length_bins(out.predictions);
  return out;
}

std::string to_json(const EvalReport& r) {
  nlohmann::ordered_json doc;
  doc["task"] = r.task;
  doc["ablations"] = r.ablations;
  doc["dataset"] = {{"train", r.train_size}, {"validation", r.validation_size}, {"test", r.test_size},
                    {"evaluated", r.evaluated}};
  doc["ctc_accuracy"] = {{"pre_head", r.ctc_accuracy_pre_head}, {"post_head", r.ctc_accuracy_post_head}};
  if (r.translit_accuracy) {
    doc["translit_accuracy"] = {{"k1", (*r.translit_accuracy)[0]}, {"k2", (*r.translit_accuracy)[1]},
                                {"k3", (*r.translit_accuracy)[2]}};
  } else {
    doc["translit_accuracy"] = nullptr;
  }
  doc["pre_correction_accuracy"] = {{"k1", r.pre_correction_accuracy[0]}, {"k2", r.pre_correction_accuracy[1]},
                                    {"k3", r.pre_correction_accuracy[2]}};
  doc["final_accuracy"] = {{"k1", r.final_accuracy[0]}, {"k2", r.final_accuracy[1]}, {"k3", r.final_accuracy[2]}};
  doc["length_bins"] = nlohmann::ordered_json::array();
  for (const auto& b : r.length_bins) {
    doc["length_bins"].push_back({{"length", b.length}, {"count", b.count}, {"correct", b.correct},
                                  {"accuracy", b.accuracy}});
  }
  doc["skipped"] = {{"ctc_training", r.ctc_skipped}, {"head_training", r.head_samples_skipped}};
  return doc.dump(2);
}

PipelineTrainConfig default_train_config(TaskKind task) {
  PipelineTrainConfig config;
  if (task == TaskKind::kIndicToIndic) config.path.recurrent_layers = 0;
  return config;
}

namespace {

std::vector<std::u32string> pre_correction_outputs(const Pipeline& p, const DecodeResult& r) {
  std::vector<std::u32string> out;
  if (p.task == TaskKind::kEnglishToIndic) {
    for (const auto& t : r.transliterations) out.push_back(t.text);
  } else if (!r.path_decoded.empty()) {
    out.push_back(r.path_decoded);
  }
  return out;
}

}  // namespace

std::vector<TranslitPair> translit_training_pairs(const PathDecoderModel& path, const KeyboardLayout& layout,
                                                  std::span<const TraceRecord> records, bool decoded) {
  std::vector<TranslitPair> pairs;
  std::set<std::pair<std::u32string, std::u32string>> seen;
  const auto add = [&](const std::u32string& s, const std::u32string& t) {
    if (!s.empty() && seen.emplace(s, t).second) pairs.push_back({s, t});
  };
  for (const auto& r : records) {
    add(r.trace.word, r.target);
    if (decoded) add(decode_word(path, featurize(r.trace, layout)), r.target);
  }
  return pairs;
}

double calibrate_pipeline_threshold(const Pipeline& pipeline, const CorrectionModel& corrector,
                                    const Vocabulary& vocabulary, std::span<const TraceRecord> validation,
                                    double quantile) {
  Pipeline p = pipeline;
  p.bypass_correction = true;
  std::vector<std::u32string> inputs;
  for (const auto& r : validation) {
    if (!vocabulary.index_of(r.target)) continue;
    const auto outputs = pre_correction_outputs(p, run_pipeline(p, r.trace));
    if (!outputs.empty() && !outputs.front().empty()) inputs.push_back(outputs.front());
  }
  if (inputs.empty()) return std::numeric_limits<double>::infinity();
  return calibrate_threshold(corrector, vocabulary, inputs, quantile);
}

TrainedPipeline train_pipeline(TaskKind task, std::shared_ptr<const KeyboardLayout> layout,
                               std::span<const TraceRecord> train, std::span<const TraceRecord> validation,
                               const std::vector<std::u32string>& vocabulary, const PipelineTrainConfig& config,
                               const Ablations& ablations) {
  if (!layout) throw Error(ErrorCode::kInvalidArgument, "training needs a layout");
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "training set is empty");
  TrainedPipeline out;
  Pipeline& p = out.pipeline;
  p.task = task;
  p.layout = layout;
  p.beam_k = config.beam_k;
  p.bypass_correction = true;

  PathDecoderConfig path_config = config.path;
  if (ablations.derivatives) path_config.use_derivatives = false;
  std::vector<PathTrainingSample> samples;
  samples.reserve(train.size());
  for (const auto& r : train) {
    if (r.trace.layout_name != layout->name()) {
      throw Error(ErrorCode::kLayoutMismatch, "training trace uses layout '" + r.trace.layout_name + "'");
    }
    samples.push_back({featurize(r.trace, *layout), r.trace.word});
  }
  p.path = std::make_shared<PathDecoderModel>(
      train_path_decoder(samples, layout->alphabet(), path_config, &out.path_report));

  if (task == TaskKind::kEnglishToIndic) {
    const auto pairs = translit_training_pairs(*p.path, *layout, train, config.translit_on_decoded);
    std::vector<std::u32string> target_words = vocabulary;
    for (const auto& r : train) target_words.push_back(r.target);
    TranslitConfig translit_config = config.translit;
    if (ablations.attention) translit_config.use_attention = false;
    p.translit = std::make_shared<TranslitModel>(train_translit(
        pairs, layout->alphabet(), Alphabet::from_words(target_words), translit_config, &out.translit_report));
  }

  if (ablations.correction) return out;
  if (vocabulary.empty()) throw Error(ErrorCode::kEmptyInput, "correction needs a vocabulary");

  CorrectConfig correct_config = config.correct;
  if (ablations.dense) correct_config.dense_scorer = false;
  const Alphabet correct_alphabet = Alphabet::from_words(vocabulary);
  std::vector<CorrectionPair> pairs;
  if (config.correction_from_synthetic) {
    Rng rng(derive_seed(config.seed, 11));
    pairs = generate_corruptions(vocabulary, correct_alphabet, config.corruption, rng);
  }
  if (config.correction_from_pipeline) {
    const std::set<std::u32string> known(vocabulary.begin(), vocabulary.end());
    for (const auto& r : train) {
      if (known.count(r.target) == 0) continue;
      for (const auto& w : pre_correction_outputs(p, run_pipeline(p, r.trace))) {
        if (w != r.target) pairs.push_back({w, r.target});
      }
    }
  }
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "no correction training pairs");
  CorrectionModel corrector =
      train_correct(CorrectionModel(correct_alphabet, correct_config), vocabulary, pairs, &out.correct_report);
  auto vocab = std::make_shared<Vocabulary>(corrector, vocabulary);

  if (config.threshold_quantile > 0.0 && !validation.empty()) {
    corrector.oov_threshold =
        calibrate_pipeline_threshold(p, corrector, *vocab, validation, config.threshold_quantile);
  }
  p.corrector = std::make_shared<CorrectionModel>(std::move(corrector));
  p.vocabulary = std::move(vocab);
  p.bypass_correction = false;
  return out;
}

Evaluation ablate(TaskKind task, std::shared_ptr<const KeyboardLayout> layout, const std::vector<TraceRecord>& records,
                  const std::vector<std::u32string>& vocabulary, const PipelineTrainConfig& config,
                  const Ablations& ablations) {
  const DatasetSplit<TraceRecord> split = split_dataset(records, config.seed);
  TrainedPipeline trained =
      train_pipeline(task, std::move(layout), split.train, split.validation, vocabulary, config, ablations);
  Evaluation e = evaluate(trained.pipeline, split.test, config.beam_k);
  e.report.ablations = ablations.names();
  e.report.train_size = split.train.size();
  e.report.validation_size = split.validation.size();
  e.report.ctc_skipped = trained.path_report.ctc_skipped;
  e.report.head_samples_skipped = trained.path_report.head_samples_skipped;
  return e;
}

std::string manifest_to_json(const PipelineManifest& m) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = PipelineManifest::kSchemaVersion;
  doc["task"] = to_string(m.task);
  doc["layout"] = m.layout;
  doc["beam_k"] = m.beam_k;
  doc["path_checkpoint"] = m.path_checkpoint;
  doc["translit_checkpoint"] = m.translit_checkpoint;
  doc["correct_checkpoint"] = m.correct_checkpoint;
  doc["vocabulary"] = m.vocabulary;
  return doc.dump(2) + "\n";
}

PipelineManifest manifest_from_json(const std::string& text) {
  PipelineManifest m;
  try {
    const nlohmann::json doc = nlohmann::json::parse(text);
    if (doc.at("schema_version").get<int>() != PipelineManifest::kSchemaVersion) {
      throw Error(ErrorCode::kSchema, "unsupported manifest schema_version");
    }
    m.task = parse_task_kind(doc.at("task").get<std::string>());
    m.layout = doc.at("layout").get<std::string>();
    m.beam_k = doc.value("beam_k", 3);
    m.path_checkpoint = doc.value("path_checkpoint", "");
    m.translit_checkpoint = doc.value("translit_checkpoint", "");
    m.correct_checkpoint = doc.value("correct_checkpoint", "");
    m.vocabulary = doc.value("vocabulary", "");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("invalid pipeline manifest: ") + e.what());
  }
  return m;
}

PipelineManifest read_manifest(const std::filesystem::path& model_dir) {
  const auto file = model_dir / "pipeline.json";
  if (!std::filesystem::exists(file)) {
    throw Error(ErrorCode::kMissingCheckpoint, "no pipeline.json in " + model_dir.string());
  }
  return manifest_from_json(read_text_file(file));
}

void write_manifest(const std::filesystem::path& model_dir, const PipelineManifest& manifest) {
  std::filesystem::create_directories(model_dir);
  std::ofstream out(model_dir / "pipeline.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest in " + model_dir.string());
  out << manifest_to_json(manifest);
}

Pipeline load_pipeline(const PipelineManifest& m, const std::filesystem::path& root) {
  const auto resolve = [&](const std::string& rel) { return root / rel; };
  Pipeline p;
  p.task = m.task;
  p.beam_k = m.beam_k;
  const auto names = bundled_layout_names();
  if (std::find(names.begin(), names.end(), m.layout) != names.end()) {
    p.layout = std::make_shared<KeyboardLayout>(bundled_layout(m.layout));
  } else {
    p.layout = std::make_shared<KeyboardLayout>(load_layout_file(resolve(m.layout)));
  }
  if (m.path_checkpoint.empty()) throw Error(ErrorCode::kMissingCheckpoint, "manifest names no path checkpoint");
  p.path = std::make_shared<PathDecoderModel>(
      PathDecoderModel::from_checkpoint(nn::load_checkpoint(resolve(m.path_checkpoint), "path_decoder")));
  if (!m.translit_checkpoint.empty()) {
    p.translit = std::make_shared<TranslitModel>(
        TranslitModel::from_checkpoint(nn::load_checkpoint(resolve(m.translit_checkpoint), "translit")));
  }
  if (m.correct_checkpoint.empty()) {
    p.bypass_correction = true;
  } else {
    auto corrector = std::make_shared<CorrectionModel>(
        CorrectionModel::from_checkpoint(nn::load_checkpoint(resolve(m.correct_checkpoint), "correct")));
    if (m.vocabulary.empty()) throw Error(ErrorCode::kMissingCheckpoint, "manifest names no vocabulary");
    p.vocabulary = std::make_shared<Vocabulary>(*corrector, read_vocabulary(resolve(m.vocabulary)));
    p.corrector = std::move(corrector);
  }
  validate_pipeline(p);
  return p;
}

}  // namespace swipeforge
