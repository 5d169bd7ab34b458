#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swipeforge/correct.hpp"
#include "swipeforge/dataset.hpp"
#include "swipeforge/path_decoder.hpp"
#include "swipeforge/translit.hpp"

namespace swipeforge {

enum class TaskKind { kEnglishToIndic, kIndicToIndic };

std::string to_string(TaskKind kind);
/// "english_to_indic" or "indic_to_indic"; anything else is
/// Error(kInvalidArgument).
TaskKind parse_task_kind(const std::string& text);

/// Components to disable. All off means the full pipeline.
struct Ablations {
  bool derivatives = false;  // zero dx, dy features
  bool attention = false;    // translit context = final encoder state
  bool correction = false;   // skip correction
  bool dense = false;        // raw Euclidean distance instead of the scorer

  bool any() const { return derivatives || attention || correction || dense; }
  std::vector<std::string> names() const;
};

/// Accepts "derivatives", "attention", "correction" and "dense". Throws
/// Error(kInvalidArgument) for anything else.
Ablations parse_ablations(std::span<const std::string> switches);

/// Loaded models for one task. Models are shared, immutable snapshots.
struct Pipeline {
  TaskKind task = TaskKind::kEnglishToIndic;
  std::shared_ptr<const KeyboardLayout> layout;
  std::shared_ptr<const PathDecoderModel> path;
  std::shared_ptr<const TranslitModel> translit;
  std::shared_ptr<const CorrectionModel> corrector;
  std::shared_ptr<const Vocabulary> vocabulary;
  int beam_k = 3;
  bool use_decoder_head = true;
  bool bypass_correction = false;
};

/// english_to_indic needs a transliteration model, indic_to_indic must not
/// have one (Error(kConfigConflict)); a missing path decoder, or a missing
/// corrector when correction is on, is Error(kMissingCheckpoint).
void validate_pipeline(const Pipeline& pipeline);

struct Candidate {
  std::u32string word;
  double score = 0.0;
  std::string score_kind;   // "log_prob" or "correction_distance"
  std::string provenance;   // "path", "translit", "correction" or "fallback"
  bool fallback = false;
};

struct DecodeResult {
  std::u32string path_argmax;   // run characters before the head
  std::u32string path_decoded;  // head output
  std::vector<TranslitCandidate> transliterations;
  std::vector<Correction> corrections;
  std::vector<Candidate> candidates;  // final, deduplicated, at most beam_k
};

/// Throws Error(kLayoutMismatch) when the trace names another layout.
DecodeResult run_pipeline(const Pipeline& pipeline, const Trace& trace);
DecodeResult run_pipeline(const Pipeline& pipeline, const FeatureSequence& features);

std::string to_json(const DecodeResult& result);

template <typename T>
struct DatasetSplit {
  std::vector<T> train;
  std::vector<T> validation;
  std::vector<T> test;
};

/// Seeded shuffle of 0..n-1 cut 70/20/10 (floor, floor, remainder). Throws
/// Error(kInvalidArgument) for n < 10.
DatasetSplit<std::size_t> split_indices(std::size_t n, std::uint64_t seed);

template <typename T>
DatasetSplit<T> split_dataset(const std::vector<T>& records, std::uint64_t seed) {
  const DatasetSplit<std::size_t> idx = split_indices(records.size(), seed);
  DatasetSplit<T> out;
  for (std::size_t i : idx.train) out.train.push_back(records[i]);
  for (std::size_t i : idx.validation) out.validation.push_back(records[i]);
  for (std::size_t i : idx.test) out.test.push_back(records[i]);
  return out;
}

struct LengthBin {
  std::size_t length = 0;
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct Prediction {
  std::u32string traced_word;
  std::u32string gold;
  std::u32string path_argmax;
  std::u32string path_decoded;
  std::vector<std::u32string> pre_correction;  // beams, or the path string
  std::vector<std::u32string> candidates;
  bool correct = false;  // gold at rank 1
};

struct EvalReport {
  std::string task;
  std::vector<std::string> ablations;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  std::size_t evaluated = 0;
  double ctc_accuracy_pre_head = 0.0;
  double ctc_accuracy_post_head = 0.0;
  std::optional<std::array<double, 3>> translit_accuracy;  // english_to_indic only
  std::array<double, 3> pre_correction_accuracy{};
  std::array<double, 3> final_accuracy{};
  std::vector<LengthBin> length_bins;
  std::size_t ctc_skipped = 0;
  std::size_t head_samples_skipped = 0;
};

struct Evaluation {
  EvalReport report;
  std::vector<Prediction> predictions;
};

/// Accuracies are percentages. A prediction is correct at k when one of the
/// first k candidates equals the gold word. `k` overrides the pipeline's
/// beam size. Throws Error(kEmptyInput) for an empty test set.
Evaluation evaluate(const Pipeline& pipeline, std::span<const TraceRecord> test, int k = 3);

std::string to_json(const EvalReport& report);

struct PipelineTrainConfig {
  PathDecoderConfig path;
  TranslitConfig translit;
  CorrectConfig correct;
  CorruptionConfig corruption;
  /// Also train transliteration on the path decoder's outputs for the
  /// training traces, not just the gold traced words.
  bool translit_on_decoded = true;
  bool correction_from_synthetic = true;
  bool correction_from_pipeline = false;
  /// Quantile of e* on validation inputs used as the OOV threshold; 0 keeps
  /// the threshold infinite.
  double threshold_quantile = 0.99;
  int beam_k = 3;
  std::uint64_t seed = 1;
};

/// Desk-scale defaults; indic_to_indic drops the recurrent stack.
PipelineTrainConfig default_train_config(TaskKind task);

struct TrainedPipeline {
  Pipeline pipeline;
  PathTrainingReport path_report;
  TranslitTrainingReport translit_report;
  CorrectTrainingReport correct_report;
};

/// Traced word -> target for every record, then the path decoder's output
/// -> target when `decoded` is set. Repeated pairs and empty sources are
/// dropped.
std::vector<TranslitPair> translit_training_pairs(const PathDecoderModel& path, const KeyboardLayout& layout,
                                                  std::span<const TraceRecord> records, bool decoded);

/// OOV threshold from the first pre-correction output of every validation
/// trace whose target is in the vocabulary. Infinity when there is none.
double calibrate_pipeline_threshold(const Pipeline& pipeline, const CorrectionModel& corrector,
                                    const Vocabulary& vocabulary, std::span<const TraceRecord> validation,
                                    double quantile);

/// Path decoder, then transliteration (english_to_indic), then correction.
TrainedPipeline train_pipeline(TaskKind task, std::shared_ptr<const KeyboardLayout> layout,
                               std::span<const TraceRecord> train, std::span<const TraceRecord> validation,
                               const std::vector<std::u32string>& vocabulary, const PipelineTrainConfig& config,
                               const Ablations& ablations = {});

/// Split, train with the ablations applied, evaluate on the test split.
Evaluation ablate(TaskKind task, std::shared_ptr<const KeyboardLayout> layout, const std::vector<TraceRecord>& records,
                  const std::vector<std::u32string>& vocabulary, const PipelineTrainConfig& config,
                  const Ablations& ablations);

/// Files making up a trained pipeline, stored in a model directory as
/// pipeline.json. Paths are relative to the directory.
struct PipelineManifest {
  static constexpr int kSchemaVersion = 1;
  TaskKind task = TaskKind::kEnglishToIndic;
  std::string layout;
  int beam_k = 3;
  std::string path_checkpoint;
  std::string translit_checkpoint;
  std::string correct_checkpoint;
  std::string vocabulary;
};

std::string manifest_to_json(const PipelineManifest& manifest);
PipelineManifest manifest_from_json(const std::string& text);
/// Throws Error(kMissingCheckpoint) when the directory has no pipeline.json.
PipelineManifest read_manifest(const std::filesystem::path& model_dir);
void write_manifest(const std::filesystem::path& model_dir, const PipelineManifest& manifest);

/// Loads every file the manifest names; `root` resolves relative paths.
Pipeline load_pipeline(const PipelineManifest& manifest, const std::filesystem::path& root);

}  // namespace swipeforge
