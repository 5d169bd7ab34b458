#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "serve.hpp"
#include "swipeforge/analysis.hpp"
#include "swipeforge/dataset.hpp"
#include "swipeforge/error.hpp"
#include "swipeforge/nn/checkpoint.hpp"
#include "swipeforge/text.hpp"

namespace swipeforge::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kDefaultSeed = 7;

// A valid parse that still lacks something a subcommand needs.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every command that loads a trained pipeline.
struct PipelineFlags {
  std::optional<std::string> model_dir;
  std::optional<std::string> task;
  std::optional<std::string> layout;
  std::optional<std::string> path_checkpoint;
  std::optional<std::string> translit_checkpoint;
  std::optional<std::string> correct_checkpoint;
  std::optional<std::string> vocab;
  std::optional<int> k;
  bool no_correction = false;
  bool no_head = false;
};

struct PathOverrides {
  std::optional<int> ctc_epochs, head_epochs, heads, recurrent_layers, head_layers;
  std::optional<long> model_dim, ff_dim, recurrent_hidden, head_hidden;
  std::optional<double> lr, dropout;
  bool no_derivatives = false;
};

struct TranslitOverrides {
  std::optional<int> epochs;
  std::optional<long> embedding_dim, hidden_dim, attention_dim;
  std::optional<double> lr;
  bool no_attention = false;
};

struct CorrectOverrides {
  std::optional<int> epochs, negatives, variants;
  std::optional<long> char_embedding_dim, encoding_dim, scorer_hidden;
  std::optional<double> lr;
  std::vector<std::string> ops;
  bool euclidean = false;
};

template <typename T, typename U>
void apply(const std::optional<T>& value, U& target) {
  if (value) target = static_cast<U>(*value);
}

void add_pipeline_flags(CLI::App* sub, PipelineFlags& f) {
  sub->add_option("--model-dir", f.model_dir, "Directory holding pipeline.json");
  sub->add_option("--task", f.task, "english_to_indic or indic_to_indic");
  sub->add_option("--layout", f.layout, "Bundled layout name or layout file");
  sub->add_option("--path-checkpoint", f.path_checkpoint, "Path decoder checkpoint");
  sub->add_option("--translit-checkpoint", f.translit_checkpoint, "Transliteration checkpoint");
  sub->add_option("--correct-checkpoint", f.correct_checkpoint, "Correction checkpoint");
  sub->add_option("--vocab", f.vocab, "Vocabulary, one word per line");
  sub->add_option("--k", f.k, "Suggestions per trace (1-3)")->check(CLI::Range(1, 3));
  sub->add_flag("--no-correction", f.no_correction, "Bypass the correction stage");
  sub->add_flag("--no-head", f.no_head, "Use the CTC run characters without the character head");
}

void add_path_overrides(CLI::App* sub, PathOverrides& o) {
  sub->add_option("--ctc-epochs", o.ctc_epochs, "CTC training epochs");
  sub->add_option("--head-epochs", o.head_epochs, "Character head training epochs");
  sub->add_option("--path-lr", o.lr, "Path decoder learning rate");
  sub->add_option("--heads", o.heads, "Attention heads");
  sub->add_option("--model-dim", o.model_dim, "Encoder width");
  sub->add_option("--ff-dim", o.ff_dim, "Encoder feed-forward width");
  sub->add_option("--path-dropout", o.dropout, "Encoder dropout rate");
  sub->add_option("--recurrent-layers", o.recurrent_layers, "BiLSTM layers after the encoder");
  sub->add_option("--recurrent-hidden", o.recurrent_hidden, "BiLSTM width per direction");
  sub->add_option("--head-layers", o.head_layers, "Character head BiLSTM layers");
  sub->add_option("--head-hidden", o.head_hidden, "Character head width per direction");
  sub->add_flag("--no-derivatives", o.no_derivatives, "Zero the dx, dy features");
}

void add_translit_overrides(CLI::App* sub, TranslitOverrides& o) {
  sub->add_option("--translit-epochs", o.epochs, "Transliteration epochs");
  sub->add_option("--translit-lr", o.lr, "Transliteration learning rate");
  sub->add_option("--embedding-dim", o.embedding_dim, "Character embedding width");
  sub->add_option("--hidden-dim", o.hidden_dim, "Recurrent width");
  sub->add_option("--attention-dim", o.attention_dim, "Attention width");
  sub->add_flag("--no-attention", o.no_attention, "Use the final encoder state as context");
}

void add_correct_overrides(CLI::App* sub, CorrectOverrides& o) {
  sub->add_option("--correct-epochs", o.epochs, "Correction epochs");
  sub->add_option("--correct-lr", o.lr, "Correction learning rate");
  sub->add_option("--negatives", o.negatives, "Negatives per update, 0 for the whole vocabulary");
  sub->add_option("--variants", o.variants, "Corruptions per vocabulary word");
  sub->add_option("--edit-ops", o.ops, "Corruption edits: substitute, delete, insert, transpose");
  sub->add_option("--char-embedding-dim", o.char_embedding_dim, "Correction character embedding width");
  sub->add_option("--encoding-dim", o.encoding_dim, "Word encoding width");
  sub->add_option("--scorer-hidden", o.scorer_hidden, "Dense scorer width");
  sub->add_flag("--euclidean", o.euclidean, "Raw Euclidean distance instead of the dense scorer");
}

void apply_overrides(const PathOverrides& o, PathDecoderConfig& c) {
  apply(o.ctc_epochs, c.ctc_epochs);
  apply(o.head_epochs, c.head_epochs);
  apply(o.lr, c.lr);
  apply(o.heads, c.encoder.heads);
  apply(o.model_dim, c.encoder.model_dim);
  apply(o.ff_dim, c.encoder.ff_dim);
  apply(o.dropout, c.encoder.dropout_rate);
  apply(o.recurrent_layers, c.recurrent_layers);
  apply(o.recurrent_hidden, c.recurrent_hidden);
  apply(o.head_layers, c.head_layers);
  apply(o.head_hidden, c.head_hidden);
  if (o.no_derivatives) c.use_derivatives = false;
}

void apply_overrides(const TranslitOverrides& o, TranslitConfig& c) {
  apply(o.epochs, c.epochs);
  apply(o.lr, c.lr);
  apply(o.embedding_dim, c.embedding_dim);
  apply(o.hidden_dim, c.hidden_dim);
  apply(o.attention_dim, c.attention_dim);
  if (o.no_attention) c.use_attention = false;
}

EditOp parse_edit_op(const std::string& s) {
  if (s == "substitute") return EditOp::kSubstitute;
  if (s == "delete") return EditOp::kDelete;
  if (s == "insert") return EditOp::kInsert;
  if (s == "transpose") return EditOp::kTranspose;
  throw Error(ErrorCode::kInvalidArgument, "unknown edit op '" + s + "' (substitute, delete, insert, transpose)");
}

void apply_overrides(const CorrectOverrides& o, CorrectConfig& c, CorruptionConfig& corruption) {
  apply(o.epochs, c.epochs);
  apply(o.lr, c.lr);
  apply(o.negatives, c.negatives);
  apply(o.char_embedding_dim, c.char_embedding_dim);
  apply(o.encoding_dim, c.encoding_dim);
  apply(o.scorer_hidden, c.scorer_hidden);
  if (o.euclidean) c.dense_scorer = false;
  apply(o.variants, corruption.variants_per_word);
  if (!o.ops.empty()) {
    corruption.ops.clear();
    for (const auto& s : o.ops) corruption.ops.push_back(parse_edit_op(s));
  }
}

std::string absolute_string(const std::string& path) { return fs::absolute(path).lexically_normal().string(); }

// Bundled names stay names; anything else becomes an absolute file path.
std::string layout_reference(const std::string& name_or_path) {
  const auto names = bundled_layout_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return name_or_path;
  return absolute_string(name_or_path);
}

struct ResolvedSources {
  PipelineManifest manifest;
  fs::path root;
};

ResolvedSources resolve_sources(const PipelineFlags& f) {
  ResolvedSources r;
  if (f.model_dir) {
    r.root = *f.model_dir;
    r.manifest = read_manifest(r.root);
  }
  PipelineManifest& m = r.manifest;
  if (f.layout) m.layout = layout_reference(*f.layout);
  if (f.path_checkpoint) m.path_checkpoint = absolute_string(*f.path_checkpoint);
  if (f.translit_checkpoint) m.translit_checkpoint = absolute_string(*f.translit_checkpoint);
  if (f.correct_checkpoint) m.correct_checkpoint = absolute_string(*f.correct_checkpoint);
  if (f.vocab) m.vocabulary = absolute_string(*f.vocab);
  if (f.k) m.beam_k = *f.k;
  if (f.task) {
    m.task = parse_task_kind(*f.task);
  } else if (!f.model_dir) {
    m.task = m.translit_checkpoint.empty() ? TaskKind::kIndicToIndic : TaskKind::kEnglishToIndic;
  }
  if (m.path_checkpoint.empty()) throw UsageError("--path-checkpoint or --model-dir is required");
  if (m.layout.empty()) throw UsageError("--layout or --model-dir is required");
  if (f.no_correction) m.correct_checkpoint.clear();
  return r;
}

Pipeline load_from_flags(const PipelineFlags& f) {
  const ResolvedSources s = resolve_sources(f);
  Pipeline p = load_pipeline(s.manifest, s.root);
  p.use_decoder_head = !f.no_head;
  return p;
}

// Reads an existing manifest or starts one, applies `edit`, writes it back.
void update_manifest(const fs::path& dir, const std::function<void(PipelineManifest&)>& edit) {
  fs::create_directories(dir);
  PipelineManifest m;
  if (fs::exists(dir / "pipeline.json")) m = read_manifest(dir);
  edit(m);
  write_manifest(dir, m);
}

fs::path output_path(const std::optional<std::string>& out, const std::optional<std::string>& model_dir,
                     const std::string& file_name) {
  if (out) return *out;
  if (model_dir) return fs::path(*model_dir) / file_name;
  throw UsageError("--out or --model-dir is required");
}

KeyboardLayout layout_from_manifest(const PipelineManifest& m, const fs::path& root) {
  const auto names = bundled_layout_names();
  if (std::find(names.begin(), names.end(), m.layout) != names.end()) return bundled_layout(m.layout);
  return load_layout_file(root / m.layout);
}

void check_layout(std::span<const TraceRecord> records, const KeyboardLayout& layout) {
  for (const auto& r : records) {
    if (r.trace.layout_name != layout.name()) {
      throw Error(ErrorCode::kLayoutMismatch, "trace uses layout '" + r.trace.layout_name + "', expected '" +
                                                  layout.name() + "'");
    }
  }
}

std::vector<PathTrainingSample> path_samples(std::span<const TraceRecord> records, const KeyboardLayout& layout) {
  check_layout(records, layout);
  std::vector<PathTrainingSample> samples;
  samples.reserve(records.size());
  for (const auto& r : records) samples.push_back({featurize(r.trace, layout), r.trace.word});
  return samples;
}

std::vector<TraceRecord> read_dataset(const std::string& path) {
  auto records = read_trace_records(fs::path(path));
  if (records.empty()) throw Error(ErrorCode::kEmptyInput, "dataset '" + path + "' has no records");
  return records;
}

Json parse_json(const std::string& text) { return Json::parse(text); }

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string layout, lexicon, out;
  int traces_per_word = 1;
  bool zero_noise = false;
  bool no_via_noise = false;
  std::optional<double> points_per_unit, endpoint_sigma, repeat_loop_radius;
};

void run_synth(const SynthArgs& a, std::uint64_t seed, std::ostream& out) {
  const KeyboardLayout layout = resolve_layout(a.layout);
  const auto entries = read_lexicon(a.lexicon);
  SynthConfig cfg = a.zero_noise ? SynthConfig::zero_noise() : SynthConfig{};
  if (a.no_via_noise) cfg.via_noise = false;
  apply(a.points_per_unit, cfg.points_per_unit);
  apply(a.endpoint_sigma, cfg.endpoint_sigma);
  apply(a.repeat_loop_radius, cfg.repeat_loop_radius);
  cfg.rng_seed = seed;
  const auto records = generate_dataset(layout, entries, a.traces_per_word, cfg, seed);
  write_trace_records(fs::path(a.out), records);
  Json doc;
  doc["records"] = records.size();
  doc["words"] = entries.size();
  doc["layout"] = layout.name();
  doc["out"] = a.out;
  out << doc.dump() << "\n";
}

struct TrainPathArgs {
  std::string dataset;
  std::optional<std::string> layout, out, model_dir;
  std::string task = "english_to_indic";
  PathOverrides overrides;
};

void run_train_path(const TrainPathArgs& a, std::uint64_t seed, std::uint64_t split_seed, std::ostream& out) {
  const TaskKind task = parse_task_kind(a.task);
  const auto records = read_dataset(a.dataset);
  const std::string layout_ref = layout_reference(a.layout.value_or(records.front().trace.layout_name));
  const KeyboardLayout layout = resolve_layout(layout_ref);
  const fs::path target = output_path(a.out, a.model_dir, "path.json");
  const auto split = split_dataset(records, split_seed);
  const auto samples = path_samples(split.train, layout);
  PathDecoderConfig cfg = default_train_config(task).path;
  apply_overrides(a.overrides, cfg);
  cfg.seed = seed;
  PathTrainingReport report;
  const PathDecoderModel model = train_path_decoder(samples, layout.alphabet(), cfg, &report);
  if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
  nn::save_checkpoint(model.to_checkpoint(), target);
  if (a.model_dir) {
    update_manifest(*a.model_dir, [&](PipelineManifest& m) {
      m.task = task;
      m.layout = layout_ref;
      m.path_checkpoint = a.out ? absolute_string(*a.out) : "path.json";
      if (task == TaskKind::kIndicToIndic) m.translit_checkpoint.clear();
    });
  }
  Json doc;
  doc["checkpoint"] = target.string();
  doc["train_records"] = split.train.size();
  doc["report"] = parse_json(to_json(report));
  out << doc.dump() << "\n";
}

struct TrainTranslitArgs {
  std::string dataset;
  std::optional<std::string> out, vocab;
  PipelineFlags sources;
  TranslitOverrides overrides;
  bool gold_only = false;
};

void run_train_translit(const TrainTranslitArgs& a, std::uint64_t seed, std::uint64_t split_seed, std::ostream& out) {
  PipelineFlags f = a.sources;
  f.no_correction = true;
  ResolvedSources s = resolve_sources(f);
  if (s.manifest.task == TaskKind::kIndicToIndic) {
    throw Error(ErrorCode::kConfigConflict, "indic_to_indic has no transliteration stage");
  }
  // Order: the path decoder must exist first, its outputs feed the pairs.
  s.manifest.translit_checkpoint.clear();
  const PipelineManifest& m = s.manifest;
  const KeyboardLayout layout = layout_from_manifest(m, s.root);
  const PathDecoderModel path =
      PathDecoderModel::from_checkpoint(nn::load_checkpoint(s.root / m.path_checkpoint, "path_decoder"));
  if (!(path.alphabet() == layout.alphabet())) {
    throw Error(ErrorCode::kLayoutMismatch, "path decoder alphabet does not match layout '" + layout.name() + "'");
  }
  const fs::path target = output_path(a.out, a.sources.model_dir, "translit.json");
  const auto records = read_dataset(a.dataset);
  const auto split = split_dataset(records, split_seed);
  check_layout(split.train, layout);
  const auto pairs = translit_training_pairs(path, layout, split.train, !a.gold_only);
  std::vector<std::u32string> target_words;
  if (a.vocab) target_words = read_vocabulary(*a.vocab);
  for (const auto& r : split.train) target_words.push_back(r.target);
  TranslitConfig cfg;
  apply_overrides(a.overrides, cfg);
  cfg.seed = seed;
  TranslitTrainingReport report;
  const TranslitModel model =
      train_translit(pairs, layout.alphabet(), Alphabet::from_words(target_words), cfg, &report);
  if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
  nn::save_checkpoint(model.to_checkpoint(), target);
  if (a.sources.model_dir) {
    update_manifest(*a.sources.model_dir, [&](PipelineManifest& mm) {
      mm.task = TaskKind::kEnglishToIndic;
      mm.translit_checkpoint = a.out ? absolute_string(*a.out) : "translit.json";
    });
  }
  Json doc;
  doc["checkpoint"] = target.string();
  doc["report"] = parse_json(to_json(report));
  out << doc.dump() << "\n";
}

struct TrainCorrectArgs {
  std::optional<std::string> out, dataset;
  PipelineFlags sources;
  CorrectOverrides overrides;
  double threshold_quantile = 0.99;
};

void run_train_correct(const TrainCorrectArgs& a, std::uint64_t seed, std::uint64_t split_seed, std::ostream& out) {
  const std::string& vocab_file = *a.sources.vocab;
  const auto words = read_vocabulary(vocab_file);
  if (words.empty()) throw Error(ErrorCode::kEmptyInput, "vocabulary '" + vocab_file + "' is empty");
  const fs::path target = output_path(a.out, a.sources.model_dir, "correct.json");
  CorrectConfig cfg;
  CorruptionConfig corruption;
  apply_overrides(a.overrides, cfg, corruption);
  cfg.seed = seed;
  const Alphabet alphabet = Alphabet::from_words(words);
  Rng rng(derive_seed(seed, 11));
  const auto pairs = generate_corruptions(words, alphabet, corruption, rng);
  CorrectTrainingReport report;
  CorrectionModel model = train_correct(CorrectionModel(alphabet, cfg), words, pairs, &report);

  Json doc;
  if (a.dataset) {
    PipelineFlags f = a.sources;
    f.no_correction = true;
    f.vocab.reset();
    const Pipeline p = load_from_flags(f);
    const auto records = read_dataset(*a.dataset);
    const auto split = split_dataset(records, split_seed);
    const Vocabulary vocab(model, words);
    model.oov_threshold = calibrate_pipeline_threshold(p, model, vocab, split.validation, a.threshold_quantile);
    doc["threshold"] = std::isfinite(model.oov_threshold) ? Json(model.oov_threshold) : Json(nullptr);
  }
  if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
  nn::save_checkpoint(model.to_checkpoint(), target);
  if (a.sources.model_dir) {
    const fs::path dir = *a.sources.model_dir;
    fs::create_directories(dir);
    {
      std::ofstream vocab_out(dir / "vocab.txt", std::ios::binary);
      for (const auto& w : words) vocab_out << u32_to_utf8(w) << "\n";
      if (!vocab_out) throw Error(ErrorCode::kIo, "cannot write " + (dir / "vocab.txt").string());
    }
    update_manifest(dir, [&](PipelineManifest& m) {
      m.correct_checkpoint = a.out ? absolute_string(*a.out) : "correct.json";
      m.vocabulary = "vocab.txt";
    });
  }
  doc["checkpoint"] = target.string();
  doc["report"] = parse_json(to_json(report));
  out << doc.dump() << "\n";
}

struct EvalArgs {
  std::string dataset;
  PipelineFlags sources;
  bool all_records = false;
};

Evaluation run_evaluation(const EvalArgs& a, std::uint64_t split_seed) {
  const Pipeline p = load_from_flags(a.sources);
  const auto records = read_dataset(a.dataset);
  if (a.all_records) return evaluate(p, records, p.beam_k);
  const auto split = split_dataset(records, split_seed);
  Evaluation e = evaluate(p, split.test, p.beam_k);
  e.report.train_size = split.train.size();
  e.report.validation_size = split.validation.size();
  return e;
}

struct AblateArgs {
  std::string dataset, vocab;
  std::string task = "english_to_indic";
  std::optional<std::string> layout;
  std::vector<std::string> ablations;
  PathOverrides path;
  TranslitOverrides translit;
  CorrectOverrides correct;
};

void run_ablate(const AblateArgs& a, std::uint64_t seed, std::uint64_t split_seed, std::ostream& out) {
  const TaskKind task = parse_task_kind(a.task);
  const Ablations ablations = parse_ablations(a.ablations);
  const auto records = read_dataset(a.dataset);
  auto layout = std::make_shared<const KeyboardLayout>(
      resolve_layout(a.layout.value_or(records.front().trace.layout_name)));
  PipelineTrainConfig cfg = default_train_config(task);
  apply_overrides(a.path, cfg.path);
  apply_overrides(a.translit, cfg.translit);
  apply_overrides(a.correct, cfg.correct, cfg.corruption);
  cfg.path.seed = cfg.translit.seed = cfg.correct.seed = seed;
  cfg.seed = split_seed;
  const Evaluation e = ablate(task, layout, records, read_vocabulary(a.vocab), cfg, ablations);
  out << to_json(e.report) << "\n";
}

struct DecodeArgs {
  std::string trace;
  PipelineFlags sources;
};

void run_decode(const DecodeArgs& a, std::ostream& out) {
  const Pipeline p = load_from_flags(a.sources);
  for (const auto& record : read_dataset(a.trace)) out << decode_response_json(run_pipeline(p, record.trace)) << "\n";
}

}  // namespace

std::string error_line(std::string_view code, std::string_view message) {
  Json doc;
  doc["error"] = {{"code", std::string(code)}, {"message", std::string(message)}};
  return doc.dump();
}

std::string decode_response_json(const DecodeResult& result, double timing_ms) {
  Json doc;
  doc["suggestions"] = Json::array();
  for (const auto& c : result.candidates) {
    doc["suggestions"].push_back({{"word", u32_to_utf8(c.word)},
                                  {"score", c.score},
                                  {"score_kind", c.score_kind},
                                  {"stage_provenance", c.provenance}});
  }
  doc["path_decoded"] = u32_to_utf8(result.path_decoded);
  if (timing_ms >= 0.0) doc["timing_ms"] = timing_ms;
  return doc.dump();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"swipeforge: gesture typing toolkit", "swipeforge"};
  app.set_config("--config", "", "TOML or INI file with flag values; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  app.get_formatter()->column_width(36);

  std::uint64_t seed = kDefaultSeed;
  std::uint64_t split_seed = 1;
  app.add_option("--seed", seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--split-seed", split_seed, "Seed of the 70/20/10 split")->capture_default_str();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Synthesize traces for a lexicon");
  synth_cmd->add_option("--layout", synth.layout, "Bundled layout name or layout file")->required();
  synth_cmd->add_option("--lexicon", synth.lexicon, "word or source<TAB>target per line")->required();
  synth_cmd->add_option("--out", synth.out, "Output trace dataset (JSON lines)")->required();
  synth_cmd->add_option("--traces-per-word", synth.traces_per_word, "Traces per lexicon entry")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_flag("--zero-noise", synth.zero_noise, "No endpoint jitter and no via points");
  synth_cmd->add_flag("--no-via-noise", synth.no_via_noise, "No via points");
  synth_cmd->add_option("--points-per-unit", synth.points_per_unit, "Samples per unit of path length");
  synth_cmd->add_option("--endpoint-sigma", synth.endpoint_sigma, "Endpoint noise std in key widths");
  synth_cmd->add_option("--repeat-loop-radius", synth.repeat_loop_radius, "Loop radius for repeats in key widths");

  TrainPathArgs train_path;
  auto* path_cmd = app.add_subcommand("train-path", "Train the path decoder");
  path_cmd->add_option("--dataset", train_path.dataset, "Trace dataset")->required();
  path_cmd->add_option("--layout", train_path.layout, "Layout (default: the dataset's)");
  path_cmd->add_option("--task", train_path.task, "english_to_indic or indic_to_indic")->capture_default_str();
  path_cmd->add_option("--out", train_path.out, "Checkpoint file");
  path_cmd->add_option("--model-dir", train_path.model_dir, "Write path.json and update pipeline.json here");
  add_path_overrides(path_cmd, train_path.overrides);

  TrainTranslitArgs train_translit;
  auto* translit_cmd = app.add_subcommand("train-translit", "Train transliteration on path decoder outputs");
  translit_cmd->add_option("--dataset", train_translit.dataset, "Trace dataset with targets")->required();
  translit_cmd->add_option("--out", train_translit.out, "Checkpoint file");
  translit_cmd->add_option("--target-vocab", train_translit.vocab, "Extra target words for the output alphabet");
  translit_cmd->add_flag("--gold-only", train_translit.gold_only, "Train on traced words only, not decoder outputs");
  add_pipeline_flags(translit_cmd, train_translit.sources);
  add_translit_overrides(translit_cmd, train_translit.overrides);

  TrainCorrectArgs train_correct_args;
  auto* correct_cmd = app.add_subcommand("train-correct", "Train the spelling corrector");
  correct_cmd->add_option("--out", train_correct_args.out, "Checkpoint file");
  correct_cmd->add_option("--calibration-dataset", train_correct_args.dataset,
                          "Trace dataset whose validation split sets the OOV threshold");
  correct_cmd->add_option("--threshold-quantile", train_correct_args.threshold_quantile,
                          "Quantile of e* used as the OOV threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  add_pipeline_flags(correct_cmd, train_correct_args.sources);
  correct_cmd->get_option("--vocab")->required();
  add_correct_overrides(correct_cmd, train_correct_args.overrides);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained pipeline on the test split");
  eval_cmd->add_option("--dataset", eval.dataset, "Trace dataset")->required();
  eval_cmd->add_flag("--all-records", eval.all_records, "Evaluate every record instead of the test split");
  add_pipeline_flags(eval_cmd, eval.sources);

  EvalArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Accuracy by word length and by 3-gram angle");
  analyze_cmd->add_option("--dataset", analyze.dataset, "Trace dataset")->required();
  analyze_cmd->add_flag("--all-records", analyze.all_records, "Analyze every record instead of the test split");
  add_pipeline_flags(analyze_cmd, analyze.sources);

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate with components disabled");
  ablate_cmd->add_option("--dataset", ablate_args.dataset, "Trace dataset")->required();
  ablate_cmd->add_option("--vocab", ablate_args.vocab, "Correction vocabulary")->required();
  ablate_cmd->add_option("--task", ablate_args.task, "english_to_indic or indic_to_indic")->capture_default_str();
  ablate_cmd->add_option("--layout", ablate_args.layout, "Layout (default: the dataset's)");
  ablate_cmd->add_option("--ablation", ablate_args.ablations, "derivatives, attention, correction or dense");
  add_path_overrides(ablate_cmd, ablate_args.path);
  add_translit_overrides(ablate_cmd, ablate_args.translit);
  add_correct_overrides(ablate_cmd, ablate_args.correct);

  DecodeArgs decode;
  auto* decode_cmd = app.add_subcommand("decode", "Decode traces, one JSON line per trace");
  decode_cmd->add_option("--trace", decode.trace, "Trace records (JSON lines)")->required();
  add_pipeline_flags(decode_cmd, decode.sources);

  serve::ServiceOptions serve_opts;
  std::string serve_model_dir;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP decode service for the demo keyboard");
  serve_cmd->add_option("--model-dir", serve_model_dir, "Directory holding pipeline.json")
      ->envname("SWIPEFORGE_MODEL_DIR")
      ->required();
  serve_cmd->add_option("--port", serve_opts.port, "Listen port")->envname("SWIPEFORGE_PORT")->capture_default_str();
  serve_cmd->add_option("--host", serve_opts.host, "Listen address")->capture_default_str();
  serve_cmd->add_option("--cors-origin", serve_opts.cors_origin, "Allowed browser origin")->capture_default_str();
  serve_cmd->add_option("--time-budget-ms", serve_opts.time_budget_ms, "Decode time budget")->capture_default_str();
  serve_cmd->add_option("--static-dir", serve_opts.static_dir, "Serve the demo bundle from this directory");
  serve_cmd->add_option("--trace-log", serve_opts.trace_log, "Append decoded traces to this file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_line("usage", e.what()) << "\n";
    return kUsageExit;
  }

  try {
    if (*synth_cmd) run_synth(synth, seed, out);
    if (*path_cmd) run_train_path(train_path, seed, split_seed, out);
    if (*translit_cmd) run_train_translit(train_translit, seed, split_seed, out);
    if (*correct_cmd) run_train_correct(train_correct_args, seed, split_seed, out);
    if (*eval_cmd) out << to_json(run_evaluation(eval, split_seed).report) << "\n";
    if (*analyze_cmd) {
      const Pipeline p = load_from_flags(analyze.sources);
      const Evaluation e = run_evaluation(analyze, split_seed);
      out << to_json(error_analysis(e.predictions, *p.layout)) << "\n";
    }
    if (*ablate_cmd) run_ablate(ablate_args, seed, split_seed, out);
    if (*decode_cmd) run_decode(decode, out);
    if (*serve_cmd) {
      serve_opts.model_dir = serve_model_dir;
      return serve::run_server(serve_opts);
    }
  } catch (const UsageError& e) {
    err << error_line("usage", e.what()) << "\n";
    return kUsageExit;
  } catch (const Error& e) {
    err << error_line(to_string(e.code()), e.what()) << "\n";
    return kFailureExit;
  } catch (const std::exception& e) {
    err << error_line("internal", e.what()) << "\n";
    return kFailureExit;
  }
  return 0;
}

}  // namespace swipeforge::cli
