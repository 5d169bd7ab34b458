#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "swipeforge/nn/checkpoint.hpp"
#include "swipeforge/nn/layers.hpp"
#include "swipeforge/random.hpp"
#include "swipeforge/text.hpp"

namespace swipeforge {

struct CorrectConfig {
  Eigen::Index char_embedding_dim = 32;
  /// Word encoding size E; the bidirectional contextualizer uses E/2 per
  /// direction.
  Eigen::Index encoding_dim = 64;
  Eigen::Index scorer_hidden = 64;
  /// Off: e = sqrt(sum(d)), the Euclidean distance between encodings.
  bool dense_scorer = true;
  double lr = 0.003;
  double clip_norm = 5.0;
  int epochs = 6;
  /// Negatives per update. Positive: the true word plus this many negatives
  /// (half the closest under the epoch snapshot, half uniform), all encoded
  /// with gradient. 0: softmax over the whole vocabulary, using the epoch
  /// snapshot for every word but the true one.
  int negatives = 32;
  /// Snapshot refresh period in updates; 0 means once per epoch.
  int refresh_interval = 0;
  std::uint64_t seed = 1;
};

struct WordEncoding {
  RowVector vector;
  std::size_t unknown_chars = 0;  // characters mapped to UNK
};

/// Character encoder (embedding + one bidirectional LSTM layer, summed over
/// positions and min-max normalized) followed by the E -> hidden -> 1 scorer.
class CorrectionModel {
 public:
  CorrectionModel(Alphabet alphabet, const CorrectConfig& config);
  CorrectionModel(CorrectionModel&&) = default;
  CorrectionModel& operator=(CorrectionModel&&) = default;
  CorrectionModel(const CorrectionModel&) = delete;
  CorrectionModel& operator=(const CorrectionModel&) = delete;

  const Alphabet& alphabet() const { return alphabet_; }
  const CorrectConfig& config() const { return config_; }
  Eigen::Index encoding_dim() const { return config_.encoding_dim; }
  int unk_index() const { return static_cast<int>(alphabet_.size()); }

  /// Differentiable 1 x E encoding. Throws Error(kEmptyInput) for "".
  nn::Tensor encode(std::u32string_view word, std::size_t* unknown_chars = nullptr) const;
  WordEncoding encode_word(std::u32string_view word) const;

  /// Scores each row of an N x E distance matrix (N x 1).
  nn::Tensor score_tensor(const nn::Tensor& distances) const;
  /// Throws Error(kShapeMismatch) unless d has E components.
  double score(const RowVector& d) const;

  nn::ParameterList parameters() const;
  nn::Checkpoint to_checkpoint() const;
  static CorrectionModel from_checkpoint(const nn::Checkpoint& checkpoint);

  double oov_threshold = std::numeric_limits<double>::infinity();

  nn::Embedding embedding;  // |A| + 1 rows; the last is UNK
  nn::Bidirectional contextualizer;
  nn::Dense scorer_hidden;
  nn::Dense scorer_output;

 private:
  Alphabet alphabet_;
  CorrectConfig config_;
};

/// Componentwise (a - b)^2.
RowVector distance_vector(const RowVector& a, const RowVector& b);

/// Ordered, duplicate-free word list with encodings from one model
/// snapshot. Rebuild it after the model's parameters change.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Throws Error(kInvalidArgument) on duplicates or empty words.
  Vocabulary(const CorrectionModel& model, std::vector<std::u32string> words);

  const std::vector<std::u32string>& words() const { return words_; }
  const Matrix& encodings() const { return encodings_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  std::optional<std::size_t> index_of(const std::u32string& word) const;

  /// A new vocabulary with `extra` appended; existing encodings are reused.
  Vocabulary augmented(const CorrectionModel& model, std::span<const std::u32string> extra) const;

 private:
  std::vector<std::u32string> words_;
  std::unordered_map<std::u32string, std::size_t> index_;
  Matrix encodings_;
};

struct Correction {
  std::u32string word;
  double score = 0.0;  // e of the chosen word (e* for the best)
  bool fallback = false;
};

/// e for every vocabulary word, in vocabulary order.
std::vector<double> score_vocabulary(const CorrectionModel& model, const Vocabulary& vocab, const RowVector& encoding);

/// Argmin of e over the vocabulary, ties to the earlier word. Falls back to
/// the input word when the vocabulary is empty or e* > oov_threshold.
Correction correct(const CorrectionModel& model, const Vocabulary& vocab, std::u32string_view word);

/// Up to k words in increasing e that pass the threshold. When even the
/// best fails, the input alone is returned with fallback set.
std::vector<Correction> correct_top_k(const CorrectionModel& model, const Vocabulary& vocab, std::u32string_view word,
                                      int k);

enum class EditOp { kSubstitute, kDelete, kInsert, kTranspose };

/// Applies one edit at `position`. `c` is used by substitute and insert;
/// transpose swaps position and position + 1. Throws Error(kOutOfBounds)
/// for an invalid position.
std::u32string apply_edit(std::u32string_view word, EditOp op, std::size_t position, char32_t c = 0);

struct CorruptionConfig {
  std::vector<EditOp> ops = {EditOp::kSubstitute};
  int variants_per_word = 4;
  int min_edits = 1;
  int max_edits = 1;
};

struct CorrectionPair {
  std::u32string corrupted;
  std::u32string truth;
};

/// Seeded corruptions of every word using characters from `alphabet`.
/// Variants equal to the original or to any vocabulary word are dropped.
/// Throws Error(kEmptyInput) for an empty vocabulary.
std::vector<CorrectionPair> generate_corruptions(std::span<const std::u32string> vocab, const Alphabet& alphabet,
                                                 const CorruptionConfig& config, Rng& rng);

struct CorrectTrainingReport {
  std::vector<double> epoch_losses;
  std::size_t pairs = 0;
};

std::string to_json(const CorrectTrainingReport& report);

/// Softmax over -e with cross-entropy against the true word, over sampled
/// negatives or the whole vocabulary (see CorrectConfig). Throws Error(kEmptyInput)
/// for no pairs and Error(kInvalidArgument) when a true word is missing
/// from `words`.
CorrectionModel train_correct(CorrectionModel model, std::span<const std::u32string> words,
                              std::span<const CorrectionPair> pairs, CorrectTrainingReport* report = nullptr);

/// Quantile (nearest rank) of e* over inputs whose gold word is in the
/// vocabulary.
double calibrate_threshold(const CorrectionModel& model, const Vocabulary& vocab,
                           std::span<const std::u32string> inputs, double quantile = 0.99);

}  // namespace swipeforge
