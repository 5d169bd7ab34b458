#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swipeforge/nn/checkpoint.hpp"
#include "swipeforge/nn/layers.hpp"
#include "swipeforge/text.hpp"

namespace swipeforge {

struct TranslitConfig {
  Eigen::Index embedding_dim = 32;
  Eigen::Index hidden_dim = 64;
  Eigen::Index attention_dim = 64;
  /// Off: the context is the encoder's final state at every step.
  bool use_attention = true;
  double lr = 0.001;
  double clip_norm = 5.0;
  int epochs = 30;
  std::uint64_t seed = 1;
};

struct SourceEncoding {
  nn::Tensor states;       // n x hidden, one row per source character
  nn::Tensor keys;         // states projected into the attention space
  nn::RecurrentState final_state;
};

struct DecoderStep {
  nn::Tensor log_probs;    // 1 x (|T| + 1); the last column is the end marker
  nn::RecurrentState state;
  Matrix attention;        // 1 x n
};

/// GRU encoder over source characters and a GRU decoder fed with the
/// previous target character and an additive-attention context.
class TranslitModel {
 public:
  TranslitModel(Alphabet source, Alphabet target, const TranslitConfig& config);
  TranslitModel(TranslitModel&&) = default;
  TranslitModel& operator=(TranslitModel&&) = default;
  TranslitModel(const TranslitModel&) = delete;
  TranslitModel& operator=(const TranslitModel&) = delete;

  const Alphabet& source_alphabet() const { return source_; }
  const Alphabet& target_alphabet() const { return target_; }
  const TranslitConfig& config() const { return config_; }
  int end_token() const { return static_cast<int>(target_.size()); }
  int start_token() const { return static_cast<int>(target_.size()) + 1; }

  /// Throws Error(kUnknownChar) for a character outside the source alphabet
  /// and Error(kEmptyInput) for an empty source.
  SourceEncoding encode_source(std::u32string_view source) const;
  nn::RecurrentState initial_state(const SourceEncoding& encoding) const { return encoding.final_state; }
  /// `prev_token` is a target index or start_token().
  DecoderStep decode_step(const SourceEncoding& encoding, const nn::RecurrentState& state, int prev_token) const;

  /// Teacher-forced cross-entropy averaged over the target characters and
  /// the end marker.
  nn::Tensor sequence_loss(std::u32string_view source, std::u32string_view target) const;

  nn::ParameterList parameters() const;
  nn::Checkpoint to_checkpoint() const;
  static TranslitModel from_checkpoint(const nn::Checkpoint& checkpoint);

  nn::Embedding source_embedding;
  nn::Embedding target_embedding;  // |T| + 2 rows; the last is the start token
  nn::RecurrentCell encoder;
  nn::RecurrentCell decoder;
  nn::Dense attention_keys;
  nn::Dense attention_query;
  nn::Tensor attention_v;          // attention_dim x 1
  nn::Dense output;

 private:
  Alphabet source_;
  Alphabet target_;
  TranslitConfig config_;
};

struct TranslitCandidate {
  std::u32string text;
  double log_prob = 0.0;
  /// Stopped by max_len rather than by the end marker.
  bool truncated = false;
};

inline int default_max_len(std::size_t source_length) { return 3 * static_cast<int>(source_length) + 5; }

/// k-best beam search. Each step keeps the k best expansions (finished ones
/// included); a hypothesis reaching max_len finishes without an end marker.
/// Results are sorted by log_prob, ties broken by the token sequence in
/// lexicographic order with the end marker ranked after every character.
/// max_len <= 0 selects default_max_len.
std::vector<TranslitCandidate> beam_search(const TranslitModel& model, std::u32string_view source, int k,
                                           int max_len = 0);
/// Argmax at every step, ties to the lowest index.
TranslitCandidate greedy_decode(const TranslitModel& model, std::u32string_view source, int max_len = 0);

/// Teacher-forced attention weights, one row per output character plus the
/// end step (rows x source length).
Matrix attention_trace(const TranslitModel& model, std::u32string_view source, std::u32string_view output);

struct TranslitPair {
  std::u32string source;
  std::u32string target;
};

struct TranslitTrainingReport {
  std::vector<double> epoch_losses;
  std::size_t pairs = 0;
};

std::string to_json(const TranslitTrainingReport& report);

/// Alphabets are derived from the pairs.
TranslitModel train_translit(std::span<const TranslitPair> pairs, const TranslitConfig& config,
                             TranslitTrainingReport* report = nullptr);
/// Throws Error(kUnknownChar) when a pair leaves the given alphabets.
TranslitModel train_translit(std::span<const TranslitPair> pairs, const Alphabet& source, const Alphabet& target,
                             const TranslitConfig& config, TranslitTrainingReport* report = nullptr);

}  // namespace swipeforge
