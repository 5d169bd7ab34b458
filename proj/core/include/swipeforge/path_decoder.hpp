#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swipeforge/ctc.hpp"
#include "swipeforge/nn/checkpoint.hpp"
#include "swipeforge/nn/layers.hpp"
#include "swipeforge/synth.hpp"
#include "swipeforge/text.hpp"

namespace swipeforge {

struct PathDecoderConfig {
  nn::EncoderBlockConfig encoder;
  /// Bidirectional LSTM layers between the encoder block and the emission
  /// projection. 0 removes the stack (the Indic-to-Indic variant).
  int recurrent_layers = 2;
  Eigen::Index recurrent_hidden = 64;
  int head_layers = 2;
  Eigen::Index head_hidden = 64;
  bool use_derivatives = true;
  double lr = 0.001;
  double clip_norm = 5.0;
  int ctc_epochs = 10;
  int head_epochs = 5;
  std::uint64_t seed = 1;
};

/// Encoder (input projection + sinusoidal positions + encoder block +
/// optional BiLSTM stack + emission projection over |C| + blank) and the
/// character head (BiLSTM stack + projection over |C|) that relabels
/// contracted emission vectors.
class PathDecoderModel {
 public:
  PathDecoderModel(Alphabet alphabet, Eigen::Index feature_width, const PathDecoderConfig& config);
  PathDecoderModel(PathDecoderModel&&) = default;
  PathDecoderModel& operator=(PathDecoderModel&&) = default;
  PathDecoderModel(const PathDecoderModel&) = delete;
  PathDecoderModel& operator=(const PathDecoderModel&) = delete;

  const Alphabet& alphabet() const { return alphabet_; }
  const PathDecoderConfig& config() const { return config_; }
  Eigen::Index feature_width() const { return feature_width_; }
  Eigen::Index emission_width() const { return static_cast<Eigen::Index>(alphabet_.size()) + 1; }

  /// Column statistics used to standardize x, y, dx, dy before the input
  /// projection. Defaults to the identity.
  void set_input_statistics(const RowVector& mean, const RowVector& scale);
  const RowVector& input_mean() const { return input_mean_; }
  const RowVector& input_scale() const { return input_scale_; }

  /// T x (|C|+1) log-probabilities. Throws Error(kShapeMismatch) when the
  /// feature width differs from the model's. `rng` drives dropout and is
  /// only needed when `train` is set.
  nn::Tensor emission_log_probs(const FeatureSequence& features, bool train = false, Rng* rng = nullptr) const;
  EmissionSequence encode_path(const FeatureSequence& features) const;

  /// K x |C| logits for K contracted vectors.
  nn::Tensor head_logits(const ContractedSequence& contracted) const;
  std::u32string decode_characters(const ContractedSequence& contracted) const;

  nn::ParameterList encoder_parameters() const;
  nn::ParameterList head_parameters() const;
  nn::ParameterList parameters() const;

  nn::Checkpoint to_checkpoint() const;
  static PathDecoderModel from_checkpoint(const nn::Checkpoint& checkpoint);

  nn::Dense input;
  nn::EncoderBlock encoder;
  nn::BidirectionalStack stack;
  nn::Dense emission;
  nn::BidirectionalStack head_stack;
  nn::Dense head_output;

 private:
  Alphabet alphabet_;
  Eigen::Index feature_width_;
  PathDecoderConfig config_;
  RowVector input_mean_;
  RowVector input_scale_;
};

struct PathTrainingSample {
  FeatureSequence features;
  std::u32string word;
};

struct PathTrainingReport {
  std::vector<double> ctc_epoch_losses;
  std::vector<double> head_epoch_losses;
  std::size_t samples = 0;
  std::size_t ctc_skipped = 0;          // target longer than the trace allows
  std::size_t head_samples_used = 0;
  std::size_t head_samples_skipped = 0;  // contracted length != word length
};

std::string to_json(const PathTrainingReport& report);

/// Zeroes the dx and dy columns in place; the width is unchanged.
void zero_derivatives(FeatureSequence& features);

/// Mean and scale (std, or 1 for a constant column) of x, y, dx, dy over
/// every row of every sample.
void fit_input_statistics(std::span<const PathTrainingSample> samples, RowVector& mean, RowVector& scale);

/// Stage 1 trains the encoder on CTC loss. Stage 2 freezes it and trains the
/// head with per-position cross-entropy on samples whose contracted length
/// equals the word length. Throws Error(kEmptyInput) for an empty dataset or
/// when stage 2 has epochs but no usable sample.
PathDecoderModel train_path_decoder(std::span<const PathTrainingSample> samples, const Alphabet& alphabet,
                                    const PathDecoderConfig& config, PathTrainingReport* report = nullptr);

enum class DecodeMode { kWithHead, kArgmaxPassthrough };

/// encode_path, greedy_aggregate, then the head (or the run characters
/// directly). An empty feature sequence decodes to "".
std::u32string decode_word(const PathDecoderModel& model, const FeatureSequence& features,
                           DecodeMode mode = DecodeMode::kWithHead);

}  // namespace swipeforge
