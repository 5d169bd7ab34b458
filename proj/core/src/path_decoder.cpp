#include "swipeforge/path_decoder.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "swipeforge/error.hpp"
#include "swipeforge/nn/adam.hpp"
#include "swipeforge/nn/ops.hpp"

namespace swipeforge {

namespace {

constexpr Eigen::Index kContinuousColumns = FeatureSequence::kOneHotOffset;

std::vector<nn::Tensor> tensors_of(const nn::ParameterList& params) {
  std::vector<nn::Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

PathDecoderModel::PathDecoderModel(Alphabet alphabet, Eigen::Index feature_width, const PathDecoderConfig& config)
    : alphabet_(std::move(alphabet)), feature_width_(feature_width), config_(config) {
  if (alphabet_.empty()) throw Error(ErrorCode::kInvalidArgument, "path decoder needs a non-empty alphabet");
  if (feature_width_ < kContinuousColumns) {
    throw Error(ErrorCode::kInvalidArgument, "feature width must cover x, y, dx, dy");
  }
  if (config_.recurrent_layers < 0 || config_.head_layers < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid recurrent layer counts");
  }
  Rng rng(derive_seed(config_.seed, 1));
  const Eigen::Index d = config_.encoder.model_dim;
  input = nn::Dense(feature_width_, d, rng);
  encoder = nn::EncoderBlock(config_.encoder, rng);
  Eigen::Index width = d;
  if (config_.recurrent_layers > 0) {
    stack = nn::BidirectionalStack(nn::CellKind::kLstm, d, config_.recurrent_hidden, config_.recurrent_layers, rng);
    width = stack.output_dim();
  }
  emission = nn::Dense(width, emission_width(), rng);
  head_stack = nn::BidirectionalStack(nn::CellKind::kLstm, emission_width(), config_.head_hidden, config_.head_layers, rng);
  head_output = nn::Dense(head_stack.output_dim(), static_cast<Eigen::Index>(alphabet_.size()), rng);
  input_mean_ = RowVector::Zero(kContinuousColumns);
  input_scale_ = RowVector::Ones(kContinuousColumns);
}

void PathDecoderModel::set_input_statistics(const RowVector& mean, const RowVector& scale) {
  if (mean.size() != kContinuousColumns || scale.size() != kContinuousColumns) {
    throw Error(ErrorCode::kShapeMismatch, "input statistics must have 4 columns");
  }
  if ((scale.array() <= 0.0).any() || !scale.allFinite() || !mean.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "input scale must be positive and finite");
  }
  input_mean_ = mean;
  input_scale_ = scale;
}

nn::Tensor PathDecoderModel::emission_log_probs(const FeatureSequence& features, bool train, Rng* rng) const {
  if (features.width() != feature_width_) {
    throw Error(ErrorCode::kShapeMismatch, "feature width " + std::to_string(features.width()) +
                                               " does not match the model's " + std::to_string(feature_width_));
  }
  if (features.length() == 0) throw Error(ErrorCode::kEmptyInput, "empty feature sequence");
  if (train && rng == nullptr) throw Error(ErrorCode::kInvalidArgument, "training forward pass needs an rng");
  Matrix x = features.rows;
  if (!config_.use_derivatives) x.middleCols(2, 2).setZero();
  for (Eigen::Index j = 0; j < kContinuousColumns; ++j) {
    x.col(j) = (x.col(j).array() - input_mean_(j)) / input_scale_(j);
  }
  nn::Tensor h = input.forward(nn::Tensor::constant(std::move(x)));
  h = nn::add(h, nn::Tensor::constant(nn::sinusoidal_positions(features.length(), config_.encoder.model_dim)));
  h = encoder.forward(h, train, rng);
  if (!stack.empty()) h = stack.run(h);
  return nn::log_softmax_rows(emission.forward(h));
}

EmissionSequence PathDecoderModel::encode_path(const FeatureSequence& features) const {
  nn::NoGradGuard no_grad;
  return {emission_log_probs(features).value().array().exp().matrix()};
}

nn::Tensor PathDecoderModel::head_logits(const ContractedSequence& contracted) const {
  if (contracted.vectors.cols() != emission_width()) {
    throw Error(ErrorCode::kShapeMismatch, "contracted vectors do not match the emission width");
  }
  return head_output.forward(head_stack.run(nn::Tensor::constant(contracted.vectors)));
}

std::u32string PathDecoderModel::decode_characters(const ContractedSequence& contracted) const {
  if (contracted.empty()) return {};
  nn::NoGradGuard no_grad;
  const Matrix logits = head_logits(contracted).value();
  std::u32string out;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    out.push_back(alphabet_.symbol(static_cast<std::size_t>(argmax_row(logits, r))));
  }
  return out;
}

nn::ParameterList PathDecoderModel::encoder_parameters() const {
  nn::ParameterList out;
  nn::append_parameters(out, "input.", input.parameters());
  nn::append_parameters(out, "encoder.", encoder.parameters());
  if (!stack.empty()) nn::append_parameters(out, "stack.", stack.parameters());
  nn::append_parameters(out, "emission.", emission.parameters());
  return out;
}

nn::ParameterList PathDecoderModel::head_parameters() const {
  nn::ParameterList out;
  nn::append_parameters(out, "head.stack.", head_stack.parameters());
  nn::append_parameters(out, "head.output.", head_output.parameters());
  return out;
}

nn::ParameterList PathDecoderModel::parameters() const {
  nn::ParameterList out = encoder_parameters();
  nn::append_parameters(out, "", head_parameters());
  return out;
}

nn::Checkpoint PathDecoderModel::to_checkpoint() const {
  nn::Checkpoint ck;
  ck.module_kind = "path_decoder";
  auto& hp = ck.hyperparameters;
  hp["alphabet"] = u32_to_utf8(alphabet_.symbols());
  hp["feature_width"] = static_cast<double>(feature_width_);
  hp["heads"] = static_cast<double>(config_.encoder.heads);
  hp["model_dim"] = static_cast<double>(config_.encoder.model_dim);
  hp["ff_dim"] = static_cast<double>(config_.encoder.ff_dim);
  hp["dropout_rate"] = config_.encoder.dropout_rate;
  hp["recurrent_layers"] = static_cast<double>(config_.recurrent_layers);
  hp["recurrent_hidden"] = static_cast<double>(config_.recurrent_hidden);
  hp["head_layers"] = static_cast<double>(config_.head_layers);
  hp["head_hidden"] = static_cast<double>(config_.head_hidden);
  hp["use_derivatives"] = config_.use_derivatives ? 1.0 : 0.0;
  hp["lr"] = config_.lr;
  hp["clip_norm"] = config_.clip_norm;
  hp["ctc_epochs"] = static_cast<double>(config_.ctc_epochs);
  hp["head_epochs"] = static_cast<double>(config_.head_epochs);
  hp["seed"] = static_cast<double>(config_.seed);
  ck.add_parameters(parameters());
  ck.parameters["input_stats.mean"] = input_mean_;
  ck.parameters["input_stats.scale"] = input_scale_;
  return ck;
}

PathDecoderModel PathDecoderModel::from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.module_kind != "path_decoder") throw Error(ErrorCode::kConfigConflict, "checkpoint is not a path decoder");
  PathDecoderConfig config;
  config.encoder.heads = static_cast<int>(ck.number("heads"));
  config.encoder.model_dim = static_cast<Eigen::Index>(ck.number("model_dim"));
  config.encoder.ff_dim = static_cast<Eigen::Index>(ck.number("ff_dim"));
  config.encoder.dropout_rate = ck.number("dropout_rate");
  config.recurrent_layers = static_cast<int>(ck.number("recurrent_layers"));
  config.recurrent_hidden = static_cast<Eigen::Index>(ck.number("recurrent_hidden"));
  config.head_layers = static_cast<int>(ck.number("head_layers"));
  config.head_hidden = static_cast<Eigen::Index>(ck.number("head_hidden"));
  config.use_derivatives = ck.number("use_derivatives") != 0.0;
  config.lr = ck.number("lr");
  config.clip_norm = ck.number("clip_norm");
  config.ctc_epochs = static_cast<int>(ck.number("ctc_epochs"));
  config.head_epochs = static_cast<int>(ck.number("head_epochs"));
  config.seed = static_cast<std::uint64_t>(ck.number("seed"));
  PathDecoderModel model(Alphabet(utf8_to_u32(ck.text("alphabet"))),
                         static_cast<Eigen::Index>(ck.number("feature_width")), config);
  ck.restore_parameters(model.parameters());
  model.set_input_statistics(ck.parameter("input_stats.mean", 1, kContinuousColumns),
                             ck.parameter("input_stats.scale", 1, kContinuousColumns));
  return model;
}

std::string to_json(const PathTrainingReport& report) {
  nlohmann::ordered_json doc;
  doc["samples"] = report.samples;
  doc["ctc_epoch_losses"] = report.ctc_epoch_losses;
  doc["ctc_skipped"] = report.ctc_skipped;
  doc["head_epoch_losses"] = report.head_epoch_losses;
  doc["head_samples_used"] = report.head_samples_used;
  doc["head_samples_skipped"] = report.head_samples_skipped;
  return doc.dump(2);
}

void zero_derivatives(FeatureSequence& features) {
  if (features.width() >= kContinuousColumns) features.rows.middleCols(2, 2).setZero();
}

void fit_input_statistics(std::span<const PathTrainingSample> samples, RowVector& mean, RowVector& scale) {
  mean = RowVector::Zero(kContinuousColumns);
  scale = RowVector::Ones(kContinuousColumns);
  double count = 0.0;
  for (const auto& s : samples) {
    mean += s.features.rows.leftCols(kContinuousColumns).colwise().sum();
    count += static_cast<double>(s.features.length());
  }
  if (count == 0.0) return;
  mean /= count;
  RowVector var = RowVector::Zero(kContinuousColumns);
  for (const auto& s : samples) {
    var += (s.features.rows.leftCols(kContinuousColumns).rowwise() - mean).array().square().matrix().colwise().sum();
  }
  var /= count;
  for (Eigen::Index j = 0; j < kContinuousColumns; ++j) {
    const double sd = std::sqrt(var(j));
    scale(j) = sd > 1e-12 ? sd : 1.0;
  }
}

PathDecoderModel train_path_decoder(std::span<const PathTrainingSample> samples, const Alphabet& alphabet,
                                    const PathDecoderConfig& config, PathTrainingReport* report) {
  if (samples.empty()) throw Error(ErrorCode::kEmptyInput, "path decoder training set is empty");
  PathDecoderModel model(alphabet, samples.front().features.width(), config);
  PathTrainingReport local;
  PathTrainingReport& rep = report != nullptr ? *report : local;
  rep = PathTrainingReport{};
  rep.samples = samples.size();

  std::vector<std::vector<int>> targets;
  targets.reserve(samples.size());
  for (const auto& s : samples) targets.push_back(alphabet.encode(s.word));

  if (config.ctc_epochs > 0) {
    RowVector mean;
    RowVector scale;
    if (config.use_derivatives) {
      fit_input_statistics(samples, mean, scale);
    } else {
      std::vector<PathTrainingSample> zeroed(samples.begin(), samples.end());
      for (auto& s : zeroed) zero_derivatives(s.features);
      fit_input_statistics(zeroed, mean, scale);
    }
    model.set_input_statistics(mean, scale);
  }

  Rng dropout_rng(derive_seed(config.seed, 2));
  Rng order_rng(derive_seed(config.seed, 3));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  nn::AdamConfig adam_config;
  adam_config.lr = config.lr;
  adam_config.clip_norm = config.clip_norm;

  std::vector<bool> feasible(samples.size(), true);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (ctc_min_frames(targets[i]) > samples[i].features.length() || targets[i].empty()) {
      feasible[i] = false;
      ++rep.ctc_skipped;
    }
  }

  {
    nn::Adam optimizer(tensors_of(model.encoder_parameters()), adam_config);
    for (int epoch = 0; epoch < config.ctc_epochs; ++epoch) {
      order_rng.shuffle(order);
      std::vector<double> losses;
      for (std::size_t i : order) {
        if (!feasible[i]) continue;
        nn::Tensor loss = ctc_log_loss(model.emission_log_probs(samples[i].features, true, &dropout_rng), targets[i]);
        losses.push_back(loss.item());
        loss.backward();
        optimizer.step();
      }
      rep.ctc_epoch_losses.push_back(mean_of(losses));
    }
  }

  if (config.head_epochs > 0) {
    std::vector<ContractedSequence> contracted;
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      ContractedSequence c = greedy_aggregate(model.encode_path(samples[i].features));
      if (c.size() == targets[i].size() && !c.empty()) {
        usable.push_back(contracted.size());
        contracted.push_back(std::move(c));
        ++rep.head_samples_used;
      } else {
        contracted.emplace_back();
        ++rep.head_samples_skipped;
      }
    }
    if (usable.empty()) {
      throw Error(ErrorCode::kEmptyInput, "no sample has a contracted length equal to its word length");
    }
    nn::Adam optimizer(tensors_of(model.head_parameters()), adam_config);
    for (int epoch = 0; epoch < config.head_epochs; ++epoch) {
      order_rng.shuffle(usable);
      std::vector<double> losses;
      for (std::size_t i : usable) {
        const nn::Tensor logits = model.head_logits(contracted[i]);
        std::vector<nn::Tensor> terms;
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
          terms.push_back(nn::cross_entropy(nn::slice_rows(logits, r, 1), targets[i][static_cast<std::size_t>(r)]));
        }
        nn::Tensor loss = nn::mean(nn::concat_rows(terms));
        losses.push_back(loss.item());
        loss.backward();
        optimizer.step();
      }
      rep.head_epoch_losses.push_back(mean_of(losses));
    }
  }
  return model;
}

std::u32string decode_word(const PathDecoderModel& model, const FeatureSequence& features, DecodeMode mode) {
  if (features.length() == 0) return {};
  const ContractedSequence contracted = greedy_aggregate(model.encode_path(features));
  if (mode == DecodeMode::kWithHead) return model.decode_characters(contracted);
  std::u32string out;
  for (int c : contracted.chars) out.push_back(model.alphabet().symbol(static_cast<std::size_t>(c)));
  return out;
}

}  // namespace swipeforge
