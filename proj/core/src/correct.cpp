#include "swipeforge/correct.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "swipeforge/error.hpp"
#include "swipeforge/nn/adam.hpp"
#include "swipeforge/nn/ops.hpp"

namespace swipeforge {

CorrectionModel::CorrectionModel(Alphabet alphabet, const CorrectConfig& config)
    : alphabet_(std::move(alphabet)), config_(config) {
  if (config_.encoding_dim < 2 || config_.encoding_dim % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "encoding_dim must be even and at least 2");
  }
  Rng rng(derive_seed(config_.seed, 1));
  embedding = nn::Embedding(static_cast<Eigen::Index>(alphabet_.size()) + 1, config_.char_embedding_dim, rng);
  contextualizer = nn::Bidirectional(nn::CellKind::kLstm, config_.char_embedding_dim, config_.encoding_dim / 2, rng);
  scorer_hidden = nn::Dense(config_.encoding_dim, config_.scorer_hidden, rng);
  scorer_output = nn::Dense(config_.scorer_hidden, 1, rng);
}

nn::Tensor CorrectionModel::encode(std::u32string_view word, std::size_t* unknown_chars) const {
  if (word.empty()) throw Error(ErrorCode::kEmptyInput, "cannot encode an empty word");
  std::vector<int> ids;
  ids.reserve(word.size());
  std::size_t unknown = 0;
  for (char32_t c : word) {
    const auto i = alphabet_.find(c);
    if (i) {
      ids.push_back(*i);
    } else {
      ids.push_back(unk_index());
      ++unknown;
    }
  }
  if (unknown_chars != nullptr) *unknown_chars = unknown;
  return nn::min_max_normalize(nn::sum_rows(contextualizer.run(embedding.forward(ids))));
}

WordEncoding CorrectionModel::encode_word(std::u32string_view word) const {
  nn::NoGradGuard no_grad;
  WordEncoding out;
  out.vector = encode(word, &out.unknown_chars).value();
  return out;
}

nn::Tensor CorrectionModel::score_tensor(const nn::Tensor& distances) const {
  if (distances.cols() != config_.encoding_dim) {
    throw Error(ErrorCode::kShapeMismatch, "distance vectors must have encoding_dim components");
  }
  if (!config_.dense_scorer) {
    const nn::Tensor ones = nn::Tensor::constant(Matrix::Ones(distances.cols(), 1));
    return nn::sqrt(nn::matmul(distances, ones));
  }
  return scorer_output.forward(nn::relu(scorer_hidden.forward(distances)));
}

double CorrectionModel::score(const RowVector& d) const {
  if (d.size() != config_.encoding_dim) {
    throw Error(ErrorCode::kShapeMismatch, "distance vector must have encoding_dim components");
  }
  nn::NoGradGuard no_grad;
  return score_tensor(nn::Tensor::constant(Matrix(d))).item();
}

nn::ParameterList CorrectionModel::parameters() const {
  nn::ParameterList out;
  nn::append_parameters(out, "embedding.", embedding.parameters());
  nn::append_parameters(out, "contextualizer.", contextualizer.parameters());
  if (config_.dense_scorer) {
    nn::append_parameters(out, "scorer.hidden.", scorer_hidden.parameters());
    nn::append_parameters(out, "scorer.output.", scorer_output.parameters());
  }
  return out;
}

nn::Checkpoint CorrectionModel::to_checkpoint() const {
  nn::Checkpoint ck;
  ck.module_kind = "correct";
  auto& hp = ck.hyperparameters;
  hp["alphabet"] = u32_to_utf8(alphabet_.symbols());
  hp["char_embedding_dim"] = static_cast<double>(config_.char_embedding_dim);
  hp["encoding_dim"] = static_cast<double>(config_.encoding_dim);
  hp["scorer_hidden"] = static_cast<double>(config_.scorer_hidden);
  hp["dense_scorer"] = config_.dense_scorer ? 1.0 : 0.0;
  hp["lr"] = config_.lr;
  hp["clip_norm"] = config_.clip_norm;
  hp["epochs"] = static_cast<double>(config_.epochs);
  hp["negatives"] = static_cast<double>(config_.negatives);
  hp["refresh_interval"] = static_cast<double>(config_.refresh_interval);
  hp["seed"] = static_cast<double>(config_.seed);
  if (std::isfinite(oov_threshold)) {
    hp["oov_threshold"] = oov_threshold;
  } else {
    hp["oov_threshold"] = std::string(oov_threshold > 0 ? "inf" : "-inf");
  }
  ck.add_parameters(parameters());
  return ck;
}

CorrectionModel CorrectionModel::from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.module_kind != "correct") throw Error(ErrorCode::kConfigConflict, "checkpoint is not a correction model");
  CorrectConfig config;
  config.char_embedding_dim = static_cast<Eigen::Index>(ck.number("char_embedding_dim"));
  config.encoding_dim = static_cast<Eigen::Index>(ck.number("encoding_dim"));
  config.scorer_hidden = static_cast<Eigen::Index>(ck.number("scorer_hidden"));
  config.dense_scorer = ck.number("dense_scorer") != 0.0;
  config.lr = ck.number("lr");
  config.clip_norm = ck.number("clip_norm");
  config.epochs = static_cast<int>(ck.number("epochs"));
  config.negatives = static_cast<int>(ck.number("negatives"));
  config.refresh_interval = static_cast<int>(ck.number("refresh_interval"));
  config.seed = static_cast<std::uint64_t>(ck.number("seed"));
  CorrectionModel model(Alphabet(utf8_to_u32(ck.text("alphabet"))), config);
  ck.restore_parameters(model.parameters());
  const auto& t = ck.hyperparameters.at("oov_threshold");
  if (std::holds_alternative<double>(t)) {
    model.oov_threshold = std::get<double>(t);
  } else if (std::get<std::string>(t) == "inf") {
    model.oov_threshold = std::numeric_limits<double>::infinity();
  } else if (std::get<std::string>(t) == "-inf") {
    model.oov_threshold = -std::numeric_limits<double>::infinity();
  } else {
    throw Error(ErrorCode::kSchema, "invalid oov_threshold");
  }
  return model;
}

RowVector distance_vector(const RowVector& a, const RowVector& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShapeMismatch, "encodings differ in size");
  return (a - b).array().square().matrix();
}

Vocabulary::Vocabulary(const CorrectionModel& model, std::vector<std::u32string> words) {
  encodings_.resize(static_cast<Eigen::Index>(words.size()), model.encoding_dim());
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i].empty()) throw Error(ErrorCode::kInvalidArgument, "vocabulary contains an empty word");
    if (!index_.emplace(words[i], i).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate vocabulary word '" + u32_to_utf8(words[i]) + "'");
    }
    encodings_.row(static_cast<Eigen::Index>(i)) = model.encode_word(words[i]).vector;
  }
  words_ = std::move(words);
}

std::optional<std::size_t> Vocabulary::index_of(const std::u32string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary Vocabulary::augmented(const CorrectionModel& model, std::span<const std::u32string> extra) const {
  Vocabulary out;
  out.words_ = words_;
  out.index_ = index_;
  out.encodings_.resize(static_cast<Eigen::Index>(words_.size() + extra.size()), model.encoding_dim());
  if (!words_.empty()) out.encodings_.topRows(encodings_.rows()) = encodings_;
  for (const auto& w : extra) {
    if (w.empty()) throw Error(ErrorCode::kInvalidArgument, "vocabulary contains an empty word");
    if (!out.index_.emplace(w, out.words_.size()).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate vocabulary word '" + u32_to_utf8(w) + "'");
    }
    out.encodings_.row(static_cast<Eigen::Index>(out.words_.size())) = model.encode_word(w).vector;
    out.words_.push_back(w);
  }
  return out;
}

std::vector<double> score_vocabulary(const CorrectionModel& model, const Vocabulary& vocab, const RowVector& encoding) {
  std::vector<double> out;
  out.reserve(vocab.size());
  for (Eigen::Index i = 0; i < vocab.encodings().rows(); ++i) {
    out.push_back(model.score(distance_vector(encoding, vocab.encodings().row(i))));
  }
  return out;
}

namespace {

std::vector<std::size_t> ranked(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

// Half the closest words under the snapshot, the rest uniform, never the
// true word and without repeats.
std::vector<std::size_t> pick_negatives(const CorrectionModel& model, const Matrix& encodings, const Matrix& query,
                                        std::size_t truth, std::size_t count, Rng& rng) {
  const auto n = static_cast<std::size_t>(encodings.rows());
  count = std::min(count, n - 1);
  std::vector<double> scores(n);
  {
    nn::NoGradGuard no_grad;
    const Matrix d = (encodings.rowwise() - query.row(0)).array().square().matrix();
    const Matrix e = model.score_tensor(nn::Tensor::constant(d)).value();
    for (std::size_t j = 0; j < n; ++j) scores[j] = e(static_cast<Eigen::Index>(j), 0);
  }
  std::vector<bool> used(n, false);
  used[truth] = true;
  std::vector<std::size_t> out;
  for (std::size_t j : ranked(scores)) {
    if (out.size() >= (count + 1) / 2) break;
    if (!used[j]) {
      used[j] = true;
      out.push_back(j);
    }
  }
  while (out.size() < count) {
    const std::size_t j = rng.index(n);
    if (!used[j]) {
      used[j] = true;
      out.push_back(j);
    }
  }
  return out;
}

}  // namespace

Correction correct(const CorrectionModel& model, const Vocabulary& vocab, std::u32string_view word) {
  return correct_top_k(model, vocab, word, 1).front();
}

std::vector<Correction> correct_top_k(const CorrectionModel& model, const Vocabulary& vocab, std::u32string_view word,
                                      int k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  const std::u32string input(word);
  if (vocab.empty() || input.empty()) return {Correction{input, 0.0, true}};
  const std::vector<double> scores = score_vocabulary(model, vocab, model.encode_word(input).vector);
  const std::vector<std::size_t> order = ranked(scores);
  std::vector<Correction> out;
  for (std::size_t i : order) {
    if (out.size() == static_cast<std::size_t>(k) || !(scores[i] <= model.oov_threshold)) break;
    out.push_back(Correction{vocab.words()[i], scores[i], false});
  }
  if (out.empty()) out.push_back(Correction{input, scores[order.front()], true});
  return out;
}

std::u32string apply_edit(std::u32string_view word, EditOp op, std::size_t position, char32_t c) {
  std::u32string out(word);
  switch (op) {
    case EditOp::kSubstitute:
      if (position >= out.size()) break;
      out[position] = c;
      return out;
    case EditOp::kDelete:
      if (position >= out.size()) break;
      out.erase(position, 1);
      return out;
    case EditOp::kInsert:
      if (position > out.size()) break;
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(position), c);
      return out;
    case EditOp::kTranspose:
      if (position + 1 >= out.size()) break;
      std::swap(out[position], out[position + 1]);
      return out;
  }
  throw Error(ErrorCode::kOutOfBounds, "edit position outside the word");
}

std::vector<CorrectionPair> generate_corruptions(std::span<const std::u32string> vocab, const Alphabet& alphabet,
                                                 const CorruptionConfig& config, Rng& rng) {
  if (vocab.empty()) throw Error(ErrorCode::kEmptyInput, "cannot corrupt an empty vocabulary");
  if (config.ops.empty() || alphabet.size() < 2 || config.min_edits < 1 || config.max_edits < config.min_edits) {
    throw Error(ErrorCode::kInvalidArgument, "invalid corruption settings");
  }
  const std::unordered_set<std::u32string> known(vocab.begin(), vocab.end());
  std::vector<CorrectionPair> out;
  for (const auto& word : vocab) {
    for (int v = 0; v < config.variants_per_word; ++v) {
      const int edits = config.min_edits +
                        static_cast<int>(rng.index(static_cast<std::size_t>(config.max_edits - config.min_edits + 1)));
      std::u32string w = word;
      for (int e = 0; e < edits; ++e) {
        const EditOp op = config.ops[rng.index(config.ops.size())];
        if (op == EditOp::kSubstitute && !w.empty()) {
          const std::size_t pos = rng.index(w.size());
          // Draw from the other symbols so the character always changes.
          char32_t c = alphabet.symbol(rng.index(alphabet.size() - 1));
          if (c == w[pos]) c = alphabet.symbol(alphabet.size() - 1);
          w = apply_edit(w, op, pos, c);
        } else if (op == EditOp::kDelete && w.size() > 1) {
          w = apply_edit(w, op, rng.index(w.size()));
        } else if (op == EditOp::kInsert) {
          const std::size_t pos = rng.index(w.size() + 1);
          w = apply_edit(w, op, pos, alphabet.symbol(rng.index(alphabet.size())));
        } else if (op == EditOp::kTranspose && w.size() > 1) {
          w = apply_edit(w, op, rng.index(w.size() - 1));
        }
      }
      if (w.empty() || w == word || known.count(w) != 0) continue;
      out.push_back({w, word});
    }
  }
  return out;
}

std::string to_json(const CorrectTrainingReport& report) {
  nlohmann::ordered_json doc;
  doc["pairs"] = report.pairs;
  doc["epoch_losses"] = report.epoch_losses;
  return doc.dump(2);
}

CorrectionModel train_correct(CorrectionModel model, std::span<const std::u32string> words,
                              std::span<const CorrectionPair> pairs, CorrectTrainingReport* report) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "correction training set is empty");
  std::unordered_map<std::u32string, std::size_t> index;
  for (std::size_t i = 0; i < words.size(); ++i) index.emplace(words[i], i);
  std::vector<std::size_t> truth;
  truth.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto it = index.find(p.truth);
    if (it == index.end()) {
      throw Error(ErrorCode::kInvalidArgument, "true word '" + u32_to_utf8(p.truth) + "' is not in the vocabulary");
    }
    truth.push_back(it->second);
  }
  const CorrectConfig& config = model.config();
  CorrectTrainingReport local;
  CorrectTrainingReport& rep = report != nullptr ? *report : local;
  rep = CorrectTrainingReport{};
  rep.pairs = pairs.size();

  std::vector<nn::Tensor> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  nn::AdamConfig adam_config;
  adam_config.lr = config.lr;
  adam_config.clip_norm = config.clip_norm;
  nn::Adam optimizer(std::move(params), adam_config);

  const auto snapshot = [&] {
    nn::NoGradGuard no_grad;
    Matrix m(static_cast<Eigen::Index>(words.size()), model.encoding_dim());
    for (std::size_t i = 0; i < words.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) = model.encode(words[i]).value();
    }
    return m;
  };

  Rng order_rng(derive_seed(config.seed, 3));
  Rng negative_rng(derive_seed(config.seed, 4));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto n = static_cast<Eigen::Index>(words.size());
  const auto sampled = static_cast<std::size_t>(std::max(0, config.negatives));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    Matrix encodings = snapshot();
    double total = 0.0;
    long updates = 0;
    for (std::size_t i : order) {
      if (config.refresh_interval > 0 && updates > 0 && updates % config.refresh_interval == 0) encodings = snapshot();
      const nn::Tensor h = model.encode(pairs[i].corrupted);
      std::vector<nn::Tensor> rows;
      int target = 0;
      if (sampled > 0) {
        std::vector<std::size_t> chosen = pick_negatives(model, encodings, h.value(), truth[i], sampled, negative_rng);
        rows.push_back(model.encode(words[truth[i]]));
        for (std::size_t j : chosen) rows.push_back(model.encode(words[j]));
      } else {
        const auto t = static_cast<Eigen::Index>(truth[i]);
        if (t > 0) rows.push_back(nn::Tensor::constant(encodings.topRows(t)));
        rows.push_back(model.encode(words[truth[i]]));
        if (t + 1 < n) rows.push_back(nn::Tensor::constant(encodings.bottomRows(n - t - 1)));
        target = static_cast<int>(t);
      }
      const nn::Tensor distances = nn::square(nn::sub(nn::concat_rows(rows), h));
      const nn::Tensor logits = nn::affine(nn::transpose(model.score_tensor(distances)), -1.0);
      nn::Tensor loss = nn::cross_entropy(logits, target);
      total += loss.item();
      loss.backward();
      optimizer.step();
      ++updates;
    }
    rep.epoch_losses.push_back(total / static_cast<double>(pairs.size()));
  }
  return model;
}

double calibrate_threshold(const CorrectionModel& model, const Vocabulary& vocab,
                           std::span<const std::u32string> inputs, double quantile) {
  if (inputs.empty() || vocab.empty()) throw Error(ErrorCode::kEmptyInput, "threshold calibration needs inputs");
  if (!(quantile > 0.0 && quantile <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "quantile must be in (0, 1]");
  std::vector<double> best;
  best.reserve(inputs.size());
  for (const auto& w : inputs) {
    const auto scores = score_vocabulary(model, vocab, model.encode_word(w).vector);
    best.push_back(*std::min_element(scores.begin(), scores.end()));
  }
  std::sort(best.begin(), best.end());
  const auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(best.size())));
  return best[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace swipeforge
