#include "swipeforge/translit.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "swipeforge/error.hpp"
#include "swipeforge/nn/adam.hpp"
#include "swipeforge/nn/ops.hpp"

namespace swipeforge {

TranslitModel::TranslitModel(Alphabet source, Alphabet target, const TranslitConfig& config)
    : source_(std::move(source)), target_(std::move(target)), config_(config) {
  if (source_.empty() || target_.empty()) throw Error(ErrorCode::kInvalidArgument, "translit alphabets must be non-empty");
  Rng rng(derive_seed(config_.seed, 1));
  const Eigen::Index e = config_.embedding_dim;
  const Eigen::Index h = config_.hidden_dim;
  const Eigen::Index a = config_.attention_dim;
  source_embedding = nn::Embedding(static_cast<Eigen::Index>(source_.size()), e, rng);
  target_embedding = nn::Embedding(static_cast<Eigen::Index>(target_.size()) + 2, e, rng);
  encoder = nn::RecurrentCell(nn::CellKind::kGru, e, h, rng);
  decoder = nn::RecurrentCell(nn::CellKind::kGru, e + h, h, rng);
  attention_keys = nn::Dense(h, a, rng);
  attention_query = nn::Dense(h, a, rng);
  attention_v = nn::Tensor::parameter(nn::uniform_init(a, 1, a, rng));
  output = nn::Dense(2 * h, static_cast<Eigen::Index>(target_.size()) + 1, rng);
}

SourceEncoding TranslitModel::encode_source(std::u32string_view source) const {
  if (source.empty()) throw Error(ErrorCode::kEmptyInput, "empty transliteration source");
  const std::vector<int> ids = source_.encode(source);
  SourceEncoding out;
  out.states = encoder.run(source_embedding.forward(ids), false, &out.final_state);
  if (config_.use_attention) out.keys = attention_keys.forward(out.states);
  return out;
}

DecoderStep TranslitModel::decode_step(const SourceEncoding& encoding, const nn::RecurrentState& state,
                                       int prev_token) const {
  if (prev_token < 0 || prev_token > start_token() || prev_token == end_token()) {
    throw Error(ErrorCode::kInvalidArgument, "previous token must be a target character or the start token");
  }
  if (state.h.cols() != config_.hidden_dim || encoding.states.cols() != config_.hidden_dim) {
    throw Error(ErrorCode::kShapeMismatch, "decoder state does not match the hidden size");
  }
  const Eigen::Index n = encoding.states.rows();
  DecoderStep out;
  nn::Tensor context;
  if (config_.use_attention) {
    const nn::Tensor energy =
        nn::matmul(nn::tanh(nn::add(encoding.keys, attention_query.forward(state.h))), attention_v);
    const nn::Tensor weights = nn::softmax_rows(nn::transpose(energy));
    context = nn::matmul(weights, encoding.states);
    out.attention = weights.value();
  } else {
    context = encoding.final_state.h;
    out.attention = Matrix::Zero(1, n);
    out.attention(0, n - 1) = 1.0;
  }
  const int prev[] = {prev_token};
  const nn::Tensor input = nn::concat_cols({target_embedding.forward(prev), context});
  out.state = decoder.step(input, state);
  out.log_probs = nn::log_softmax_rows(output.forward(nn::concat_cols({out.state.h, context})));
  return out;
}

nn::Tensor TranslitModel::sequence_loss(std::u32string_view source, std::u32string_view target) const {
  const SourceEncoding encoding = encode_source(source);
  const std::vector<int> ids = target_.encode(target);
  nn::RecurrentState state = initial_state(encoding);
  int prev = start_token();
  std::vector<nn::Tensor> terms;
  for (std::size_t t = 0; t <= ids.size(); ++t) {
    DecoderStep step = decode_step(encoding, state, prev);
    const int gold = t < ids.size() ? ids[t] : end_token();
    terms.push_back(nn::affine(nn::pick(step.log_probs, 0, gold), -1.0));
    state = step.state;
    prev = gold;
  }
  return nn::mean(nn::concat_rows(terms));
}

nn::ParameterList TranslitModel::parameters() const {
  nn::ParameterList out;
  nn::append_parameters(out, "source_embedding.", source_embedding.parameters());
  nn::append_parameters(out, "target_embedding.", target_embedding.parameters());
  nn::append_parameters(out, "encoder.", encoder.parameters());
  nn::append_parameters(out, "decoder.", decoder.parameters());
  nn::append_parameters(out, "attention.keys.", attention_keys.parameters());
  nn::append_parameters(out, "attention.query.", attention_query.parameters());
  out.push_back({"attention.v", attention_v});
  nn::append_parameters(out, "output.", output.parameters());
  return out;
}

nn::Checkpoint TranslitModel::to_checkpoint() const {
  nn::Checkpoint ck;
  ck.module_kind = "translit";
  auto& hp = ck.hyperparameters;
  hp["source_alphabet"] = u32_to_utf8(source_.symbols());
  hp["target_alphabet"] = u32_to_utf8(target_.symbols());
  hp["embedding_dim"] = static_cast<double>(config_.embedding_dim);
  hp["hidden_dim"] = static_cast<double>(config_.hidden_dim);
  hp["attention_dim"] = static_cast<double>(config_.attention_dim);
  hp["use_attention"] = config_.use_attention ? 1.0 : 0.0;
  hp["lr"] = config_.lr;
  hp["clip_norm"] = config_.clip_norm;
  hp["epochs"] = static_cast<double>(config_.epochs);
  hp["seed"] = static_cast<double>(config_.seed);
  ck.add_parameters(parameters());
  return ck;
}

TranslitModel TranslitModel::from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.module_kind != "translit") throw Error(ErrorCode::kConfigConflict, "checkpoint is not a transliteration model");
  TranslitConfig config;
  config.embedding_dim = static_cast<Eigen::Index>(ck.number("embedding_dim"));
  config.hidden_dim = static_cast<Eigen::Index>(ck.number("hidden_dim"));
  config.attention_dim = static_cast<Eigen::Index>(ck.number("attention_dim"));
  config.use_attention = ck.number("use_attention") != 0.0;
  config.lr = ck.number("lr");
  config.clip_norm = ck.number("clip_norm");
  config.epochs = static_cast<int>(ck.number("epochs"));
  config.seed = static_cast<std::uint64_t>(ck.number("seed"));
  TranslitModel model(Alphabet(utf8_to_u32(ck.text("source_alphabet"))),
                      Alphabet(utf8_to_u32(ck.text("target_alphabet"))), config);
  ck.restore_parameters(model.parameters());
  return model;
}

namespace {

struct Hypothesis {
  std::vector<int> tokens;  // includes the end marker once finished by it
  double log_prob = 0.0;
  nn::RecurrentState state;
  int last = 0;
  bool finished = false;
  bool truncated = false;
};

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

TranslitCandidate to_candidate(const TranslitModel& model, const Hypothesis& h) {
  TranslitCandidate c;
  for (int t : h.tokens) {
    if (t != model.end_token()) c.text.push_back(model.target_alphabet().symbol(static_cast<std::size_t>(t)));
  }
  c.log_prob = h.log_prob;
  c.truncated = h.truncated;
  return c;
}

}  // namespace

std::vector<TranslitCandidate> beam_search(const TranslitModel& model, std::u32string_view source, int k,
                                           int max_len) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "beam size must be at least 1");
  if (max_len <= 0) max_len = default_max_len(source.size());
  nn::NoGradGuard no_grad;
  const SourceEncoding encoding = model.encode_source(source);
  const auto width = static_cast<std::size_t>(k);

  std::vector<Hypothesis> beam(1);
  beam[0].state = model.initial_state(encoding);
  beam[0].last = model.start_token();
  std::vector<Hypothesis> finished;

  for (int length = 0; length < max_len && !beam.empty(); ++length) {
    std::vector<Hypothesis> expansions;
    for (const Hypothesis& h : beam) {
      const DecoderStep step = model.decode_step(encoding, h.state, h.last);
      const Matrix& lp = step.log_probs.value();
      for (int tok = 0; tok <= model.end_token(); ++tok) {
        Hypothesis next;
        next.tokens = h.tokens;
        next.tokens.push_back(tok);
        next.log_prob = h.log_prob + lp(0, tok);
        next.state = step.state;
        next.last = tok;
        next.finished = tok == model.end_token();
        if (!next.finished && length + 1 == max_len) {
          next.finished = true;
          next.truncated = true;
        }
        expansions.push_back(std::move(next));
      }
    }
    std::sort(expansions.begin(), expansions.end(), ranks_before);
    if (expansions.size() > width) expansions.resize(width);
    beam.clear();
    for (Hypothesis& h : expansions) {
      (h.finished ? finished : beam).push_back(std::move(h));
    }
    // Scores only fall as a hypothesis grows, so nothing active can overtake
    // a full set of finished ones.
    if (finished.size() >= width && !beam.empty()) {
      std::sort(finished.begin(), finished.end(), ranks_before);
      if (finished[width - 1].log_prob > beam.front().log_prob) break;
    }
  }
  std::sort(finished.begin(), finished.end(), ranks_before);
  if (finished.size() > width) finished.resize(width);
  std::vector<TranslitCandidate> out;
  for (const Hypothesis& h : finished) out.push_back(to_candidate(model, h));
  return out;
}

TranslitCandidate greedy_decode(const TranslitModel& model, std::u32string_view source, int max_len) {
  if (max_len <= 0) max_len = default_max_len(source.size());
  nn::NoGradGuard no_grad;
  const SourceEncoding encoding = model.encode_source(source);
  Hypothesis h;
  h.state = model.initial_state(encoding);
  h.last = model.start_token();
  for (int length = 0; length < max_len; ++length) {
    const DecoderStep step = model.decode_step(encoding, h.state, h.last);
    int best = 0;
    for (int tok = 1; tok <= model.end_token(); ++tok) {
      if (step.log_probs.value()(0, tok) > step.log_probs.value()(0, best)) best = tok;
    }
    h.tokens.push_back(best);
    h.log_prob += step.log_probs.value()(0, best);
    h.state = step.state;
    h.last = best;
    if (best == model.end_token()) return to_candidate(model, h);
  }
  h.truncated = true;
  return to_candidate(model, h);
}

Matrix attention_trace(const TranslitModel& model, std::u32string_view source, std::u32string_view output) {
  nn::NoGradGuard no_grad;
  const SourceEncoding encoding = model.encode_source(source);
  const std::vector<int> ids = model.target_alphabet().encode(output);
  Matrix out(static_cast<Eigen::Index>(ids.size()) + 1, static_cast<Eigen::Index>(source.size()));
  nn::RecurrentState state = model.initial_state(encoding);
  int prev = model.start_token();
  for (std::size_t t = 0; t <= ids.size(); ++t) {
    DecoderStep step = model.decode_step(encoding, state, prev);
    out.row(static_cast<Eigen::Index>(t)) = step.attention;
    state = step.state;
    if (t < ids.size()) prev = ids[t];
  }
  return out;
}

std::string to_json(const TranslitTrainingReport& report) {
  nlohmann::ordered_json doc;
  doc["pairs"] = report.pairs;
  doc["epoch_losses"] = report.epoch_losses;
  return doc.dump(2);
}

TranslitModel train_translit(std::span<const TranslitPair> pairs, const TranslitConfig& config,
                             TranslitTrainingReport* report) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "transliteration training set is empty");
  std::vector<std::u32string> sources;
  std::vector<std::u32string> targets;
  for (const auto& p : pairs) {
    sources.push_back(p.source);
    targets.push_back(p.target);
  }
  return train_translit(pairs, Alphabet::from_words(sources), Alphabet::from_words(targets), config, report);
}

TranslitModel train_translit(std::span<const TranslitPair> pairs, const Alphabet& source, const Alphabet& target,
                             const TranslitConfig& config, TranslitTrainingReport* report) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "transliteration training set is empty");
  for (const auto& p : pairs) {
    if (p.source.empty()) throw Error(ErrorCode::kEmptyInput, "transliteration pair with an empty source");
    source.encode(p.source);
    target.encode(p.target);
  }
  TranslitModel model(source, target, config);
  TranslitTrainingReport local;
  TranslitTrainingReport& rep = report != nullptr ? *report : local;
  rep = TranslitTrainingReport{};
  rep.pairs = pairs.size();

  std::vector<nn::Tensor> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  nn::AdamConfig adam_config;
  adam_config.lr = config.lr;
  adam_config.clip_norm = config.clip_norm;
  nn::Adam optimizer(std::move(params), adam_config);

  Rng order_rng(derive_seed(config.seed, 3));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t i : order) {
      nn::Tensor loss = model.sequence_loss(pairs[i].source, pairs[i].target);
      total += loss.item();
      loss.backward();
      optimizer.step();
    }
    rep.epoch_losses.push_back(total / static_cast<double>(pairs.size()));
  }
  return model;
}

}  // namespace swipeforge
