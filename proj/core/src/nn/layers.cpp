#include "swipeforge/nn/layers.hpp"

#include <cmath>

#include "swipeforge/error.hpp"

namespace swipeforge::nn {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

void append_parameters(ParameterList& out, const std::string& prefix, const ParameterList& params) {
  for (const auto& p : params) out.push_back({prefix + "." + p.name, p.tensor});
}

Dense::Dense(Eigen::Index in, Eigen::Index out, Rng& rng)
    : weight(Tensor::parameter(uniform_init(in, out, in, rng))), bias(Tensor::parameter(Matrix::Zero(1, out))) {}

Embedding::Embedding(Eigen::Index vocab, Eigen::Index dim, Rng& rng) {
  Matrix m(vocab, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 0.5 * rng.normal();
  table = Tensor::parameter(std::move(m));
}

RecurrentCell::RecurrentCell(CellKind kind, Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng) : kind_(kind) {
  const Eigen::Index g = kind == CellKind::kLstm ? 4 : 3;
  w_input = Tensor::parameter(uniform_init(input_dim, g * hidden_dim, hidden_dim, rng));
  w_hidden = Tensor::parameter(uniform_init(hidden_dim, g * hidden_dim, hidden_dim, rng));
  Matrix b = Matrix::Zero(1, g * hidden_dim);
  // Forget gates start open.
  if (kind == CellKind::kLstm) b.middleCols(hidden_dim, hidden_dim).setOnes();
  bias = Tensor::parameter(std::move(b));
}

RecurrentState RecurrentCell::zero_state() const {
  RecurrentState s;
  s.h = Tensor::constant(Matrix::Zero(1, hidden_dim()));
  if (kind_ == CellKind::kLstm) s.c = Tensor::constant(Matrix::Zero(1, hidden_dim()));
  return s;
}

RecurrentState RecurrentCell::step(const Tensor& x, const RecurrentState& state) const {
  if (x.rows() != 1 || x.cols() != input_dim()) {
    throw Error(ErrorCode::kShapeMismatch, "recurrent step input has the wrong width");
  }
  return step_projected(add(matmul(x, w_input), bias), state);
}

RecurrentState RecurrentCell::step_projected(const Tensor& projected, const RecurrentState& state) const {
  const Eigen::Index h = hidden_dim();
  if (state.h.cols() != h) throw Error(ErrorCode::kShapeMismatch, "recurrent state has the wrong width");
  if (kind_ == CellKind::kLstm) {
    const Tensor pre = add(projected, matmul(state.h, w_hidden));
    const Tensor in_gate = sigmoid(slice_cols(pre, 0, h));
    const Tensor forget = sigmoid(slice_cols(pre, h, h));
    const Tensor candidate = tanh(slice_cols(pre, 2 * h, h));
    const Tensor out_gate = sigmoid(slice_cols(pre, 3 * h, h));
    RecurrentState next;
    next.c = add(mul(forget, state.c), mul(in_gate, candidate));
    next.h = mul(out_gate, tanh(next.c));
    return next;
  }
  const Tensor hidden_proj = matmul(state.h, w_hidden);
  const Tensor update = sigmoid(add(slice_cols(projected, 0, h), slice_cols(hidden_proj, 0, h)));
  const Tensor reset = sigmoid(add(slice_cols(projected, h, h), slice_cols(hidden_proj, h, h)));
  const Tensor candidate = tanh(add(slice_cols(projected, 2 * h, h), mul(reset, slice_cols(hidden_proj, 2 * h, h))));
  // h' = (1 - z) * n + z * h
  RecurrentState next;
  next.h = add(mul(affine(update, -1.0, 1.0), candidate), mul(update, state.h));
  return next;
}

Tensor RecurrentCell::run(const Tensor& xs, bool reverse, RecurrentState* final_state) const {
  if (xs.cols() != input_dim()) throw Error(ErrorCode::kShapeMismatch, "recurrent input has the wrong width");
  const Eigen::Index steps = xs.rows();
  const Tensor projected = add(matmul(xs, w_input), bias);
  RecurrentState state = zero_state();
  std::vector<Tensor> outputs(static_cast<std::size_t>(steps));
  for (Eigen::Index i = 0; i < steps; ++i) {
    const Eigen::Index t = reverse ? steps - 1 - i : i;
    state = step_projected(slice_rows(projected, t, 1), state);
    outputs[static_cast<std::size_t>(t)] = state.h;
  }
  if (final_state != nullptr) *final_state = state;
  if (steps == 0) return Tensor::constant(Matrix::Zero(0, hidden_dim()));
  return concat_rows(outputs);
}

Bidirectional::Bidirectional(CellKind kind, Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng)
    : forward_cell(kind, input_dim, hidden_dim, rng), backward_cell(kind, input_dim, hidden_dim, rng) {}

Tensor Bidirectional::run(const Tensor& xs) const {
  if (xs.rows() == 0) return Tensor::constant(Matrix::Zero(0, output_dim()));
  return concat_cols({forward_cell.run(xs, false), backward_cell.run(xs, true)});
}

ParameterList Bidirectional::parameters() const {
  ParameterList out;
  append_parameters(out, "fwd", forward_cell.parameters());
  append_parameters(out, "bwd", backward_cell.parameters());
  return out;
}

BidirectionalStack::BidirectionalStack(CellKind kind, Eigen::Index input_dim, Eigen::Index hidden_dim, int layers_count,
                                       Rng& rng) {
  Eigen::Index in = input_dim;
  for (int i = 0; i < layers_count; ++i) {
    layers.emplace_back(kind, in, hidden_dim, rng);
    in = 2 * hidden_dim;
  }
}

Tensor BidirectionalStack::run(const Tensor& xs) const {
  Tensor h = xs;
  for (const auto& layer : layers) h = layer.run(h);
  return h;
}

ParameterList BidirectionalStack::parameters() const {
  ParameterList out;
  for (std::size_t i = 0; i < layers.size(); ++i) append_parameters(out, "layer" + std::to_string(i), layers[i].parameters());
  return out;
}

EncoderBlock::EncoderBlock(const EncoderBlockConfig& config, Rng& rng) : config_(config) {
  if (config.heads <= 0 || config.model_dim % config.heads != 0) {
    throw Error(ErrorCode::kInvalidArgument, "encoder model_dim must be divisible by the head count");
  }
  const Eigen::Index d = config.model_dim;
  query = Dense(d, d, rng);
  key = Dense(d, d, rng);
  value = Dense(d, d, rng);
  output = Dense(d, d, rng);
  ff_in = Dense(d, config.ff_dim, rng);
  ff_out = Dense(config.ff_dim, d, rng);
  norm1_gain = Tensor::parameter(Matrix::Ones(1, d));
  norm1_bias = Tensor::parameter(Matrix::Zero(1, d));
  norm2_gain = Tensor::parameter(Matrix::Ones(1, d));
  norm2_bias = Tensor::parameter(Matrix::Zero(1, d));
}

Tensor EncoderBlock::forward(const Tensor& seq, bool train, Rng* rng, std::vector<Matrix>* attention) const {
  if (seq.cols() != config_.model_dim) throw Error(ErrorCode::kShapeMismatch, "encoder input width != model_dim");
  if (train && rng == nullptr && config_.dropout_rate > 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "training-mode encoder needs a generator for dropout");
  }
  const Eigen::Index head_dim = config_.model_dim / config_.heads;
  const Tensor q = query.forward(seq);
  const Tensor k = key.forward(seq);
  const Tensor v = value.forward(seq);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> heads;
  if (attention != nullptr) attention->clear();
  for (int h = 0; h < config_.heads; ++h) {
    const Eigen::Index off = h * head_dim;
    const Tensor scores = affine(matmul(slice_cols(q, off, head_dim), transpose(slice_cols(k, off, head_dim))), scale);
    const Tensor weights = softmax_rows(scores);
    if (attention != nullptr) attention->push_back(weights.value());
    heads.push_back(matmul(weights, slice_cols(v, off, head_dim)));
  }
  Rng dummy(0);
  Rng& r = rng != nullptr ? *rng : dummy;
  const Tensor attended = dropout(output.forward(concat_cols(heads)), config_.dropout_rate, train, r);
  const Tensor h1 = layer_norm_rows(add(seq, attended), norm1_gain, norm1_bias);
  const Tensor ff = dropout(ff_out.forward(relu(ff_in.forward(h1))), config_.dropout_rate, train, r);
  return layer_norm_rows(add(h1, ff), norm2_gain, norm2_bias);
}

ParameterList EncoderBlock::parameters() const {
  ParameterList out;
  append_parameters(out, "query", query.parameters());
  append_parameters(out, "key", key.parameters());
  append_parameters(out, "value", value.parameters());
  append_parameters(out, "output", output.parameters());
  append_parameters(out, "ff_in", ff_in.parameters());
  append_parameters(out, "ff_out", ff_out.parameters());
  out.push_back({"norm1.gain", norm1_gain});
  out.push_back({"norm1.bias", norm1_bias});
  out.push_back({"norm2.gain", norm2_gain});
  out.push_back({"norm2.bias", norm2_bias});
  return out;
}

Matrix sinusoidal_positions(Eigen::Index length, Eigen::Index dim) {
  Matrix pe(length, dim);
  for (Eigen::Index t = 0; t < length; ++t) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(t, i) = (i % 2 == 0) ? std::sin(static_cast<double>(t) * rate) : std::cos(static_cast<double>(t) * rate);
    }
  }
  return pe;
}

}  // namespace swipeforge::nn
