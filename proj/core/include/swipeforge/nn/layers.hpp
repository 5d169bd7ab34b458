#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swipeforge/nn/ops.hpp"
#include "swipeforge/nn/tensor.hpp"
#include "swipeforge/random.hpp"

namespace swipeforge::nn {

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) matrix.
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

/// Appends `params` to `out` with `prefix` prepended to each name.
void append_parameters(ParameterList& out, const std::string& prefix, const ParameterList& params);

/// y = x W + b.
class Dense {
 public:
  Dense() = default;
  Dense(Eigen::Index in, Eigen::Index out, Rng& rng);

  Tensor forward(const Tensor& x) const { return add(matmul(x, weight), bias); }
  Eigen::Index in_dim() const { return weight.rows(); }
  Eigen::Index out_dim() const { return weight.cols(); }
  ParameterList parameters() const { return {{"weight", weight}, {"bias", bias}}; }

  Tensor weight;
  Tensor bias;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(Eigen::Index vocab, Eigen::Index dim, Rng& rng);

  Tensor forward(std::span<const int> ids) const { return gather_rows(table, ids); }
  Eigen::Index dim() const { return table.cols(); }
  ParameterList parameters() const { return {{"table", table}}; }

  Tensor table;
};

enum class CellKind { kLstm, kGru };

struct RecurrentState {
  Tensor h;
  Tensor c;  // LSTM only
};

/// Gated recurrent cell. Gate blocks in the fused weights are ordered
/// (input, forget, candidate, output) for LSTM and (update, reset,
/// candidate) for GRU.
class RecurrentCell {
 public:
  RecurrentCell() = default;
  RecurrentCell(CellKind kind, Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);

  CellKind kind() const { return kind_; }
  Eigen::Index input_dim() const { return w_input.rows(); }
  Eigen::Index hidden_dim() const { return w_hidden.rows(); }
  Eigen::Index gates() const { return kind_ == CellKind::kLstm ? 4 : 3; }

  RecurrentState zero_state() const;
  /// One step on a 1 x input_dim row. Returns the new state; the output is
  /// state.h.
  RecurrentState step(const Tensor& x, const RecurrentState& state) const;
  /// Step with the input projection x W_input + bias already applied.
  RecurrentState step_projected(const Tensor& projected, const RecurrentState& state) const;
  /// Runs over the rows of `xs` (T x input_dim) and returns T x hidden, row t
  /// aligned with input row t in either direction.
  Tensor run(const Tensor& xs, bool reverse, RecurrentState* final_state = nullptr) const;

  ParameterList parameters() const { return {{"w_input", w_input}, {"w_hidden", w_hidden}, {"bias", bias}}; }

  Tensor w_input;
  Tensor w_hidden;
  Tensor bias;

 private:
  CellKind kind_ = CellKind::kLstm;
};

/// Forward and reversed passes, outputs concatenated per step (2 x hidden).
class Bidirectional {
 public:
  Bidirectional() = default;
  Bidirectional(CellKind kind, Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);

  Tensor run(const Tensor& xs) const;
  Eigen::Index output_dim() const { return 2 * forward_cell.hidden_dim(); }
  ParameterList parameters() const;

  RecurrentCell forward_cell;
  RecurrentCell backward_cell;
};

/// Stack of bidirectional layers; layer i > 0 consumes 2 x hidden.
class BidirectionalStack {
 public:
  BidirectionalStack() = default;
  BidirectionalStack(CellKind kind, Eigen::Index input_dim, Eigen::Index hidden_dim, int layers, Rng& rng);

  Tensor run(const Tensor& xs) const;
  bool empty() const { return layers.empty(); }
  Eigen::Index output_dim() const { return layers.back().output_dim(); }
  ParameterList parameters() const;

  std::vector<Bidirectional> layers;
};

struct EncoderBlockConfig {
  int heads = 4;
  Eigen::Index model_dim = 64;
  Eigen::Index ff_dim = 128;
  double dropout_rate = 0.05;
};

/// Post-norm transformer encoder block: multi-head scaled dot-product self
/// attention and a ReLU feed-forward layer, each wrapped in residual + layer
/// norm. Holds no positional information, so it is permutation-equivariant.
class EncoderBlock {
 public:
  EncoderBlock() = default;
  /// Throws Error(kInvalidArgument) unless model_dim is divisible by heads.
  EncoderBlock(const EncoderBlockConfig& config, Rng& rng);

  const EncoderBlockConfig& config() const { return config_; }

  /// `seq` is T x model_dim. When `attention` is non-null it receives one
  /// T x T row-stochastic matrix per head. `rng` is only used when training.
  Tensor forward(const Tensor& seq, bool train, Rng* rng, std::vector<Matrix>* attention = nullptr) const;

  ParameterList parameters() const;

  Dense query;
  Dense key;
  Dense value;
  Dense output;
  Dense ff_in;
  Dense ff_out;
  Tensor norm1_gain;
  Tensor norm1_bias;
  Tensor norm2_gain;
  Tensor norm2_bias;

 private:
  EncoderBlockConfig config_;
};

/// Standard sinusoidal position table (T x dim).
Matrix sinusoidal_positions(Eigen::Index length, Eigen::Index dim);

}  // namespace swipeforge::nn
