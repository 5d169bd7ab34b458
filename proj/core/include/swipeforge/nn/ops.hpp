#pragma once

#include <initializer_list>
#include <span>
#include <vector>

#include "swipeforge/nn/tensor.hpp"
#include "swipeforge/random.hpp"

namespace swipeforge::nn {

// All ops throw Error(kShapeMismatch) on incompatible shapes.

Tensor matmul(const Tensor& a, const Tensor& b);
/// Elementwise a + b. `b` may also be a 1 x cols row (broadcast over rows)
/// or a 1x1 scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product of equal shapes.
Tensor mul(const Tensor& a, const Tensor& b);
/// scale * a + shift.
Tensor affine(const Tensor& a, double scale, double shift = 0.0);
Tensor transpose(const Tensor& a);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_rows(std::initializer_list<Tensor> parts);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);
/// Rows of `table` at `indices` (embedding lookup); gradients scatter-add.
Tensor gather_rows(const Tensor& table, std::span<const int> indices);
Tensor gather_cols(const Tensor& a, std::span<const int> indices);
/// out(:, j) = a(:, j - k) for j >= k, `fill` elsewhere.
Tensor shift_cols(const Tensor& a, Eigen::Index k, double fill);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
/// Natural log; zero maps to kLogZero (with zero gradient). Negative input
/// is an Error(kNonFinite).
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
/// Elementwise square root; the gradient at 0 is taken as 0.
Tensor sqrt(const Tensor& a);
/// Elementwise log(exp(a) + exp(b)).
Tensor log_add_exp(const Tensor& a, const Tensor& b);

/// Row-wise softmax, stabilized by subtracting the row max.
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

/// Inverted dropout: kept units are scaled by 1 / (1 - rate). Identity when
/// `train` is false or rate is 0.
Tensor dropout(const Tensor& a, double rate, bool train, Rng& rng);
/// Per-row normalization to zero mean / unit variance, then gain and bias
/// (each 1 x cols).
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Sum of all entries (1x1).
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Column sums (1 x cols).
Tensor sum_rows(const Tensor& a);
Tensor mean_rows(const Tensor& a);

/// Affine map of a 1 x n row onto [0, 1] by its min and max. A constant
/// row maps to zeros.
Tensor min_max_normalize(const Tensor& row);

/// Single entry as a 1x1 tensor.
Tensor pick(const Tensor& a, Eigen::Index r, Eigen::Index c);
/// -log softmax(logits)[target] for a 1 x V row of logits.
Tensor cross_entropy(const Tensor& logits, int target);

}  // namespace swipeforge::nn
