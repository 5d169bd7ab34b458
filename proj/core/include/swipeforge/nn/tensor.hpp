#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "swipeforge/matrix.hpp"

namespace swipeforge::nn {

/// Stand-in for log(0) in log-domain computations. Finite so that the
/// no-NaN/no-Inf invariant holds for every tensor.
inline constexpr double kLogZero = -1e30;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  std::uint64_t visit_mark = 0;

  Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;
  ~Node();

  template <typename Expr>
  void accumulate(const Expr& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

/// Handle to a node in a dynamically built computation graph. Copies share
/// the node. Leaves created with parameter() accumulate gradients across
/// backward() calls until zero_grad().
class Tensor {
 public:
  using BackwardFn = std::function<void(detail::Node&)>;

  Tensor() = default;

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor scalar(double v);

  /// Records an op result. Throws Error(kNonFinite) if `value` holds NaN or
  /// Inf. When gradient recording is off or no parent needs a gradient the
  /// result is a plain constant.
  static Tensor from_op(const char* op, Matrix value, std::vector<Tensor> parents, BackwardFn backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  /// In-place access for optimizers and finite-difference probes.
  Matrix& mutable_value() { return node_->value; }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  /// Accumulated gradient, or zeros of the value's shape.
  Matrix grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  std::vector<Eigen::Index> shape() const { return {rows(), cols()}; }
  double item() const;

  /// Reverse-mode sweep from this 1x1 tensor.
  void backward() const;

  detail::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

}  // namespace swipeforge::nn
