#include "swipeforge/nn/tensor.hpp"

#include <atomic>

#include "swipeforge/error.hpp"

namespace swipeforge::nn {
namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_visit_epoch{0};

}  // namespace

namespace detail {

// Long recurrent chains would otherwise recurse once per node on
// destruction.
Node::~Node() {
  std::vector<std::shared_ptr<Node>> pending = std::move(parents);
  while (!pending.empty()) {
    std::shared_ptr<Node> n = std::move(pending.back());
    pending.pop_back();
    if (n && n.use_count() == 1) {
      for (auto& p : n->parents) pending.push_back(std::move(p));
      n->parents.clear();
    }
  }
}

}  // namespace detail

Tensor Tensor::constant(Matrix value) {
  if (!value.allFinite()) throw Error(ErrorCode::kNonFinite, "constant tensor holds non-finite values");
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = "constant";
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  Tensor t = constant(std::move(value));
  t.node_->requires_grad = true;
  t.node_->op = "parameter";
  return t;
}

Tensor Tensor::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Tensor Tensor::from_op(const char* op, Matrix value, std::vector<Tensor> parents, BackwardFn backward) {
  if (!value.allFinite()) throw Error(ErrorCode::kNonFinite, std::string("non-finite output from op '") + op + "'");
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = op;
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || p.node_->requires_grad;
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(std::move(p.node_));
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

Matrix Tensor::grad() const {
  if (has_grad()) return node_->grad;
  return Matrix::Zero(rows(), cols());
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw Error(ErrorCode::kShapeMismatch, "item() needs a 1x1 tensor");
  return node_->value(0, 0);
}

void Tensor::backward() const {
  if (rows() != 1 || cols() != 1) throw Error(ErrorCode::kShapeMismatch, "backward() needs a scalar root");
  if (!node_->requires_grad) return;
  const std::uint64_t mark = ++g_visit_epoch;
  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  node_->visit_mark = mark;
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && p->visit_mark != mark) {
        p->visit_mark = mark;
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node& n = **it;
    if (!n.backward || n.grad.size() == 0) continue;
    if (!n.grad.allFinite()) {
      throw Error(ErrorCode::kNonFinite, std::string("non-finite gradient at op '") + n.op + "'");
    }
    n.backward(n);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace swipeforge::nn
