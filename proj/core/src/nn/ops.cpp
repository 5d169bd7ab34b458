#include "swipeforge/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "swipeforge/error.hpp"

namespace swipeforge::nn {
namespace {

using detail::Node;

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                                             std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                                             std::to_string(b.cols()));
}

enum class Broadcast { kNone, kRow, kScalar };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kNone;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  shape_error(op, a, b);
}

Matrix reduce_to(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::kNone: return g;
    case Broadcast::kRow: return g.colwise().sum();
    case Broadcast::kScalar: {
      Matrix s(1, 1);
      s(0, 0) = g.sum();
      return s;
    }
  }
  return g;
}

Tensor add_or_sub(const char* op, const Tensor& a, const Tensor& b, double sign) {
  const Broadcast kind = broadcast_kind(op, a, b);
  Matrix out = a.value();
  switch (kind) {
    case Broadcast::kNone: out += sign * b.value(); break;
    case Broadcast::kRow: out.rowwise() += sign * b.value().row(0); break;
    case Broadcast::kScalar: out.array() += sign * b.value()(0, 0); break;
  }
  return Tensor::from_op(op, std::move(out), {a, b}, [kind, sign](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad);
    if (parent(self, 1).requires_grad) parent(self, 1).accumulate(sign * reduce_to(self.grad, kind));
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  Matrix out = a.value().unaryExpr(fwd);
  return Tensor::from_op(op, std::move(out), {a}, [deriv](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Matrix local(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < local.size(); ++i) {
      local.data()[i] = deriv(p.value.data()[i], self.value.data()[i]);
    }
    p.accumulate(self.grad.cwiseProduct(local));
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix out = a.value() * b.value();
  return Tensor::from_op("matmul", std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * self.grad);
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return add_or_sub("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_or_sub("sub", a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a, b);
  Matrix out = a.value().cwiseProduct(b.value());
  return Tensor::from_op("mul", std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(self.grad.cwiseProduct(pa.value));
  });
}

Tensor affine(const Tensor& a, double scale, double shift) {
  Matrix out = (scale * a.value()).array() + shift;
  return Tensor::from_op("affine", std::move(out), {a}, [scale](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(scale * self.grad);
  });
}

Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return Tensor::from_op("transpose", std::move(out), {a}, [](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad.transpose());
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat_cols of nothing");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts.front(), p);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return Tensor::from_op("concat_cols", std::move(out), std::vector<Tensor>(parts.begin(), parts.end()), [](Node& self) {
    Eigen::Index offset = 0;
    for (auto& p : self.parents) {
      const Eigen::Index c = p->value.cols();
      if (p->requires_grad) p->accumulate(self.grad.middleCols(offset, c));
      offset += c;
    }
  });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) { return concat_cols(std::span<const Tensor>(parts.begin(), parts.size())); }

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat_rows of nothing");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts.front(), p);
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return Tensor::from_op("concat_rows", std::move(out), std::vector<Tensor>(parts.begin(), parts.end()), [](Node& self) {
    Eigen::Index offset = 0;
    for (auto& p : self.parents) {
      const Eigen::Index r = p->value.rows();
      if (p->requires_grad) p->accumulate(self.grad.middleRows(offset, r));
      offset += r;
    }
  });
}

Tensor concat_rows(std::initializer_list<Tensor> parts) { return concat_rows(std::span<const Tensor>(parts.begin(), parts.size())); }

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "slice_cols out of range");
  }
  Matrix out = a.value().middleCols(start, count);
  return Tensor::from_op("slice_cols", std::move(out), {a}, [start, count](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.grad.middleCols(start, count) += self.grad;
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "slice_rows out of range");
  }
  Matrix out = a.value().middleRows(start, count);
  return Tensor::from_op("slice_rows", std::move(out), {a}, [start, count](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.grad.middleRows(start, count) += self.grad;
  });
}

Tensor gather_rows(const Tensor& table, std::span<const int> indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= table.rows()) throw Error(ErrorCode::kShapeMismatch, "gather_rows index out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(indices[i]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return Tensor::from_op("gather_rows", std::move(out), {table}, [idx = std::move(idx)](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) p.grad.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Tensor gather_cols(const Tensor& a, std::span<const int> indices) {
  Matrix out(a.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] < 0 || indices[j] >= a.cols()) throw Error(ErrorCode::kShapeMismatch, "gather_cols index out of range");
    out.col(static_cast<Eigen::Index>(j)) = a.value().col(indices[j]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return Tensor::from_op("gather_cols", std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t j = 0; j < idx.size(); ++j) p.grad.col(idx[j]) += self.grad.col(static_cast<Eigen::Index>(j));
  });
}

Tensor shift_cols(const Tensor& a, Eigen::Index k, double fill) {
  if (k < 0) throw Error(ErrorCode::kInvalidArgument, "shift_cols needs k >= 0");
  const Eigen::Index n = a.cols();
  Matrix out = Matrix::Constant(a.rows(), n, fill);
  if (k < n) out.rightCols(n - k) = a.value().leftCols(n - k);
  return Tensor::from_op("shift_cols", std::move(out), {a}, [k, n](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad || k >= n) return;
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.grad.leftCols(n - k) += self.grad.rightCols(n - k);
  });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  if ((a.value().array() < 0.0).any()) throw Error(ErrorCode::kNonFinite, "log of a negative value");
  return unary(
      "log", a, [](double x) { return x > 0 ? std::max(std::log(x), kLogZero) : kLogZero; },
      [](double x, double y) { return (x > 0 && y > kLogZero) ? 1.0 / x : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  if ((a.value().array() < 0.0).any()) throw Error(ErrorCode::kNonFinite, "sqrt of a negative value");
  return unary("sqrt", a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor log_add_exp(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("log_add_exp", a, b);
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double x = a.value().data()[i];
    const double y = b.value().data()[i];
    const double m = std::max(x, y);
    out.data()[i] = m + std::log1p(std::exp(std::min(x, y) - m));
  }
  return Tensor::from_op("log_add_exp", std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      pa.accumulate(self.grad.cwiseProduct((pa.value - self.value).array().exp().matrix()));
    }
    if (pb.requires_grad) {
      pb.accumulate(self.grad.cwiseProduct((pb.value - self.value).array().exp().matrix()));
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    out.row(r).array() -= out.row(r).maxCoeff();
    out.row(r) = out.row(r).array().exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return Tensor::from_op("softmax_rows", std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    const Matrix& y = self.value;
    Matrix g = y.cwiseProduct(self.grad);
    const Eigen::VectorXd dots = g.rowwise().sum();
    g -= (y.array().colwise() * dots.array()).matrix();
    p.accumulate(g);
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    const double lse = m + std::log((out.row(r).array() - m).exp().sum());
    out.row(r).array() -= lse;
  }
  return Tensor::from_op("log_softmax_rows", std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    const Matrix probs = self.value.array().exp().matrix();
    const Eigen::VectorXd sums = self.grad.rowwise().sum();
    p.accumulate(self.grad - (probs.array().colwise() * sums.array()).matrix());
  });
}

Tensor dropout(const Tensor& a, double rate, bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw Error(ErrorCode::kInvalidArgument, "dropout rate must be in [0, 1)");
  if (!train || rate == 0.0) return a;
  Matrix mask(a.rows(), a.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() >= rate ? keep_scale : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return Tensor::from_op("dropout", std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad.cwiseProduct(mask));
  });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  const Eigen::Index n = a.cols();
  if (gain.rows() != 1 || gain.cols() != n) shape_error("layer_norm_rows", a, gain);
  if (bias.rows() != 1 || bias.cols() != n) shape_error("layer_norm_rows", a, bias);
  Matrix normalized(a.rows(), n);
  Eigen::VectorXd inv_std(a.rows());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double mu = a.value().row(r).mean();
    const double var = (a.value().row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normalized.row(r) = (a.value().row(r).array() - mu) * inv_std(r);
  }
  Matrix out = normalized.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return Tensor::from_op(
      "layer_norm_rows", std::move(out), {a, gain, bias},
      [normalized = std::move(normalized), inv_std = std::move(inv_std)](Node& self) {
        Node& px = parent(self, 0);
        Node& pg = parent(self, 1);
        Node& pb = parent(self, 2);
        if (pg.requires_grad) pg.accumulate(self.grad.cwiseProduct(normalized).colwise().sum());
        if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
        if (!px.requires_grad) return;
        const Matrix dxhat = self.grad.array().rowwise() * pg.value.row(0).array();
        Matrix dx(dxhat.rows(), dxhat.cols());
        for (Eigen::Index r = 0; r < dx.rows(); ++r) {
          const double mean_d = dxhat.row(r).mean();
          const double mean_dx = dxhat.row(r).cwiseProduct(normalized.row(r)).mean();
          dx.row(r) = inv_std(r) * (dxhat.row(r).array() - mean_d - normalized.row(r).array() * mean_dx);
        }
        px.accumulate(dx);
      });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return Tensor::from_op("sum", std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    if (p.requires_grad) p.accumulate(Matrix::Constant(p.value.rows(), p.value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) { return affine(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Tensor sum_rows(const Tensor& a) {
  Matrix out = a.value().colwise().sum();
  return Tensor::from_op("sum_rows", std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Matrix g(p.value.rows(), p.value.cols());
    g.rowwise() = self.grad.row(0);
    p.accumulate(g);
  });
}

Tensor mean_rows(const Tensor& a) { return affine(sum_rows(a), 1.0 / static_cast<double>(a.rows())); }

Tensor min_max_normalize(const Tensor& row) {
  if (row.rows() != 1 || row.cols() == 0) throw Error(ErrorCode::kShapeMismatch, "min_max_normalize needs a 1 x n row");
  Eigen::Index lo = 0;
  Eigen::Index hi = 0;
  const double mn = row.value().row(0).minCoeff(&lo);
  const double mx = row.value().row(0).maxCoeff(&hi);
  const double range = mx - mn;
  if (range == 0.0) {
    return Tensor::from_op("min_max_normalize", Matrix::Zero(1, row.cols()), {row}, [](Node&) {});
  }
  Matrix out = (row.value().array() - mn) / range;
  return Tensor::from_op("min_max_normalize", std::move(out), {row}, [lo, hi, range](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    const auto& dy = self.grad;
    const auto& y = self.value;
    Matrix g = dy / range;
    g(0, lo) += (dy.cwiseProduct(y).sum() - dy.sum()) / range;
    g(0, hi) -= dy.cwiseProduct(y).sum() / range;
    p.accumulate(g);
  });
}

Tensor pick(const Tensor& a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) throw Error(ErrorCode::kShapeMismatch, "pick out of range");
  Matrix out(1, 1);
  out(0, 0) = a.value()(r, c);
  return Tensor::from_op("pick", std::move(out), {a}, [r, c](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.grad(r, c) += self.grad(0, 0);
  });
}

Tensor cross_entropy(const Tensor& logits, int target) {
  if (logits.rows() != 1) throw Error(ErrorCode::kShapeMismatch, "cross_entropy needs a 1 x V row");
  return affine(pick(log_softmax_rows(logits), 0, target), -1.0);
}

}  // namespace swipeforge::nn
