#include "swipeforge/nn/adam.hpp"

#include <cmath>

#include "swipeforge/error.hpp"

namespace swipeforge::nn {

void adam_update(Matrix& param, const Matrix& grad, Matrix& first_moment, Matrix& second_moment, long step,
                 const AdamConfig& config) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols() || first_moment.rows() != param.rows() ||
      first_moment.cols() != param.cols() || second_moment.rows() != param.rows() ||
      second_moment.cols() != param.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "adam_update: parameter, gradient and moment shapes differ");
  }
  first_moment = config.beta1 * first_moment + (1.0 - config.beta1) * grad;
  second_moment = config.beta2 * second_moment + (1.0 - config.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  param.array() -= config.lr * (first_moment.array() / c1) / ((second_moment.array() / c2).sqrt() + config.epsilon);
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    first_.push_back(Matrix::Zero(p.rows(), p.cols()));
    second_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  ++steps_;
  double scale = 1.0;
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_) {
      if (p.has_grad()) sq += p.node()->grad.squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const Matrix g = p.has_grad() ? Matrix(scale * p.node()->grad) : Matrix::Zero(p.rows(), p.cols());
    adam_update(p.mutable_value(), g, first_[i], second_[i], steps_, config_);
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace swipeforge::nn
