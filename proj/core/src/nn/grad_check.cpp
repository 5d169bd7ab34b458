#include "swipeforge/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace swipeforge::nn {
namespace {

constexpr double kErrorFloor = 1e-6;

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

double grad_check_parameters(const std::function<Tensor()>& loss, std::span<const Tensor> params, double step) {
  std::vector<Tensor> handles(params.begin(), params.end());
  for (auto& p : handles) p.zero_grad();
  loss().backward();
  std::vector<Matrix> analytic;
  analytic.reserve(handles.size());
  for (const auto& p : handles) analytic.push_back(p.grad());
  for (auto& p : handles) p.zero_grad();

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t i = 0; i < handles.size(); ++i) {
    Matrix& value = handles[i].mutable_value();
    for (Eigen::Index k = 0; k < value.size(); ++k) {
      const double saved = value.data()[k];
      value.data()[k] = saved + step;
      const double up = loss().item();
      value.data()[k] = saved - step;
      const double down = loss().item();
      value.data()[k] = saved;
      worst = std::max(worst, relative_error(analytic[i].data()[k], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

double grad_check(const std::function<Tensor(std::span<const Tensor>)>& fn, const std::vector<Matrix>& inputs,
                  double step) {
  std::vector<Tensor> tensors;
  tensors.reserve(inputs.size());
  for (const auto& m : inputs) tensors.push_back(Tensor::parameter(m));
  return grad_check_parameters([&] { return fn(tensors); }, tensors, step);
}

}  // namespace swipeforge::nn
