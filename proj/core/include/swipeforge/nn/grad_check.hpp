#pragma once

#include <functional>
#include <span>
#include <vector>

#include "swipeforge/nn/tensor.hpp"

namespace swipeforge::nn {

/// Compares reverse-mode gradients with central differences. The error for
/// one entry is |analytic - numeric| / max(|analytic|, |numeric|, 1e-6); the
/// maximum over all entries is returned. `fn` must return a 1x1 tensor.
/// Non-finite intermediates surface as Error(kNonFinite) from the ops.
double grad_check(const std::function<Tensor(std::span<const Tensor>)>& fn, const std::vector<Matrix>& inputs,
                  double step = 1e-5);

/// Same check against existing parameter tensors, perturbed in place and
/// restored afterwards.
double grad_check_parameters(const std::function<Tensor()>& loss, std::span<const Tensor> params, double step = 1e-5);

}  // namespace swipeforge::nn
