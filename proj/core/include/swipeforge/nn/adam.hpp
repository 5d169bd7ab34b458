#pragma once

#include <vector>

#include "swipeforge/nn/tensor.hpp"

namespace swipeforge::nn {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip applied before the update; 0 disables.
  double clip_norm = 0.0;
};

/// Bias-corrected Adam update of one parameter matrix. `step` is the
/// 1-based update count.
void adam_update(Matrix& param, const Matrix& grad, Matrix& first_moment, Matrix& second_moment, long step,
                 const AdamConfig& config);

/// Adam over a fixed parameter set. Reads the gradients accumulated on the
/// tensors, updates their values in place and clears the gradients.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  void step();
  void zero_grad();
  long step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Matrix>& first_moments() const { return first_; }
  const std::vector<Matrix>& second_moments() const { return second_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  long steps_ = 0;
};

}  // namespace swipeforge::nn
