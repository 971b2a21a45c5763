// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "stgsnas/autodiff.hpp"

namespace stgsnas {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2, added to the gradient
};

/// Adam over a fixed list of parameters.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig config);

  /// One update using each parameter's current grad.
  void step(double lr);
  void zero_grad();

  std::size_t steps_taken() const noexcept { return t_; }
  const std::vector<Param*>& params() const noexcept { return params_; }

 private:
  std::vector<Param*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

/// Cosine annealing from lr_max at step 0 to lr_min at step total - 1.
double cosine_lr(double lr_max, double lr_min, std::size_t step, std::size_t total);

}  // namespace stgsnas
