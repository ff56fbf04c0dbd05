#pragma once

#include <vector>

#include "hcd/tensor.hpp"

namespace hcd {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::size_t step_count = 0;
  std::vector<std::vector<double>> m;  // first moments, one buffer per param
  std::vector<std::vector<double>> v;  // second moments

  static AdamState init(const std::vector<Tensor*>& params, const AdamConfig& cfg);
};

// standard bias-corrected update; params without a grad buffer are treated
// as zero-gradient
void adam_update(const std::vector<Tensor*>& params, AdamState& state);

double grad_global_norm(const std::vector<Tensor*>& params);
void clip_gradients(const std::vector<Tensor*>& params, double max_norm);
void zero_gradients(const std::vector<Tensor*>& params);
bool gradients_finite(const std::vector<Tensor*>& params);

}  // namespace hcd
