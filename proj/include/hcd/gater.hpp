#pragma once

#include <functional>
#include <vector>

#include "hcd/rng.hpp"
#include "hcd/tensor.hpp"

namespace hcd {

// Batch-norm state for the gater bottleneck.
struct BatchNormState {
  Tensor gamma;  // learned scale [B]
  Tensor beta;   // learned shift [B]
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

struct GateParams {
  Tensor w1;  // [D/r, D], bias-free
  Tensor w2;  // [D, D/r], bias-free
  BatchNormState bn;
  std::size_t reduction = 16;
  double dropout_p = 0.2;

  // weights ~ uniform(+-1/sqrt(fan_in)); bn scale 1, shift 0, running stats
  // (0, 1) so initial masks sit near 0.5
  static GateParams init(std::size_t feature_dim, std::size_t reduction, double dropout_p,
                         Rng& rng);

  std::size_t feature_dim() const { return w2.shape()[0]; }
  std::size_t bottleneck_dim() const { return w1.shape()[0]; }
  std::vector<Tensor*> parameters() { return {&w1, &w2, &bn.gamma, &bn.beta}; }
};

enum class GateMode { train, eval };

struct GateFlags {
  // multiply the surviving channels by 1/(1-p) so the eval forward equals
  // the train-mode expectation; false reproduces the unscaled product
  bool inverted_dropout_scaling = true;
};

struct GateOutput {
  Tensor z_hat;
  Tensor mask;                 // entries strictly in (0,1)
  Tensor dropout_realization;  // binary, train mode only (undefined in eval)
  // bottleneck batch stats observed in train mode; committed to the running
  // buffers by commit_bn_update once the step is known to be finite
  std::vector<double> batch_mean;
  std::vector<double> batch_var;
  bool used_batch_stats = false;
};

// mask = sigmoid(W2 . relu(BN(W1 z))); z_hat = z (.) mask (.) dropout.
// Does not mutate params; call commit_bn_update to fold the batch stats
// into the running buffers.
GateOutput gate_forward(const Tensor& z, GateParams& params, GateMode mode, Rng& rng,
                        const GateFlags& flags = {});

// same forward but with a fixed dropout realization (style branch reuses the
// clean branch's draw)
GateOutput gate_forward_with_dropout(const Tensor& z, GateParams& params, GateMode mode,
                                     const Tensor& dropout_realization,
                                     const GateFlags& flags = {});

void commit_bn_update(GateParams& params, const GateOutput& out);

// global average pooling [n,C,H,W] -> [n,C]
Tensor pool(const Tensor& feature_map);

// Monte-Carlo estimate of the expected classification risk over fresh
// dropout draws; test instrumentation for the single-sample estimator.
double expected_risk_mc(const Tensor& z, GateParams& params, const std::vector<int>& labels,
                        const std::function<Tensor(const Tensor&)>& classifier,
                        std::size_t trials, Rng& rng, const GateFlags& flags = {});

}  // namespace hcd
