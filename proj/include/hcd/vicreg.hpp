#pragma once

#include <vector>

#include "hcd/rng.hpp"
#include "hcd/tensor.hpp"

namespace hcd {

struct VicregWeights {
  double lambda_sim = 5.0;
  double lambda_std = 5.0;
  double lambda_cov = 1.0;
  double gamma = 0.25;  // variance floor, calibrated to the projector scale

  void validate() const;
};

// Two affine layers with ReLU between: D -> width -> width. The hidden
// layer is batch-normalized so the invariance pressure cannot be evaded by
// shrinking the projection; the wide eps bounds the 1/sigma backward
// amplification so that pressure stays commensurate with the task loss.
struct ProjectorParams {
  Tensor w1;                 // [width, D], bias-free (the BN shift covers it)
  Tensor bn_gamma, bn_beta;  // [width]
  Tensor w2, b2;             // [width, width], [width]
  double bn_eps = 1e-2;

  static ProjectorParams init(std::size_t in_dim, std::size_t width, Rng& rng);
  std::vector<Tensor*> parameters();
};

// batch-statistics forward; requires n >= 2
Tensor project(const ProjectorParams& p, const Tensor& z);

// batch mean of per-sample squared Euclidean distance
Tensor invariance_loss(const Tensor& z, const Tensor& z_tilde);

// hinge on per-dimension batch std, std = sqrt(var + 1e-4)
Tensor variance_loss(const Tensor& z, double gamma);

// mean squared off-diagonal covariance, divisor (n-1), normalized by D
Tensor covariance_loss(const Tensor& z);

struct VicregBreakdown {
  Tensor total;
  double sim = 0.0;
  double std_term = 0.0;  // averaged over both branches
  double cov_term = 0.0;  // averaged over both branches
};

// weighted sum; variance and covariance evaluated on both branches and
// averaged
VicregBreakdown vicreg_loss(const Tensor& z, const Tensor& z_tilde, const VicregWeights& w);

}  // namespace hcd
