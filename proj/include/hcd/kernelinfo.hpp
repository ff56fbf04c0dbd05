#pragma once

#include <optional>
#include <vector>

#include "hcd/tensor.hpp"

namespace hcd {

// Batch of categorical ids (domain or class labels).
struct LabelVector {
  std::vector<int> ids;
  int cardinality = 0;

  LabelVector() = default;
  LabelVector(std::vector<int> ids_, int cardinality_);
  std::size_t size() const { return ids.size(); }
};

// Trace-normalized symmetric PSD similarity matrix over a batch.
struct KernelMatrix {
  Tensor values;  // [n,n], trace == 1 up to rounding
  std::size_t n() const { return values.shape()[0]; }
};

// Checks symmetry, trace normalization and finiteness. The PSD eigenvalue
// bound is by construction (Gaussian / delta kernels); the spectral check
// itself lives in the test oracle.
void validate_kernel(const KernelMatrix& k, double tol = 1e-12);

// Gaussian kernel exp(-||zi-zj||^2 / (2 sigma^2)), trace-normalized.
// No bandwidth -> median of pairwise distances, recomputed per batch, no
// gradient through the median; degenerate batches fall back to sigma = 1.
KernelMatrix rbf_kernel(const Tensor& z, std::optional<double> bandwidth = std::nullopt);

// Exact-match delta kernel for categorical labels, trace-normalized.
KernelMatrix label_kernel(const LabelVector& labels);

// median of the n(n-1)/2 pairwise Euclidean distances
double median_pairwise_distance(const Tensor& z);

// Renyi order-2 entropy -log2(tr(K^2)), via the Frobenius identity for
// symmetric K. Value lies in [0, log2 n].
Tensor matrix_entropy(const KernelMatrix& k);

// Hadamard product renormalized by its trace.
KernelMatrix joint_kernel(const KernelMatrix& a, const KernelMatrix& b);

// I(z_hat; d) = S(K_z) + S(K_d) - S(joint); gradient flows to z_hat only.
// The bandwidth argument fixes the RBF sigma (the training loop leaves it at
// the per-batch median; pass it explicitly under finite differencing, which
// otherwise sees the median recomputation the backward pass treats as
// constant).
Tensor mi_domain_loss(const Tensor& z_hat, const LabelVector& d,
                      std::optional<double> bandwidth = std::nullopt);

// -I(z_hat; y)
Tensor mi_class_loss(const Tensor& z_hat, const LabelVector& y,
                     std::optional<double> bandwidth = std::nullopt);

// mean over batch of ||m_i||_1 / C for nonnegative mask entries
Tensor sparse_loss(const Tensor& mask);

// Test-only fault injection for the self-test's mutation mode. `none` in
// production; never set outside selftest/tests.
enum class Mutation { none, mi_domain_grad_sign_flip };
void set_mutation(Mutation m);
Mutation current_mutation();

}  // namespace hcd
