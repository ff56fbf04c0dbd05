#pragma once

#include <cstddef>
#include <vector>

#include "hcd/rng.hpp"
#include "hcd/tensor.hpp"

namespace hcd {

// Per-sample per-channel spatial statistics of a feature map.
struct StyleStats {
  Tensor mu;     // [n,C]
  Tensor sigma;  // [n,C], population std
};

struct Permutation {
  std::vector<std::size_t> indices;

  static Permutation identity(std::size_t n);
  // uniform over all n! permutations, Fisher-Yates on the given stream
  static Permutation sample(std::size_t n, Rng& rng);
  Permutation inverse() const;
  void validate() const;  // must be a bijection
};

struct StyleMixFlags {
  // statistics enter the backward pass as constants (MixStyle practice);
  // set false to differentiate through mu and sigma as well
  bool detach_stats = true;
};

// mu and sigma of each sample-channel plane; differentiable
StyleStats compute_stats(const Tensor& f);

// f_tilde_i = sigma_perm(i) * (f_i - mu_i) / (sigma_i + epsilon) + mu_perm(i)
Tensor stylemix(const Tensor& f, const Permutation& perm, double epsilon = 1e-6,
                const StyleMixFlags& flags = {});

// batch mean of || GM(f) - GM(f_tilde) ||_F^2 over per-sample Gram matrices
Tensor gram_loss(const Tensor& f, const Tensor& f_tilde);

}  // namespace hcd
