#include "hcd/styleaug.hpp"

#include "hcd/ops.hpp"

namespace hcd {

Permutation Permutation::identity(std::size_t n) {
  Permutation p;
  p.indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.indices[i] = i;
  return p;
}

Permutation Permutation::sample(std::size_t n, Rng& rng) {
  Permutation p = identity(n);
  rng.shuffle(p.indices);
  return p;
}

Permutation Permutation::inverse() const {
  validate();
  Permutation inv;
  inv.indices.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) inv.indices[indices[i]] = i;
  return inv;
}

void Permutation::validate() const {
  std::vector<bool> seen(indices.size(), false);
  for (std::size_t v : indices) {
    if (v >= indices.size() || seen[v]) throw ValueError("permutation is not a bijection");
    seen[v] = true;
  }
}

StyleStats compute_stats(const Tensor& f) {
  Tensor mu = ops::spatial_mean(f);
  Tensor sigma = ops::sqrt(ops::spatial_var(f));
  return StyleStats{mu, sigma};
}

Tensor stylemix(const Tensor& f, const Permutation& perm, double epsilon,
                const StyleMixFlags& flags) {
  if (f.dim() != 4) throw ShapeError("stylemix: expected [n,C,H,W], got " + shape_str(f.shape()));
  if (perm.indices.size() != f.shape()[0]) {
    throw ShapeError("stylemix: permutation size " + std::to_string(perm.indices.size()) +
                     " does not match batch " + std::to_string(f.shape()[0]));
  }
  if (!(epsilon > 0.0)) throw ValueError("stylemix: epsilon must be positive");
  perm.validate();

  StyleStats stats = compute_stats(f);
  Tensor mu = flags.detach_stats ? stats.mu.detach() : stats.mu;
  Tensor sigma = flags.detach_stats ? stats.sigma.detach() : stats.sigma;

  Tensor mu_donor = ops::gather_rows(mu, perm.indices);
  Tensor sigma_donor = ops::gather_rows(sigma, perm.indices);
  Tensor scale = ops::div(sigma_donor, ops::add(sigma, epsilon));
  return ops::channel_affine(f, mu, scale, mu_donor);
}

Tensor gram_loss(const Tensor& f, const Tensor& f_tilde) {
  if (f.shape() != f_tilde.shape()) {
    throw ShapeError("gram_loss: shapes " + shape_str(f.shape()) + " and " +
                     shape_str(f_tilde.shape()) + " differ");
  }
  Tensor diff = ops::sub(ops::gram(f), ops::gram(f_tilde));
  double n = static_cast<double>(f.shape()[0]);
  return ops::mul(ops::sum(ops::square(diff)), 1.0 / n);
}

}  // namespace hcd
