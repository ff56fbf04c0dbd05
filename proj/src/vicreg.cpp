#include "hcd/vicreg.hpp"

#include <cmath>

#include "hcd/ops.hpp"

namespace hcd {

namespace {

void require_rows(const Tensor& z, std::size_t min_rows, const char* what) {
  if (z.dim() != 2) throw ShapeError(std::string(what) + ": expected [n,D], got " + shape_str(z.shape()));
  if (z.shape()[0] < min_rows) {
    throw ValueError(std::string(what) + ": needs n >= " + std::to_string(min_rows) + ", got " +
                     std::to_string(z.shape()[0]));
  }
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  // kaiming-uniform; a collapsed projector makes the invariance term vacuous
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> vals(shape_numel(shape));
  for (auto& v : vals) v = rng.uniform(-bound, bound);
  Tensor t(std::move(shape), std::move(vals));
  t.requires_grad_(true);
  return t;
}

}  // namespace

void VicregWeights::validate() const {
  if (lambda_sim < 0 || lambda_std < 0 || lambda_cov < 0) {
    throw ValueError("vicreg weights must be nonnegative");
  }
  if (!(gamma > 0)) throw ValueError("vicreg gamma must be positive");
}

ProjectorParams ProjectorParams::init(std::size_t in_dim, std::size_t width, Rng& rng) {
  ProjectorParams p;
  p.w1 = uniform_init({width, in_dim}, in_dim, rng);
  p.bn_gamma = Tensor::ones({width}).requires_grad_(true);
  p.bn_beta = Tensor::zeros({width}).requires_grad_(true);
  p.w2 = uniform_init({width, width}, width, rng);
  p.b2 = Tensor::zeros({width}).requires_grad_(true);
  return p;
}

std::vector<Tensor*> ProjectorParams::parameters() {
  return {&w1, &bn_gamma, &bn_beta, &w2, &b2};
}

Tensor project(const ProjectorParams& p, const Tensor& z) {
  if (z.dim() != 2 || z.shape()[0] < 2) {
    throw ValueError("project: needs a batch of at least 2 rows");
  }
  Tensor pre = ops::matmul(z, ops::transpose(p.w1));
  Tensor mu = ops::batch_mean(pre);
  Tensor var = ops::batch_var(pre);
  Tensor normed = ops::div(ops::sub(pre, mu), ops::sqrt(ops::add(var, p.bn_eps)));
  Tensor h = ops::relu(ops::add(ops::mul(normed, p.bn_gamma), p.bn_beta));
  return ops::add(ops::matmul(h, ops::transpose(p.w2)), p.b2);
}

Tensor invariance_loss(const Tensor& z, const Tensor& z_tilde) {
  if (z.shape() != z_tilde.shape()) {
    throw ShapeError("invariance_loss: shapes " + shape_str(z.shape()) + " and " +
                     shape_str(z_tilde.shape()) + " differ");
  }
  require_rows(z, 1, "invariance_loss");
  double n = static_cast<double>(z.shape()[0]);
  return ops::mul(ops::sum(ops::square(ops::sub(z, z_tilde))), 1.0 / n);
}

Tensor variance_loss(const Tensor& z, double gamma) {
  require_rows(z, 2, "variance_loss");
  Tensor std_dims = ops::sqrt(ops::add(ops::batch_var(z), 1e-4));
  return ops::mean(ops::relu(ops::sub(gamma, std_dims)));
}

Tensor covariance_loss(const Tensor& z) {
  require_rows(z, 2, "covariance_loss");
  std::size_t n = z.shape()[0], d = z.shape()[1];
  Tensor centered = ops::sub(z, ops::batch_mean(z));
  Tensor cov = ops::mul(ops::matmul(ops::transpose(centered), centered),
                        1.0 / static_cast<double>(n - 1));
  // zero the diagonal with a constant mask
  std::vector<double> m(d * d, 1.0);
  for (std::size_t i = 0; i < d; ++i) m[i * d + i] = 0.0;
  Tensor offdiag = ops::mul(cov, Tensor({d, d}, std::move(m)));
  return ops::mul(ops::frobenius_sq(offdiag), 1.0 / static_cast<double>(d));
}

VicregBreakdown vicreg_loss(const Tensor& z, const Tensor& z_tilde, const VicregWeights& w) {
  w.validate();
  VicregBreakdown out;
  Tensor sim = invariance_loss(z, z_tilde);
  Tensor std_avg = ops::mul(ops::add(variance_loss(z, w.gamma), variance_loss(z_tilde, w.gamma)),
                            0.5);
  Tensor cov_avg = ops::mul(ops::add(covariance_loss(z), covariance_loss(z_tilde)), 0.5);
  out.sim = sim.value();
  out.std_term = std_avg.value();
  out.cov_term = cov_avg.value();
  out.total = ops::add(ops::add(ops::mul(sim, w.lambda_sim), ops::mul(std_avg, w.lambda_std)),
                       ops::mul(cov_avg, w.lambda_cov));
  return out;
}

}  // namespace hcd
