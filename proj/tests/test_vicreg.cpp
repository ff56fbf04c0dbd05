#include <doctest.h>

#include <cmath>

#include "hcd/grad_check.hpp"
#include "hcd/ops.hpp"
#include "hcd/vicreg.hpp"
#include "test_util.hpp"

using namespace hcd;
using testutil::gaussian_tensor;

TEST_CASE("invariance loss closed forms and oracle") {
  Rng rng(151);
  Tensor z = gaussian_tensor({4, 3}, rng);
  CHECK(invariance_loss(z, z).value() == 0.0);

  // unit displacement per sample -> 1
  std::vector<double> shifted(z.values());
  for (std::size_t i = 0; i < 4; ++i) shifted[i * 3] += 1.0;
  CHECK(invariance_loss(z, Tensor({4, 3}, shifted)).value() ==
        doctest::Approx(1.0).epsilon(1e-12));

  Tensor z2 = gaussian_tensor({4, 3}, rng);
  double expect = 0.0;
  for (std::size_t i = 0; i < z.numel(); ++i) {
    double d = z.at(i) - z2.at(i);
    expect += d * d;
  }
  expect /= 4.0;
  CHECK(invariance_loss(z, z2).value() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("variance loss hinge behavior") {
  // stds well above gamma: hinge inactive
  Tensor z({4, 2}, {10, -10, -10, 10, 10, 10, -10, -10});
  CHECK(variance_loss(z, 1.0).value() == 0.0);

  // collapsed batch: loss ~= gamma - sqrt(stabilizer)
  Tensor zc = Tensor::full({4, 3}, 0.7);
  CHECK(variance_loss(zc, 1.0).value() == doctest::Approx(1.0 - std::sqrt(1e-4)).epsilon(1e-12));

  CHECK_THROWS_AS(variance_loss(Tensor::ones({1, 3}), 1.0), ValueError);
}

TEST_CASE("variance loss matches per-dimension hinge oracle") {
  Rng rng(157);
  Tensor z = gaussian_tensor({8, 4}, rng, 0.0, 0.8);
  double gamma = 1.0;
  double expect = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < 8; ++i) mu += z(i, j);
    mu /= 8.0;
    double var = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      double d = z(i, j) - mu;
      var += d * d;
    }
    var /= 8.0;
    expect += std::max(0.0, gamma - std::sqrt(var + 1e-4));
  }
  expect /= 4.0;
  CHECK(variance_loss(z, gamma).value() == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("covariance loss closed forms") {
  // orthogonal centered design: off-diagonal covariance is exactly zero
  Tensor z({4, 3}, {1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1});
  CHECK(covariance_loss(z).value() == doctest::Approx(0.0).epsilon(1e-12));

  // duplicated column pair -> 2 var^2 / D
  Tensor dup({4, 2}, {1, 1, 2, 2, 3, 3, 4, 4});
  double var = (2.25 + 0.25 + 0.25 + 2.25) / 3.0;  // sample variance of {1,2,3,4}
  CHECK(covariance_loss(dup).value() == doctest::Approx(2.0 * var * var / 2.0).epsilon(1e-12));
}

TEST_CASE("covariance loss matches covariance-matrix oracle") {
  Rng rng(163);
  Tensor z = gaussian_tensor({8, 5}, rng);
  double mu[5] = {0};
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t i = 0; i < 8; ++i) mu[j] += z(i, j);
    mu[j] /= 8.0;
  }
  double expect = 0.0;
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < 5; ++b) {
      if (a == b) continue;
      double c = 0.0;
      for (std::size_t i = 0; i < 8; ++i) c += (z(i, a) - mu[a]) * (z(i, b) - mu[b]);
      c /= 7.0;
      expect += c * c;
    }
  expect /= 5.0;
  CHECK(covariance_loss(z).value() == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("vicreg_loss recombination") {
  Rng rng(167);
  Tensor z = gaussian_tensor({8, 6}, rng);
  Tensor zt = gaussian_tensor({8, 6}, rng);

  VicregWeights zero{0, 0, 0, 1.0};
  CHECK(vicreg_loss(z, zt, zero).total.value() == 0.0);

  VicregWeights simonly{1, 0, 0, 1.0};
  CHECK(vicreg_loss(z, z, simonly).total.value() == 0.0);

  VicregWeights w{25, 25, 1, 1.0};
  VicregBreakdown b = vicreg_loss(z, zt, w);
  double expect = 25.0 * invariance_loss(z, zt).value() +
                  25.0 * 0.5 * (variance_loss(z, 1.0).value() + variance_loss(zt, 1.0).value()) +
                  1.0 * 0.5 * (covariance_loss(z).value() + covariance_loss(zt).value());
  CHECK(b.total.value() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(b.total.value() >= 0.0);
}

TEST_CASE("vicreg terms are invariant to joint row permutation") {
  Rng rng(173);
  Tensor z = gaussian_tensor({6, 4}, rng);
  Tensor zt = gaussian_tensor({6, 4}, rng);
  std::vector<std::size_t> perm{4, 2, 0, 5, 1, 3};
  std::vector<double> pz(24), pzt(24);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      pz[i * 4 + j] = z(perm[i], j);
      pzt[i * 4 + j] = zt(perm[i], j);
    }
  VicregWeights w;
  VicregBreakdown a = vicreg_loss(z, zt, w);
  VicregBreakdown b = vicreg_loss(Tensor({6, 4}, pz), Tensor({6, 4}, pzt), w);
  CHECK(a.sim == doctest::Approx(b.sim).epsilon(1e-12));
  CHECK(a.std_term == doctest::Approx(b.std_term).epsilon(1e-12));
  CHECK(a.cov_term == doctest::Approx(b.cov_term).epsilon(1e-12));
}

TEST_CASE("covariance and variance are translation invariant") {
  Rng rng(179);
  Tensor z = gaussian_tensor({8, 4}, rng);
  std::vector<double> shifted(z.values());
  double offset[4] = {3.0, -1.5, 0.25, 10.0};
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 4; ++j) shifted[i * 4 + j] += offset[j];
  Tensor zs({8, 4}, shifted);
  CHECK(std::abs(covariance_loss(z).value() - covariance_loss(zs).value()) < 1e-10);
  CHECK(std::abs(variance_loss(z, 1.0).value() - variance_loss(zs, 1.0).value()) < 1e-10);
}

TEST_CASE("all three vicreg terms pass grad_check") {
  Rng rng(181);
  Tensor z = gaussian_tensor({8, 6}, rng);
  Tensor zt = gaussian_tensor({8, 6}, rng);

  CHECK(grad_check([&](const Tensor& x) { return invariance_loss(x, zt); }, z, 1e-5, 1e-4).passed);
  CHECK(grad_check([&](const Tensor& x) { return variance_loss(x, 1.0); }, z, 1e-5, 1e-4).passed);
  CHECK(grad_check([&](const Tensor& x) { return covariance_loss(x); }, z, 1e-5, 1e-4).passed);

  VicregWeights w;
  CHECK(grad_check([&](const Tensor& x) { return vicreg_loss(x, zt, w).total; }, z, 1e-5, 1e-4)
            .passed);
}

TEST_CASE("projector forward and gradient") {
  Rng rng(191);
  ProjectorParams p = ProjectorParams::init(4, 8, rng);
  Tensor z = gaussian_tensor({3, 4}, rng);
  Tensor out = project(p, z);
  CHECK(out.shape() == Shape{3, 8});

  auto f = [&](const Tensor& x) { return ops::sum(ops::square(project(p, x))); };
  CHECK(grad_check(f, z, 1e-5, 1e-4).passed);
}
