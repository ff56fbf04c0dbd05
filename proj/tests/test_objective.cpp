#include <doctest.h>

#include <cmath>

#include "hcd/objective.hpp"
#include "hcd/ops.hpp"
#include "hcd/rng.hpp"
#include "test_util.hpp"

using namespace hcd;

TEST_CASE("default schedule reproduces the published values") {
  CurriculumSchedule s = CurriculumSchedule::defaults(20);
  CHECK(s.weight_at("domain_mi", 0) == 0.5);
  CHECK(s.weight_at("domain_mi", 1) == 5.0);
  CHECK(s.weight_at("domain_mi", 3) == 5.0);
  CHECK(s.weight_at("sparsity", 0) == 0.005);
  CHECK(s.weight_at("sparsity", 1) == 0.005);
  CHECK(s.weight_at("sparsity", 2) == 0.005);  // ramp starts here
  CHECK(s.weight_at("sparsity", 19) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.weight_at("vic", 7) == 1.0);
  CHECK(s.weight_at("gram", 7) == 1.0);
  CHECK(s.weight_at("class_mi", 7) == 1.0);
}

TEST_CASE("schedule is nondecreasing and in range") {
  CurriculumSchedule s = CurriculumSchedule::defaults(20);
  for (const char* term : {"vic", "gram", "class_mi", "domain_mi", "sparsity"}) {
    double prev = -1.0;
    for (std::size_t t = 0; t < 20; ++t) {
      double w = s.weight_at(term, t);
      CHECK(w >= 0.0);
      CHECK(w >= prev);
      prev = w;
    }
  }
  CHECK_THROWS_AS(s.weight_at("domain_mi", 20), ValueError);
  CHECK_THROWS_AS(s.weight_at("nonsense", 0), ValueError);
}

TEST_CASE("penalty weights start at their minima") {
  CurriculumSchedule s = CurriculumSchedule::defaults(20);
  auto w0 = s.at(0);
  CHECK(w0.domain_mi == 0.5);
  CHECK(w0.sparsity == 0.005);
  for (std::size_t t = 1; t < 20; ++t) {
    CHECK(s.at(t).domain_mi >= w0.domain_mi);
    CHECK(s.at(t).sparsity >= w0.sparsity);
  }
}

TEST_CASE("degenerate ramp hits the target when activation is at the end") {
  TermSchedule late{0.1, 0.9, 19, RampShape::linear};
  CHECK(evaluate_term(late, 18, 20) == 0.1);
  CHECK(evaluate_term(late, 19, 20) == 0.9);
}

TEST_CASE("schedule validation rejects decreasing terms") {
  CurriculumSchedule s = CurriculumSchedule::defaults(10);
  s.domain_mi.target = 0.1;  // below initial 0.5
  CHECK_THROWS_AS(s.validate(), ValueError);
}

TEST_CASE("total loss degenerate and arithmetic forms") {
  CurriculumSchedule::Weights zero{};
  Tensor cls = Tensor::scalar(1.25);
  LossBundle b = total_loss(cls, Tensor::scalar(9), Tensor::scalar(9), Tensor::scalar(9),
                            Tensor::scalar(9), Tensor::scalar(9), zero);
  CHECK(b.total.value() == 1.25);

  CurriculumSchedule::Weights ones{1, 1, 1, 1, 1};
  LossBundle u = total_loss(Tensor::scalar(1), Tensor::scalar(1), Tensor::scalar(1),
                            Tensor::scalar(1), Tensor::scalar(1), Tensor::scalar(1), ones);
  CHECK(u.total.value() == 6.0);
}

TEST_CASE("total loss matches the recombination oracle on random draws") {
  Rng rng(211);
  for (int rep = 0; rep < 50; ++rep) {
    double c = rng.uniform(-2, 2), v = rng.uniform(0, 2), g = rng.uniform(0, 2);
    double mc = rng.uniform(-2, 0), md = rng.uniform(0, 2), sp = rng.uniform(0, 1);
    CurriculumSchedule::Weights w{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3),
                                  rng.uniform(0, 6), rng.uniform(0, 0.2)};
    LossBundle b = total_loss(Tensor::scalar(c), Tensor::scalar(v), Tensor::scalar(g),
                              Tensor::scalar(mc), Tensor::scalar(md), Tensor::scalar(sp), w);
    double expect = c + w.vic * v + w.gram * g + w.class_mi * mc + w.domain_mi * md +
                    w.sparsity * sp;
    CHECK(b.total.value() == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("non-finite components abort with the term name") {
  CurriculumSchedule::Weights w{1, 1, 1, 1, 1};
  double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(
      total_loss(Tensor::scalar(1), Tensor::scalar(inf), Tensor::scalar(0), Tensor::scalar(0),
                 Tensor::scalar(0), Tensor::scalar(0), w),
      doctest::Contains("'vic'"), NumericError);
  CHECK_THROWS_WITH_AS(
      total_loss(Tensor::scalar(std::nan("")), Tensor::scalar(0), Tensor::scalar(0),
                 Tensor::scalar(0), Tensor::scalar(0), Tensor::scalar(0), w),
      doctest::Contains("'cls'"), NumericError);
}

TEST_CASE("gradient additivity across weighted terms") {
  // d total / d theta equals the weighted sum of per-term gradients when a
  // parameter feeds several terms
  Rng rng(223);
  CurriculumSchedule::Weights w{2.0, 0.5, 1.5, 3.0, 0.25};

  auto build = [&](const Tensor& theta, int which) {
    // reuse theta in every term through different smooth maps
    Tensor cls = ops::mean(ops::square(theta));
    Tensor vic = ops::mean(ops::sigmoid(theta));
    Tensor gram = ops::mean(ops::mul(theta, theta));
    Tensor mi_c = ops::mul(ops::mean(theta), -0.5);
    Tensor mi_d = ops::mean(ops::exp(ops::mul(theta, 0.1)));
    Tensor sparse = ops::mean(ops::relu(theta));
    switch (which) {
      case 0: return cls;
      case 1: return vic;
      case 2: return gram;
      case 3: return mi_c;
      case 4: return mi_d;
      case 5: return sparse;
      default: return total_loss(cls, vic, gram, mi_c, mi_d, sparse, w).total;
    }
  };

  Tensor theta = testutil::random_signed_tensor({4, 3}, rng);
  auto grad_of = [&](int which) {
    Tensor t = theta.clone().requires_grad_(true);
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = build(t, which);
    tape.backward(loss);
    return t.grad();
  };

  auto gt = grad_of(-1);
  auto g0 = grad_of(0);
  auto g1 = grad_of(1);
  auto g2 = grad_of(2);
  auto g3 = grad_of(3);
  auto g4 = grad_of(4);
  auto g5 = grad_of(5);
  for (std::size_t i = 0; i < theta.numel(); ++i) {
    double expect = g0[i] + w.vic * g1[i] + w.gram * g2[i] + w.class_mi * g3[i] +
                    w.domain_mi * g4[i] + w.sparsity * g5[i];
    CHECK(gt[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}
