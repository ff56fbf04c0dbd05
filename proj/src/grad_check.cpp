#include "hcd/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace hcd {

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h, double tol) {
  GradCheckReport report;
  std::size_t n = x.numel();
  report.rel_err.assign(n, 0.0);

  // analytic pass
  Tensor xt = x.clone().requires_grad_(true);
  std::vector<double> analytic(n, 0.0);
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f(xt);
    if (loss.numel() != 1) {
      throw ShapeError("grad_check: f must be scalar-valued, got " + shape_str(loss.shape()));
    }
    if (!std::isfinite(loss.value())) {
      report.non_finite = true;
      return report;
    }
    tape.backward(loss);
    if (xt.has_grad()) analytic = xt.grad();
  }

  // central differences, pure forward (no tape)
  Tensor probe = x.detach();
  for (std::size_t i = 0; i < n; ++i) {
    double orig = probe.at(i);
    probe.mut_values()[i] = orig + h;
    double fp = f(probe).value();
    probe.mut_values()[i] = orig - h;
    double fm = f(probe).value();
    probe.mut_values()[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      report.non_finite = true;
      report.non_finite_index = i;
      return report;
    }
    double numeric = (fp - fm) / (2.0 * h);
    double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
    double rel = std::abs(analytic[i] - numeric) / denom;
    report.rel_err[i] = rel;
    if (rel >= report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
      report.analytic_at_worst = analytic[i];
      report.numeric_at_worst = numeric;
    }
  }
  report.passed = report.max_rel_err < tol;
  return report;
}

}  // namespace hcd
