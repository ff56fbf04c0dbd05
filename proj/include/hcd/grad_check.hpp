#pragma once

#include <functional>
#include <vector>

#include "hcd/tensor.hpp"

namespace hcd {

struct GradCheckReport {
  bool passed = false;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::vector<double> rel_err;   // per coordinate
  bool non_finite = false;       // f produced a non-finite value
  std::size_t non_finite_index = 0;
};

// Central-difference certification of the tape gradient of a scalar-valued
// function. f must be a deterministic function of its argument (freeze any
// RNG it consumes). Relative error uses max(|analytic|, |numeric|, 1e-12)
// as denominator.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h = 1e-5, double tol = 1e-5);

}  // namespace hcd
