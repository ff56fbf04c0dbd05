#pragma once

#include <string>

#include "hcd/tensor.hpp"

namespace hcd {

enum class RampShape { step, linear };

// One scheduled weight: `initial` until the activation epoch, then either a
// jump to `target` or a linear ramp reaching `target` at the final epoch.
struct TermSchedule {
  double initial = 1.0;
  double target = 1.0;
  std::size_t activation_epoch = 0;
  RampShape shape = RampShape::step;
};

// Schedules are keyed by term name, never by coefficient index: the paper's
// index conventions conflict between its equation and its experimental
// setup, so names are the stable identifiers here.
struct CurriculumSchedule {
  TermSchedule vic{1.0, 1.0, 0, RampShape::step};
  TermSchedule gram{1.0, 1.0, 0, RampShape::step};
  TermSchedule class_mi{1.0, 1.0, 0, RampShape::step};
  // domain-mi steps up after the first epoch; sparsity ramps linearly from
  // its activation epoch to the final epoch
  TermSchedule domain_mi{0.5, 5.0, 1, RampShape::step};
  TermSchedule sparsity{0.005, 0.1, 2, RampShape::linear};
  std::size_t epochs_total = 20;

  static CurriculumSchedule defaults(std::size_t epochs);

  struct Weights {
    double vic = 0.0;
    double gram = 0.0;
    double class_mi = 0.0;
    double domain_mi = 0.0;
    double sparsity = 0.0;
  };

  double weight_at(const std::string& term, std::size_t t) const;
  Weights at(std::size_t t) const;
  void validate() const;  // nonnegative, nondecreasing, t-range checks
};

double evaluate_term(const TermSchedule& s, std::size_t t, std::size_t epochs_total);

// All scalar loss terms with their scheduled weights and the Eq-combined
// total on the tape.
struct LossBundle {
  Tensor cls, vic, gram, mi_c, mi_d, sparse;
  CurriculumSchedule::Weights weights;
  Tensor total;

  // recomputes the weighted sum from component values and checks the tape
  // total against it to 1e-12; throws NumericError naming a non-finite term
  void validate() const;
};

LossBundle total_loss(const Tensor& cls, const Tensor& vic, const Tensor& gram,
                      const Tensor& mi_c, const Tensor& mi_d, const Tensor& sparse,
                      const CurriculumSchedule::Weights& w);

}  // namespace hcd
