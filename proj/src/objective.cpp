#include "hcd/objective.hpp"

#include <cmath>

#include "hcd/ops.hpp"

namespace hcd {

CurriculumSchedule CurriculumSchedule::defaults(std::size_t epochs) {
  CurriculumSchedule s;
  s.epochs_total = epochs;
  s.validate();
  return s;
}

double evaluate_term(const TermSchedule& s, std::size_t t, std::size_t epochs_total) {
  if (t < s.activation_epoch) return s.initial;
  if (s.shape == RampShape::step) return s.target;
  std::size_t last = epochs_total - 1;
  if (last <= s.activation_epoch) return s.target;
  double frac = static_cast<double>(t - s.activation_epoch) /
                static_cast<double>(last - s.activation_epoch);
  return s.initial + (s.target - s.initial) * frac;
}

double CurriculumSchedule::weight_at(const std::string& term, std::size_t t) const {
  if (t >= epochs_total) {
    throw ValueError("schedule epoch " + std::to_string(t) + " outside [0," +
                     std::to_string(epochs_total) + ")");
  }
  if (term == "vic") return evaluate_term(vic, t, epochs_total);
  if (term == "gram") return evaluate_term(gram, t, epochs_total);
  if (term == "class_mi") return evaluate_term(class_mi, t, epochs_total);
  if (term == "domain_mi") return evaluate_term(domain_mi, t, epochs_total);
  if (term == "sparsity") return evaluate_term(sparsity, t, epochs_total);
  throw ValueError("unknown schedule term '" + term + "'");
}

CurriculumSchedule::Weights CurriculumSchedule::at(std::size_t t) const {
  return Weights{weight_at("vic", t), weight_at("gram", t), weight_at("class_mi", t),
                 weight_at("domain_mi", t), weight_at("sparsity", t)};
}

void CurriculumSchedule::validate() const {
  if (epochs_total == 0) throw ValueError("schedule needs at least one epoch");
  auto check = [&](const TermSchedule& s, const char* name) {
    if (s.initial < 0 || s.target < 0 || !std::isfinite(s.initial) || !std::isfinite(s.target)) {
      throw ValueError(std::string("schedule term ") + name + " has invalid weights");
    }
    if (s.target < s.initial) {
      throw ValueError(std::string("schedule term ") + name +
                       " must be nondecreasing (target >= initial)");
    }
  };
  check(vic, "vic");
  check(gram, "gram");
  check(class_mi, "class_mi");
  check(domain_mi, "domain_mi");
  check(sparsity, "sparsity");
}

LossBundle total_loss(const Tensor& cls, const Tensor& vic, const Tensor& gram,
                      const Tensor& mi_c, const Tensor& mi_d, const Tensor& sparse,
                      const CurriculumSchedule::Weights& w) {
  LossBundle b;
  b.cls = cls;
  b.vic = vic;
  b.gram = gram;
  b.mi_c = mi_c;
  b.mi_d = mi_d;
  b.sparse = sparse;
  b.weights = w;
  b.total = ops::add(
      ops::add(ops::add(cls, ops::mul(vic, w.vic)), ops::mul(gram, w.gram)),
      ops::add(ops::add(ops::mul(mi_c, w.class_mi), ops::mul(mi_d, w.domain_mi)),
               ops::mul(sparse, w.sparsity)));
  b.validate();
  return b;
}

void LossBundle::validate() const {
  auto term = [&](const Tensor& t, const char* name) {
    if (!std::isfinite(t.value())) {
      throw NumericError(std::string("loss term '") + name + "' is non-finite: " +
                         std::to_string(t.value()));
    }
    return t.value();
  };
  double recombined = term(cls, "cls") + weights.vic * term(vic, "vic") +
                      weights.gram * term(gram, "gram") + weights.class_mi * term(mi_c, "mi_c") +
                      weights.domain_mi * term(mi_d, "mi_d") +
                      weights.sparsity * term(sparse, "sparse");
  if (!std::isfinite(total.value())) {
    throw NumericError("total loss is non-finite");
  }
  double tol = 1e-12 * std::max(1.0, std::abs(recombined));
  if (std::abs(total.value() - recombined) > tol) {
    throw NumericError("total loss " + std::to_string(total.value()) +
                       " deviates from recombination " + std::to_string(recombined));
  }
}

}  // namespace hcd
