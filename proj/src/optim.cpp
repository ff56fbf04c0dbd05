#include "hcd/optim.hpp"

#include <cmath>

namespace hcd {

AdamState AdamState::init(const std::vector<Tensor*>& params, const AdamConfig& cfg) {
  AdamState st;
  st.cfg = cfg;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Tensor* p : params) {
    st.m.emplace_back(p->numel(), 0.0);
    st.v.emplace_back(p->numel(), 0.0);
  }
  return st;
}

void adam_update(const std::vector<Tensor*>& params, AdamState& state) {
  if (params.size() != state.m.size()) {
    throw ValueError("adam state tracks " + std::to_string(state.m.size()) +
                     " params, got " + std::to_string(params.size()));
  }
  state.step_count += 1;
  double t = static_cast<double>(state.step_count);
  double corr1 = 1.0 - std::pow(state.cfg.beta1, t);
  double corr2 = 1.0 - std::pow(state.cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor* p = params[i];
    if (p->numel() != state.m[i].size()) {
      throw ShapeError("adam: param " + std::to_string(i) + " changed size");
    }
    auto& vals = p->mut_values();
    const bool has_grad = p->has_grad();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      double g = has_grad ? p->data_->grad[j] : 0.0;
      state.m[i][j] = state.cfg.beta1 * state.m[i][j] + (1.0 - state.cfg.beta1) * g;
      state.v[i][j] = state.cfg.beta2 * state.v[i][j] + (1.0 - state.cfg.beta2) * g * g;
      double mhat = state.m[i][j] / corr1;
      double vhat = state.v[i][j] / corr2;
      vals[j] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
}

double grad_global_norm(const std::vector<Tensor*>& params) {
  double acc = 0.0;
  for (const Tensor* p : params) {
    if (!p->has_grad()) continue;
    for (double g : p->data_->grad) acc += g * g;
  }
  return std::sqrt(acc);
}

void clip_gradients(const std::vector<Tensor*>& params, double max_norm) {
  double norm = grad_global_norm(params);
  if (norm <= max_norm || norm == 0.0) return;
  double scale = max_norm / norm;
  for (Tensor* p : params) {
    if (!p->has_grad()) continue;
    for (double& g : p->data_->grad) g *= scale;
  }
}

void zero_gradients(const std::vector<Tensor*>& params) {
  for (Tensor* p : params) p->zero_grad();
}

bool gradients_finite(const std::vector<Tensor*>& params) {
  for (const Tensor* p : params) {
    if (!p->has_grad()) continue;
    for (double g : p->data_->grad) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

}  // namespace hcd
