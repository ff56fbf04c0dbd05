#include "hcd/gater.hpp"

#include <cmath>

#include "hcd/ops.hpp"

namespace hcd {

namespace {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> vals(shape_numel(shape));
  for (auto& v : vals) v = rng.uniform(-bound, bound);
  Tensor t(std::move(shape), std::move(vals));
  t.requires_grad_(true);
  return t;
}

}  // namespace

GateParams GateParams::init(std::size_t feature_dim, std::size_t reduction, double dropout_p,
                            Rng& rng) {
  if (reduction == 0 || feature_dim % reduction != 0) {
    throw ValueError("gate reduction " + std::to_string(reduction) +
                     " must divide feature dim " + std::to_string(feature_dim));
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw ValueError("dropout probability must lie in [0,1), got " + std::to_string(dropout_p));
  }
  std::size_t b = feature_dim / reduction;
  GateParams p;
  p.w1 = uniform_init({b, feature_dim}, feature_dim, rng);
  p.w2 = uniform_init({feature_dim, b}, b, rng);
  p.bn.gamma = Tensor::ones({b}).requires_grad_(true);
  p.bn.beta = Tensor::zeros({b}).requires_grad_(true);
  p.bn.running_mean.assign(b, 0.0);
  p.bn.running_var.assign(b, 1.0);
  p.reduction = reduction;
  p.dropout_p = dropout_p;
  return p;
}

namespace {

GateOutput gate_forward_impl(const Tensor& z, GateParams& params, GateMode mode,
                             const Tensor* fixed_dropout, Rng* rng, const GateFlags& flags) {
  if (z.dim() != 2) throw ShapeError("gate_forward: expected [n,D], got " + shape_str(z.shape()));
  std::size_t n = z.shape()[0], d = z.shape()[1];
  if (d != params.feature_dim()) {
    throw ShapeError("gate_forward: feature dim " + std::to_string(d) +
                     " does not match params dim " + std::to_string(params.feature_dim()));
  }
  ops::check_finite(z, "gate.input");

  std::size_t b = params.bottleneck_dim();
  Tensor bottleneck = ops::matmul(z, ops::transpose(params.w1));
  ops::check_finite(bottleneck, "gate.bottleneck");

  GateOutput out;
  Tensor normalized;
  bool batch_stats = (mode == GateMode::train && n >= 2);
  if (batch_stats) {
    Tensor mu = ops::batch_mean(bottleneck);
    Tensor var = ops::batch_var(bottleneck);
    normalized = ops::div(ops::sub(bottleneck, mu), ops::sqrt(ops::add(var, params.bn.eps)));
    out.batch_mean = mu.values();
    out.batch_var = var.values();
    out.used_batch_stats = true;
  } else {
    Tensor mu({b}, params.bn.running_mean);
    std::vector<double> denom(b);
    for (std::size_t j = 0; j < b; ++j) {
      denom[j] = std::sqrt(params.bn.running_var[j] + params.bn.eps);
    }
    normalized = ops::div(ops::sub(bottleneck, mu), Tensor({b}, denom));
  }
  Tensor bn_out = ops::add(ops::mul(normalized, params.bn.gamma), params.bn.beta);
  ops::check_finite(bn_out, "gate.batchnorm");

  Tensor hidden = ops::relu(bn_out);
  Tensor logits = ops::matmul(hidden, ops::transpose(params.w2));
  ops::check_finite(logits, "gate.logits");
  out.mask = ops::sigmoid(logits);

  if (mode == GateMode::train) {
    double p = params.dropout_p;
    if (fixed_dropout) {
      out.dropout_realization = fixed_dropout->detach();
    } else {
      std::vector<double> xi(n * d);
      for (auto& v : xi) v = (rng->uniform() < 1.0 - p) ? 1.0 : 0.0;
      out.dropout_realization = Tensor({n, d}, std::move(xi));
    }
    double scale = flags.inverted_dropout_scaling ? 1.0 / (1.0 - p) : 1.0;
    Tensor xi_scaled = (scale == 1.0) ? out.dropout_realization
                                      : ops::mul(out.dropout_realization, scale);
    out.z_hat = ops::mul(ops::mul(z, out.mask), xi_scaled);
  } else {
    out.z_hat = ops::mul(z, out.mask);
  }
  return out;
}

}  // namespace

GateOutput gate_forward(const Tensor& z, GateParams& params, GateMode mode, Rng& rng,
                        const GateFlags& flags) {
  return gate_forward_impl(z, params, mode, nullptr, &rng, flags);
}

GateOutput gate_forward_with_dropout(const Tensor& z, GateParams& params, GateMode mode,
                                     const Tensor& dropout_realization, const GateFlags& flags) {
  return gate_forward_impl(z, params, mode, &dropout_realization, nullptr, flags);
}

void commit_bn_update(GateParams& params, const GateOutput& out) {
  if (!out.used_batch_stats) return;
  double m = params.bn.momentum;
  for (std::size_t j = 0; j < params.bn.running_mean.size(); ++j) {
    params.bn.running_mean[j] = (1.0 - m) * params.bn.running_mean[j] + m * out.batch_mean[j];
    params.bn.running_var[j] = (1.0 - m) * params.bn.running_var[j] + m * out.batch_var[j];
  }
}

Tensor pool(const Tensor& feature_map) { return ops::spatial_mean(feature_map); }

double expected_risk_mc(const Tensor& z, GateParams& params, const std::vector<int>& labels,
                        const std::function<Tensor(const Tensor&)>& classifier,
                        std::size_t trials, Rng& rng, const GateFlags& flags) {
  if (trials == 0) throw ValueError("expected_risk_mc: trials must be >= 1");
  double acc = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    GateOutput out = gate_forward(z, params, GateMode::train, rng, flags);
    acc += ops::softmax_cross_entropy(classifier(out.z_hat), labels).value();
  }
  return acc / static_cast<double>(trials);
}

}  // namespace hcd
