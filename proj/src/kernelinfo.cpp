#include "hcd/kernelinfo.hpp"

#include <algorithm>
#include <cmath>

#include "hcd/ops.hpp"

namespace hcd {

namespace {

Mutation g_mutation = Mutation::none;

// forward identity whose backward flips the sign; exists only so the
// self-test can prove the grad-check suite catches a wrong backward rule
Tensor grad_sign_flip(const Tensor& x) {
  Tensor out = x.detach();
  out.data_->requires_grad = x.requires_grad() && Tape::active() != nullptr;
  if (out.requires_grad()) {
    auto xd = x.data_, od = out.data_;
    Tape::active()->record([xd, od]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < od->grad.size(); ++i) xd->accumulate(i, -od->grad[i]);
    });
  }
  return out;
}

void require_batch(std::size_t n, const char* what) {
  if (n < 2) {
    throw ValueError(std::string(what) + ": batch too small (n=" + std::to_string(n) +
                     ", need >= 2)");
  }
}

}  // namespace

void set_mutation(Mutation m) { g_mutation = m; }
Mutation current_mutation() { return g_mutation; }

LabelVector::LabelVector(std::vector<int> ids_, int cardinality_)
    : ids(std::move(ids_)), cardinality(cardinality_) {
  for (int id : ids) {
    if (id < 0 || id >= cardinality) {
      throw ValueError("label id " + std::to_string(id) + " outside cardinality " +
                       std::to_string(cardinality));
    }
  }
}

void validate_kernel(const KernelMatrix& k, double tol) {
  const Tensor& v = k.values;
  if (v.dim() != 2 || v.shape()[0] != v.shape()[1]) {
    throw ShapeError("kernel matrix must be square, got " + shape_str(v.shape()));
  }
  std::size_t n = k.n();
  double tr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double e = v.at(i * n + j);
      if (!std::isfinite(e)) throw NumericError("kernel matrix has non-finite entry");
      if (std::abs(e - v.at(j * n + i)) > tol) {
        throw NumericError("kernel matrix is not symmetric at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
      }
    }
    tr += v.at(i * n + i);
  }
  if (std::abs(tr - 1.0) > tol) {
    throw NumericError("kernel trace " + std::to_string(tr) + " deviates from 1");
  }
}

double median_pairwise_distance(const Tensor& z) {
  std::size_t n = z.shape()[0], d = z.shape()[1];
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        double c = z.at(i * d + k) - z.at(j * d + k);
        acc += c * c;
      }
      dist.push_back(std::sqrt(acc));
    }
  std::sort(dist.begin(), dist.end());
  std::size_t m = dist.size();
  return (m % 2 == 1) ? dist[m / 2] : 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
}

KernelMatrix rbf_kernel(const Tensor& z, std::optional<double> bandwidth) {
  if (z.dim() != 2) throw ShapeError("rbf_kernel: expected [n,D], got " + shape_str(z.shape()));
  require_batch(z.shape()[0], "rbf_kernel");

  double sigma;
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw ValueError("rbf_kernel: bandwidth must be positive");
    sigma = *bandwidth;
  } else {
    sigma = median_pairwise_distance(z.detach());
    if (sigma <= 0.0) sigma = 1.0;  // degenerate batch, all rows identical
  }

  Tensor sq = ops::pairwise_sqdist(z);
  Tensor raw = ops::exp(ops::mul(sq, -1.0 / (2.0 * sigma * sigma)));
  Tensor k = ops::div(raw, ops::trace(raw));
  return KernelMatrix{k};
}

KernelMatrix label_kernel(const LabelVector& labels) {
  std::size_t n = labels.size();
  require_batch(n, "label_kernel");
  std::vector<double> vals(n * n, 0.0);
  double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (labels.ids[i] == labels.ids[j]) vals[i * n + j] = inv;
    }
  return KernelMatrix{Tensor({n, n}, std::move(vals))};
}

Tensor matrix_entropy(const KernelMatrix& k) {
  Tensor tr_k2 = ops::frobenius_sq(k.values);  // tr(K^2) for symmetric K
  if (!(tr_k2.value() > 0.0)) {
    throw NumericError("matrix_entropy: tr(K^2) = " + std::to_string(tr_k2.value()) +
                       " is not positive; kernel is corrupt");
  }
  return ops::neg(ops::log2(tr_k2));
}

KernelMatrix joint_kernel(const KernelMatrix& a, const KernelMatrix& b) {
  if (a.n() != b.n()) {
    throw ShapeError("joint_kernel: sizes " + std::to_string(a.n()) + " and " +
                     std::to_string(b.n()) + " differ");
  }
  Tensor had = ops::mul(a.values, b.values);
  Tensor tr = ops::trace(had);
  if (tr.value() <= 1e-15) {
    throw NumericError("joint_kernel: degenerate joint, trace " + std::to_string(tr.value()));
  }
  return KernelMatrix{ops::div(had, tr)};
}

namespace {

Tensor matrix_mi(const Tensor& z_hat, const LabelVector& labels,
                 std::optional<double> bandwidth) {
  if (z_hat.dim() != 2) {
    throw ShapeError("matrix mi: expected [n,D], got " + shape_str(z_hat.shape()));
  }
  if (labels.size() != z_hat.shape()[0]) {
    throw ShapeError("matrix mi: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(z_hat.shape()[0]));
  }
  KernelMatrix kz = rbf_kernel(z_hat, bandwidth);
  KernelMatrix kl = label_kernel(labels);
  Tensor joint = matrix_entropy(joint_kernel(kz, kl));
  return ops::sub(ops::add(matrix_entropy(kz), matrix_entropy(kl)), joint);
}

}  // namespace

Tensor mi_domain_loss(const Tensor& z_hat, const LabelVector& d,
                      std::optional<double> bandwidth) {
  Tensor mi = matrix_mi(z_hat, d, bandwidth);
  if (g_mutation == Mutation::mi_domain_grad_sign_flip) mi = grad_sign_flip(mi);
  return mi;
}

Tensor mi_class_loss(const Tensor& z_hat, const LabelVector& y,
                     std::optional<double> bandwidth) {
  return ops::neg(matrix_mi(z_hat, y, bandwidth));
}

Tensor sparse_loss(const Tensor& mask) {
  if (mask.dim() != 2) throw ShapeError("sparse_loss: expected [n,C], got " + shape_str(mask.shape()));
  return ops::mean(mask);
}

}  // namespace hcd
