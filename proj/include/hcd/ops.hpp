#pragma once

#include <vector>

#include "hcd/tensor.hpp"

namespace hcd {
namespace ops {

// Elementwise binary ops. Broadcasting is deliberately restricted to
// scalar-with-tensor and row-vector-with-matrix ([D] or [1xD] against [nxD]);
// every other shape mix is a ShapeError.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// scalar-constant variants (no constant tensor node)
Tensor add(const Tensor& a, double c);
Tensor sub(double c, const Tensor& a);
Tensor mul(const Tensor& a, double c);
Tensor div(double c, const Tensor& a);

// Elementwise unary ops.
Tensor neg(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);  // output clamped into open (0,1)
Tensor log2(const Tensor& x);     // NumericError on non-positive input
Tensor exp(const Tensor& x);
Tensor sqrt(const Tensor& x);     // backward denominator clamped at 1e-12
Tensor square(const Tensor& x);

// Linear algebra (2-D).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor batch_mean(const Tensor& x);  // [nxD] -> [D], over rows
Tensor batch_var(const Tensor& x);   // population variance (divisor n)
Tensor trace(const Tensor& x);       // [nxn] -> scalar
Tensor frobenius_sq(const Tensor& x);

// Structured ops for the loss stack.

// [n,C,H,W] per-sample-channel spatial statistics -> [n,C]
Tensor spatial_mean(const Tensor& f);
Tensor spatial_var(const Tensor& f);  // population (divisor H*W)

// out[i] = x[index[i]]; index must be a bijection for permutation use
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& index);

// out[i,c,h,w] = (f[i,c,h,w] - center[i,c]) * scale[i,c] + shift[i,c]
Tensor channel_affine(const Tensor& f, const Tensor& center, const Tensor& scale,
                      const Tensor& shift);

// per-sample channel co-activation matrix A*A^T / (C*H*W), A = C x (H*W)
Tensor gram(const Tensor& f);

// S[i,j] = ||z_i - z_j||^2 for z [n,D]
Tensor pairwise_sqdist(const Tensor& z);

// stable mean cross-entropy over rows of logits [n,K]
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// minimal 2-D convolution, NCHW input, OIHW weights, bias [OC]
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t pad);

// Forward-only helpers.
std::vector<int> argmax_rows(const Tensor& x);
void check_finite(const Tensor& x, const char* what);

}  // namespace ops

// Operator sugar used throughout the loss stack.
inline Tensor operator+(const Tensor& a, const Tensor& b) { return ops::add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return ops::sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return ops::mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return ops::div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return ops::add(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return ops::add(a, -c); }
inline Tensor operator-(double c, const Tensor& a) { return ops::sub(c, a); }
inline Tensor operator*(const Tensor& a, double c) { return ops::mul(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return ops::mul(a, c); }
inline Tensor operator/(const Tensor& a, double c) { return ops::mul(a, 1.0 / c); }

}  // namespace hcd
