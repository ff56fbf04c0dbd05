#pragma once

// Independent oracles for the test suites. Everything here is deliberately
// brute force and shares no code path with the library implementations.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

// Cyclic Jacobi eigenvalue iteration for a symmetric matrix (row-major).
// Plenty accurate for the n <= 32 kernels used in tests.
inline std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n) {
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-28) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
  return eig;
}

// -log2(sum lambda_i^2) from the spectrum
inline double entropy_from_eigenvalues(const std::vector<double>& eig) {
  double acc = 0.0;
  for (double l : eig) acc += l * l;
  return -std::log2(acc);
}

inline double spectral_entropy(const std::vector<double>& k, std::size_t n) {
  return entropy_from_eigenvalues(symmetric_eigenvalues(k, n));
}

inline double min_eigenvalue(const std::vector<double>& k, std::size_t n) {
  auto eig = symmetric_eigenvalues(k, n);
  double m = eig[0];
  for (double l : eig) m = std::min(m, l);
  return m;
}

}  // namespace oracle
