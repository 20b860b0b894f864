#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

/// Largest singular value of a row-major rows x cols matrix: cyclic Jacobi
/// rotations diagonalize the Gram matrix A^T A, then sqrt of the top
/// eigenvalue.
inline double largestSingularValue(const std::vector<double>& a, std::size_t rows, std::size_t cols) {
  const std::size_t n = cols;
  std::vector<double> g(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0.0L;
      for (std::size_t r = 0; r < rows; ++r) {
        s += static_cast<long double>(a[r * cols + i]) * a[r * cols + j];
      }
      g[i * n + j] = static_cast<double>(s);
    }
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      diag += g[p * n + p] * g[p * n + p];
      for (std::size_t q = p + 1; q < n; ++q) {
        off += g[p * n + q] * g[p * n + q];
      }
    }
    if (off <= 1e-30 * diag) {
      break;
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = g[p * n + q];
        if (apq == 0.0) {
          continue;
        }
        const double theta = (g[q * n + q] - g[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double gkp = g[k * n + p];
          const double gkq = g[k * n + q];
          g[k * n + p] = c * gkp - s * gkq;
          g[k * n + q] = s * gkp + c * gkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double gpk = g[p * n + k];
          const double gqk = g[q * n + k];
          g[p * n + k] = c * gpk - s * gqk;
          g[q * n + k] = s * gpk + c * gqk;
        }
      }
    }
  }
  double top = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    top = std::max(top, g[i * n + i]);
  }
  return std::sqrt(top);
}

} // namespace oracle
