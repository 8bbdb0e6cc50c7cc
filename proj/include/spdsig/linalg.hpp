#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "spdsig/errors.hpp"

namespace spdsig {

/// Minimal dense row-major matrix. The regression problems here are tall and
/// very thin (a handful of columns), so no external linear algebra is needed.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {d_.data() + i * cols_, cols_};
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> d_;
};

namespace linalg {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Solves A x = b in place for a small square system (Gaussian elimination,
/// partial pivoting). Returns false when the pivot collapses.
inline bool solve_square(Matrix A, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = A.rows();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(A(i, k)) > std::fabs(A(piv, k))) piv = i;
    if (std::fabs(A(piv, k)) < 1e-300) return false;
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = A(i, k) / A(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) A(i, j) -= f * A(k, j);
      b[i] -= f * b[k];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
    x[i] = s / A(i, i);
  }
  return true;
}

/// Effective rank of a tall matrix via Householder QR with a relative
/// diagonal tolerance.
inline std::size_t qr_rank(const Matrix& X, double rel_tol) {
  const std::size_t n = X.rows(), p = X.cols();
  Matrix A = X;
  double max_col_norm = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += A(i, j) * A(i, j);
    max_col_norm = std::max(max_col_norm, std::sqrt(s));
  }
  if (max_col_norm == 0.0) return 0;
  std::size_t rank = 0;
  const std::size_t steps = std::min(n, p);
  std::vector<double> v(n);
  for (std::size_t k = 0; k < steps; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += A(i, k) * A(i, k);
    norm = std::sqrt(norm);
    if (norm > rel_tol * max_col_norm) ++rank;
    if (norm < 1e-300) continue;
    const double alpha = A(k, k) >= 0 ? -norm : norm;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) {
      v[i] = A(i, k) - (i == k ? alpha : 0.0);
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 < 1e-300) continue;
    for (std::size_t j = k; j < p; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < n; ++i) s += v[i] * A(i, j);
      const double f = 2.0 * s / vnorm2;
      for (std::size_t i = k; i < n; ++i) A(i, j) -= f * v[i];
    }
  }
  return rank;
}

/// Sample quantile with linear interpolation between order statistics
/// (the common spreadsheet/R default convention).
inline double sample_quantile(std::vector<double> v, double p) {
  if (v.empty()) fail(errc::insufficient_data, "sample_quantile of empty sample");
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double w = h - static_cast<double>(lo);
  return v[lo] * (1.0 - w) + v[hi] * w;
}

}  // namespace linalg
}  // namespace spdsig
