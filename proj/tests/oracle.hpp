#pragma once

#include <cmath>
#include <vector>

#include "mdn/linalg.hpp"
#include "mdn/rng.hpp"

namespace oracle {

using mdn::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, mdn::Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

/// Solves A·x = b column by column with partial-pivot Gaussian elimination.
inline Matrix solve(Matrix a, Matrix b) {
  const std::size_t n = a.rows();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
    for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(k, j), b(p, j));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
    }
  }
  Matrix x(n, b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = n; i-- > 0;) {
      double s = b(i, j);
      for (std::size_t c = i + 1; c < n; ++c) s -= a(i, c) * x(c, j);
      x(i, j) = s / a(i, i);
    }
  }
  return x;
}

/// Triple-loop product, independent of the library's GEMM.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline Matrix naive_transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// Normal equations: β = (XᵀX)⁻¹Xᵀf, residual f − Xβ.
inline Matrix normal_equation_residual(const Matrix& x, const Matrix& f) {
  const Matrix xt = naive_transpose(x);
  const Matrix beta = solve(naive_matmul(xt, x), naive_matmul(xt, f));
  Matrix r = f;
  const Matrix fit = naive_matmul(x, beta);
  for (std::size_t i = 0; i < r.size(); ++i) r.values()[i] -= fit.values()[i];
  return r;
}

/// Textbook dcov²: full distance matrices, explicit double centering.
inline double naive_dcov2(const Matrix& x, const Matrix& y) {
  const std::size_t n = x.rows();
  auto dist = [n](const Matrix& m) {
    std::vector<std::vector<double>> d(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < m.cols(); ++c) s += (m(i, c) - m(j, c)) * (m(i, c) - m(j, c));
        d[i][j] = std::sqrt(s);
      }
    std::vector<double> row(n), col(n);
    double grand = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        row[i] += d[i][j] / n;
        col[j] += d[i][j] / n;
        grand += d[i][j] / (double(n) * n);
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = d[i][j] - row[i] - col[j] + grand;
    return d;
  };
  const auto a = dist(x);
  const auto b = dist(y);
  double s = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s += a[i][j] * b[i][j];
  return s / (double(n) * n);
}

inline double naive_dcor2(const Matrix& x, const Matrix& y) {
  const double xy = naive_dcov2(x, y);
  const double xx = naive_dcov2(x, x);
  const double yy = naive_dcov2(y, y);
  if (xx <= 0 || yy <= 0) return 0.0;
  return xy / std::sqrt(xx * yy);
}

inline double max_rel_diff(const Matrix& a, const Matrix& b) {
  double scale = 0, diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(b.values()[i]));
    diff = std::max(diff, std::abs(a.values()[i] - b.values()[i]));
  }
  return diff / std::max(scale, 1e-300);
}

}  // namespace oracle
