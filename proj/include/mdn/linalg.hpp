#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdn {

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. The single numeric carrier used across
/// the library: metadata blocks, flattened activations, parameters.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  void fill(double v);
  /// Reinterpret the same buffer with a new shape (element count must match).
  void reshape(std::size_t rows, std::size_t cols);

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// XᵀX. The upper triangle is computed and mirrored, so the result is
/// bitwise symmetric.
Matrix gram(const Matrix& x);

struct SpdInverse {
  Matrix inverse;
  bool jitter_used = false;
};

/// Inverse of a symmetric positive-definite matrix via Cholesky.
///
/// A pivot is rejected when it falls below 1e-9 of its original diagonal
/// entry. On rejection the factorization is retried once with
/// jitter·mean(diag) added to the diagonal; the returned flag reports whether
/// that happened. Exactly rank-deficient input fails on both attempts.
SpdInverse spd_inverse(const Matrix& a, double jitter = 1e-10);

/// [a | b]; row counts must match.
Matrix hstack(const Matrix& a, const Matrix& b);
Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);
/// Columns [first, first+count).
Matrix slice_cols(const Matrix& m, std::size_t first, std::size_t count);

double max_abs(const Matrix& m);
bool all_finite(const Matrix& m);

}  // namespace mdn
