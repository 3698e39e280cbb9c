#include "mdn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eigen_view.hpp"

namespace mdn {

namespace {

using detail::view;

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw LinalgError(std::string(op) + ": dimension mismatch " + a.shape_string() + " vs " +
                    b.shape_string());
}

constexpr double kPivotRatio = 1e-9;

// Lower Cholesky factor, or false if some pivot is rejected.
bool cholesky(const Matrix& a, const std::vector<double>& reference_diag, Matrix& lower) {
  const std::size_t n = a.rows();
  lower = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
    if (!(d > kPivotRatio * reference_diag[j])) return false;
    const double ljj = std::sqrt(d);
    lower(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / ljj;
    }
  }
  return true;
}

Matrix inverse_from_cholesky(const Matrix& lower) {
  const std::size_t n = lower.rows();
  // Linv by forward substitution, then A⁻¹ = Linvᵀ·Linv.
  Matrix linv(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = c; i < n; ++i) {
      double s = (i == c) ? 1.0 : 0.0;
      for (std::size_t k = c; k < i; ++k) s -= lower(i, k) * linv(k, c);
      linv(i, c) = s / lower(i, i);
    }
  }
  Matrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = j; k < n; ++k) s += linv(k, i) * linv(k, j);
      inv(i, j) = s;
      inv(j, i) = s;
    }
  }
  return inv;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw LinalgError("Matrix: data length " + std::to_string(data_.size()) +
                      " does not match shape " + shape_string());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw LinalgError("Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::reshape(std::size_t rows, std::size_t cols) {
  if (rows * cols != data_.size()) {
    throw LinalgError("Matrix::reshape: cannot view " + shape_string() + " as " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  rows_ = rows;
  cols_ = cols;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix out(a.rows(), b.cols());
  if (out.empty() || a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b);
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  Matrix out(a.cols(), b.cols());
  if (out.empty() || a.rows() == 0) return out;
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  Matrix out(a.rows(), b.rows());
  if (out.empty() || a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix gram(const Matrix& x) {
  if (x.empty()) throw LinalgError("gram: empty matrix");
  const std::size_t k = x.cols();
  Matrix g(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) s += x(r, i) * x(r, j);
      g(i, j) = s;
      g(j, i) = s;
    }
  }
  return g;
}

SpdInverse spd_inverse(const Matrix& a, double jitter) {
  if (a.rows() != a.cols() || a.empty()) {
    throw LinalgError("spd_inverse: expected a nonempty square matrix, got " + a.shape_string());
  }
  const std::size_t n = a.rows();
  const double scale = std::max(max_abs(a), 1e-300);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > 1e-9 * scale) {
        throw LinalgError("spd_inverse: matrix is not symmetric");
      }
    }
  }
  if (!all_finite(a)) throw LinalgError("spd_inverse: non-finite entries");

  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);

  Matrix lower;
  if (cholesky(a, diag, lower)) return {inverse_from_cholesky(lower), false};

  const double mean_diag = std::accumulate(diag.begin(), diag.end(), 0.0) / static_cast<double>(n);
  Matrix shifted = a;
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) += jitter * mean_diag;
  if (cholesky(shifted, diag, lower)) return {inverse_from_cholesky(lower), true};

  throw LinalgError("metadata Gram matrix singular");
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("hstack", a, b);
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) throw LinalgError("select_rows: row index out of range");
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

Matrix slice_cols(const Matrix& m, std::size_t first, std::size_t count) {
  if (first + count > m.cols()) throw LinalgError("slice_cols: range exceeds " + m.shape_string());
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, first + c);
  return out;
}

double max_abs(const Matrix& m) {
  double v = 0.0;
  for (double x : m.values()) v = std::max(v, std::abs(x));
  return v;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace mdn
