#pragma once

#include <cstddef>
#include <optional>

#include "mdn/linalg.hpp"

namespace mdn {

class MdnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MdnConfig {
  std::size_t n_total = 0;        ///< N, size of the full training set
  bool include_intercept = true;  ///< prepend a column of ones to the metadata
  bool control_labels = false;    ///< regress on [X, y] but subtract only the X part
  double momentum_eta = 0.1;      ///< weight of the newest batch estimate in the β average
  std::size_t feature_count = 0;  ///< C; 0 means "take it from the first batch"

  void validate() const;
};

/// Design matrix layout used everywhere in this module:
///
///   [ 1 (if intercept) | metadata (K columns) | labels (L columns, if controlled) ]
///
/// The leading intercept+metadata block is what gets subtracted from the
/// features; the trailing label block only participates in the fit.
Matrix assemble_design(const Matrix& metadata, const Matrix* labels, bool include_intercept);

struct MdnState {
  Matrix sigma_inv;  ///< (X̃ᵀX̃)⁻¹ over the full training set, K̃×K̃
  Matrix beta;       ///< momentum-averaged coefficients, K̃×C (empty until C is known)
  std::size_t batch_index = 0;
  std::size_t k_meta = 0;       ///< K, metadata columns excluding intercept and labels
  std::size_t label_width = 0;  ///< L, zero unless labels are controlled
  bool intercept = true;
  bool trained = false;
  bool jitter_used = false;

  std::size_t design_width() const noexcept { return (intercept ? 1 : 0) + k_meta + label_width; }
  /// Leading columns of the design whose contribution is removed.
  std::size_t subtract_width() const noexcept { return (intercept ? 1 : 0) + k_meta; }
};

/// Builds X̃ from the full training metadata (and labels when controlled) and
/// inverts its Gram matrix once. β starts at zero.
MdnState precompute_sigma_inv(const Matrix& x_full, const Matrix* labels_full,
                              const MdnConfig& cfg);

/// Ordinary least squares over the whole set: (XᵀX)⁻¹Xᵀf, one column per feature.
Matrix fit_beta_full(const Matrix& x, const Matrix& f);

/// f − Xβ with β from fit_beta_full. Never forms the N×N residualization matrix.
Matrix residualize_full(const Matrix& x, const Matrix& f);

/// Batch residualization with the precomputed inverse:
///   β̂ = (N/M)·Σ⁻¹·X̂ᵀf̂,   r̂ = f̂ − X̂_s·β̂_s
/// where the subscript s selects the intercept+metadata block. Then folds β̂
/// into the running estimate: β ← η·β̂ + (1−η)·β.
Matrix forward_train(MdnState& state, const Matrix& x_batch, const Matrix& f_batch,
                     const MdnConfig& cfg);

/// f − X_s·β_s using the stored running estimate. Valid for any batch size.
Matrix forward_eval(const MdnState& state, const Matrix& x_batch, const Matrix& f_batch);

/// Adjoint of the train-mode map f̂ ↦ r̂ for the same batch:
///   ∂L/∂f̂ = g − (N/M)·X̂·(Σ⁻¹[s,:])ᵀ·(X̂_sᵀ·g).
/// The running β and the metadata receive no gradient.
Matrix backward(const Matrix& x_batch, const Matrix& grad_out, const MdnState& state,
                const MdnConfig& cfg);

}  // namespace mdn
