#include "mdn/metadata_norm.hpp"

#include <algorithm>
#include <string>

#include "eigen_view.hpp"

namespace mdn {

namespace {

void check_layout(const MdnState& state, const Matrix& x_batch, const Matrix& f_batch,
                  const char* op) {
  if (state.sigma_inv.empty()) throw MdnError(std::string(op) + ": state was never precomputed");
  if (x_batch.cols() != state.design_width()) {
    throw MdnError(std::string(op) + ": design has " + std::to_string(x_batch.cols()) +
                   " columns, state expects " + std::to_string(state.design_width()));
  }
  if (x_batch.rows() != f_batch.rows()) {
    throw MdnError(std::string(op) + ": batch rows differ, design " + x_batch.shape_string() +
                   " vs features " + f_batch.shape_string());
  }
  if (x_batch.rows() == 0) throw MdnError(std::string(op) + ": empty batch");
}

// f − X_s·β_s, the subtraction shared by train and eval mode.
Matrix subtract_explained(const Matrix& x_batch, const Matrix& f_batch, const Matrix& beta,
                          std::size_t subtract_width) {
  using namespace detail;
  Matrix out = f_batch;
  const ConstMap beta_s(beta.data(), ix(subtract_width), ix(beta.cols()));
  view(out).noalias() -= leading_cols(x_batch, subtract_width) * beta_s;
  return out;
}

}  // namespace

void MdnConfig::validate() const {
  if (n_total < 2) throw MdnError("MdnConfig: n_total must be at least 2");
  if (!(momentum_eta > 0.0 && momentum_eta <= 1.0)) {
    throw MdnError("MdnConfig: momentum_eta must lie in (0, 1]");
  }
}

Matrix assemble_design(const Matrix& metadata, const Matrix* labels, bool include_intercept) {
  if (labels != nullptr && labels->rows() != metadata.rows()) {
    throw MdnError("assemble_design: metadata has " + std::to_string(metadata.rows()) +
                   " rows but labels have " + std::to_string(labels->rows()));
  }
  const std::size_t label_width = labels ? labels->cols() : 0;
  const std::size_t offset = include_intercept ? 1 : 0;
  Matrix x(metadata.rows(), offset + metadata.cols() + label_width);
  for (std::size_t r = 0; r < metadata.rows(); ++r) {
    if (include_intercept) x(r, 0) = 1.0;
    for (std::size_t c = 0; c < metadata.cols(); ++c) x(r, offset + c) = metadata(r, c);
    for (std::size_t c = 0; c < label_width; ++c)
      x(r, offset + metadata.cols() + c) = (*labels)(r, c);
  }
  return x;
}

MdnState precompute_sigma_inv(const Matrix& x_full, const Matrix* labels_full,
                              const MdnConfig& cfg) {
  cfg.validate();
  if (x_full.rows() != cfg.n_total) {
    throw MdnError("precompute_sigma_inv: metadata has " + std::to_string(x_full.rows()) +
                   " rows, config says N = " + std::to_string(cfg.n_total));
  }
  if (cfg.control_labels != (labels_full != nullptr)) {
    throw MdnError(cfg.control_labels
                       ? "precompute_sigma_inv: label control requested but no labels given"
                       : "precompute_sigma_inv: labels given but label control is off");
  }

  MdnState state;
  state.intercept = cfg.include_intercept;
  state.k_meta = x_full.cols();
  state.label_width = labels_full ? labels_full->cols() : 0;

  const Matrix design = assemble_design(x_full, labels_full, cfg.include_intercept);
  try {
    SpdInverse inv = spd_inverse(gram(design));
    state.sigma_inv = std::move(inv.inverse);
    state.jitter_used = inv.jitter_used;
  } catch (const LinalgError& e) {
    throw MdnError(std::string(e.what()) +
                   "; drop a collinear metadata column or disable intercept");
  }
  if (cfg.feature_count > 0) state.beta = Matrix(state.design_width(), cfg.feature_count);
  return state;
}

Matrix fit_beta_full(const Matrix& x, const Matrix& f) {
  if (x.rows() != f.rows()) {
    throw MdnError("fit_beta_full: row mismatch " + x.shape_string() + " vs " + f.shape_string());
  }
  Matrix sigma_inv;
  try {
    sigma_inv = spd_inverse(gram(x)).inverse;
  } catch (const LinalgError& e) {
    throw MdnError(std::string("fit_beta_full: ") + e.what());
  }
  return matmul(sigma_inv, matmul_tn(x, f));
}

Matrix residualize_full(const Matrix& x, const Matrix& f) {
  const Matrix beta = fit_beta_full(x, f);
  return subtract_explained(x, f, beta, x.cols());
}

Matrix forward_train(MdnState& state, const Matrix& x_batch, const Matrix& f_batch,
                     const MdnConfig& cfg) {
  check_layout(state, x_batch, f_batch, "forward_train");
  const double scale = static_cast<double>(cfg.n_total) / static_cast<double>(x_batch.rows());

  Matrix batch_beta = matmul(state.sigma_inv, matmul_tn(x_batch, f_batch));
  for (double& v : batch_beta.values()) v *= scale;

  Matrix out = subtract_explained(x_batch, f_batch, batch_beta, state.subtract_width());

  if (state.beta.empty()) state.beta = Matrix(state.design_width(), f_batch.cols());
  if (state.beta.cols() != f_batch.cols()) {
    throw MdnError("forward_train: feature width changed from " +
                   std::to_string(state.beta.cols()) + " to " + std::to_string(f_batch.cols()));
  }
  const double eta = cfg.momentum_eta;
  auto running = state.beta.values();
  auto fresh = batch_beta.values();
  for (std::size_t i = 0; i < running.size(); ++i) {
    running[i] = eta * fresh[i] + (1.0 - eta) * running[i];
  }
  ++state.batch_index;
  state.trained = true;
  return out;
}

Matrix forward_eval(const MdnState& state, const Matrix& x_batch, const Matrix& f_batch) {
  if (!state.trained) throw MdnError("MDN evaluated before any training batch");
  check_layout(state, x_batch, f_batch, "forward_eval");
  if (state.beta.cols() != f_batch.cols()) {
    throw MdnError("forward_eval: state holds " + std::to_string(state.beta.cols()) +
                   " features, batch has " + std::to_string(f_batch.cols()));
  }
  return subtract_explained(x_batch, f_batch, state.beta, state.subtract_width());
}

Matrix backward(const Matrix& x_batch, const Matrix& grad_out, const MdnState& state,
                const MdnConfig& cfg) {
  check_layout(state, x_batch, grad_out, "backward");
  const std::size_t s = state.subtract_width();
  const double scale = static_cast<double>(cfg.n_total) / static_cast<double>(x_batch.rows());

  using namespace detail;
  // X_sᵀ·g is s×C; Σ⁻¹[s,:]ᵀ maps it to K̃×C; X̂ brings it back to M×C.
  const RowMat projected = leading_cols(x_batch, s).transpose() * view(grad_out);
  const ConstMap sigma_s(state.sigma_inv.data(), ix(s), ix(state.sigma_inv.cols()));
  const RowMat coeff = scale * (sigma_s.transpose() * projected);

  Matrix out = grad_out;
  view(out).noalias() -= view(x_batch) * coeff;
  return out;
}

}  // namespace mdn
