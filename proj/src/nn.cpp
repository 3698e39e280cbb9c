#include "mdn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "eigen_view.hpp"

namespace mdn::nn {

namespace {

using detail::ConstMap;
template <class T>
using ConstMapOf = Eigen::Map<const detail::RowMatOf<T>>;
using detail::RowMatOf;
using detail::ix;
using detail::Map;
using detail::view;

void check_width(const Matrix& in, std::size_t expected, const char* layer) {
  if (in.cols() != expected) {
    throw NnError(std::string(layer) + ": expected " + std::to_string(expected) +
                  " features per sample, got " + in.shape_string());
  }
}

void check_same_shape(const Matrix& grad, const Matrix& reference, const char* layer) {
  if (grad.rows() != reference.rows() || grad.cols() != reference.cols()) {
    throw NnError(std::string(layer) + ": gradient shape " + grad.shape_string() +
                  " does not match forward output " + reference.shape_string());
  }
}

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
}

// Shared backward for BN/GN: given x̂, 1/σ and dx̂ over a set of n elements,
//   dx = (1/σ)/n · (n·dx̂ − Σdx̂ − x̂·Σ(dx̂·x̂)).
struct NormSums {
  double sum_dxhat = 0.0;
  double sum_dxhat_xhat = 0.0;
};

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::GroupNorm: return "groupnorm";
    case LayerKind::Mdn: return "mdn";
  }
  return "unknown";
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(Shape input, std::size_t out_channels, std::size_t kernel, Rng& rng)
    : in_(input), kernel_(kernel) {
  if (kernel == 0 || kernel > input.height || kernel > input.width) {
    throw NnError("Conv2d: kernel " + std::to_string(kernel) + " does not fit the input");
  }
  out_ = {out_channels, input.height - kernel + 1, input.width - kernel + 1};
  const std::size_t fan_in = input.channels * kernel * kernel;
  weight = Matrix(out_channels, fan_in);
  bias = Matrix(1, out_channels);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  fill_uniform(weight, bound, rng);
  fill_uniform(bias, bound, rng);
  weight_grad = Matrix(out_channels, fan_in);
  bias_grad = Matrix(1, out_channels);
}

template <class T>
void Conv2d::im2col(const double* image, T* cols) const {
  const std::size_t k = kernel_;
  const std::size_t ow = out_.width;
  const std::size_t positions = out_.spatial();
  for (std::size_t c = 0; c < in_.channels; ++c) {
    const double* plane = image + c * in_.spatial();
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* dst = cols + ((c * k + ki) * k + kj) * positions;
        for (std::size_t oy = 0; oy < out_.height; ++oy) {
          const double* src = plane + (oy + ki) * in_.width + kj;
          std::copy(src, src + ow, dst + oy * ow);
        }
      }
    }
  }
}

template <class T>
void Conv2d::col2im(const T* cols, double* image) const {
  const std::size_t k = kernel_;
  const std::size_t ow = out_.width;
  const std::size_t positions = out_.spatial();
  for (std::size_t c = 0; c < in_.channels; ++c) {
    double* plane = image + c * in_.spatial();
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* src = cols + ((c * k + ki) * k + kj) * positions;
        for (std::size_t oy = 0; oy < out_.height; ++oy) {
          double* row = plane + (oy + ki) * in_.width + kj;
          const T* s = src + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) row[ox] += s[ox];
        }
      }
    }
  }
}

Matrix Conv2d::forward(const Matrix& in, const BatchContext&) {
  check_width(in, in_.size(), "conv2d");
  input_ = in;
  return precision_ == GemmPrecision::F32 ? forward_as<float>(in) : forward_as<double>(in);
}

template <class T>
Matrix Conv2d::forward_as(const Matrix& in) {
  Matrix out(in.rows(), out_.size());
  const std::size_t positions = out_.spatial();
  const std::size_t patch = weight.cols();
  const RowMatOf<T> w = view(weight).cast<T>();
  RowMatOf<T> cols(ix(patch), ix(positions));
  RowMatOf<T> product(ix(out_.channels), ix(positions));
  for (std::size_t s = 0; s < in.rows(); ++s) {
    im2col(in.data() + s * in.cols(), cols.data());
    Map out_map(out.data() + s * out.cols(), ix(out_.channels), ix(positions));
    if constexpr (std::is_same_v<T, double>) {
      out_map.noalias() = w * cols;
    } else {
      product.noalias() = w * cols;
      out_map = product.template cast<double>();
    }
    for (std::size_t c = 0; c < out_.channels; ++c) out_map.row(ix(c)).array() += bias(0, c);
  }
  return out;
}

Matrix Conv2d::backward(const Matrix& grad_out) {
  if (grad_out.rows() != input_.rows() || grad_out.cols() != out_.size()) {
    throw NnError("conv2d: gradient shape " + grad_out.shape_string() + " does not match output");
  }
  return precision_ == GemmPrecision::F32 ? backward_as<float>(grad_out) : backward_as<double>(grad_out);
}

template <class T>
Matrix Conv2d::backward_as(const Matrix& grad_out) {
  const std::size_t positions = out_.spatial();
  const std::size_t patch = weight.cols();
  Matrix grad_in = skip_input_grad_ ? Matrix() : Matrix(input_.rows(), in_.size());
  const RowMatOf<T> w = view(weight).cast<T>();
  RowMatOf<T> cols(ix(patch), ix(positions));
  RowMatOf<T> dcols(ix(patch), ix(positions));
  RowMatOf<T> g(ix(out_.channels), ix(positions));
  RowMatOf<T> wg_sample(ix(out_.channels), ix(patch));
  auto wg = view(weight_grad);
  for (std::size_t s = 0; s < input_.rows(); ++s) {
    im2col(input_.data() + s * input_.cols(), cols.data());
    ConstMap g_map(grad_out.data() + s * grad_out.cols(), ix(out_.channels), ix(positions));
    g = g_map.cast<T>();
    wg_sample.noalias() = g * cols.transpose();
    wg += wg_sample.template cast<double>();
    for (std::size_t c = 0; c < out_.channels; ++c) bias_grad(0, c) += g_map.row(ix(c)).sum();
    if (!skip_input_grad_) {
      dcols.noalias() = w.transpose() * g;
      col2im(dcols.data(), grad_in.data() + s * grad_in.cols());
    }
  }
  return grad_in;
}

std::vector<Param> Conv2d::params() {
  return {{"weight", &weight, &weight_grad}, {"bias", &bias, &bias_grad}};
}

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t in_features, std::size_t out_features, Rng& rng)
    : weight(out_features, in_features),
      bias(1, out_features),
      weight_grad(out_features, in_features),
      bias_grad(1, out_features) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  fill_uniform(weight, bound, rng);
  fill_uniform(bias, bound, rng);
}

Matrix Dense::forward(const Matrix& in, const BatchContext&) {
  check_width(in, weight.cols(), "dense");
  rows_ = in.rows();
  Matrix out(in.rows(), weight.rows());
  if (precision_ == GemmPrecision::F32) {
    input_ = Matrix();
    input_f32_.assign(in.values().begin(), in.values().end());
    ConstMapOf<float> x(input_f32_.data(), ix(in.rows()), ix(in.cols()));
    const RowMatOf<float> w = view(weight).cast<float>();
    const RowMatOf<float> product = x * w.transpose();
    view(out) = product.cast<double>();
  } else {
    input_ = in;
    input_f32_.clear();
    out = matmul_nt(in, weight);
  }
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bias(0, c);
  return out;
}

Matrix Dense::backward(const Matrix& grad_out) {
  if (grad_out.rows() != rows_ || grad_out.cols() != weight.rows()) {
    throw NnError("dense: gradient shape " + grad_out.shape_string() + " does not match output");
  }
  for (std::size_t r = 0; r < grad_out.rows(); ++r)
    for (std::size_t c = 0; c < grad_out.cols(); ++c) bias_grad(0, c) += grad_out(r, c);
  if (precision_ == GemmPrecision::F32) {
    const RowMatOf<float> g = view(grad_out).cast<float>();
    ConstMapOf<float> x(input_f32_.data(), ix(rows_), ix(weight.cols()));
    const RowMatOf<float> w = view(weight).cast<float>();
    const RowMatOf<float> wg = g.transpose() * x;
    view(weight_grad) += wg.cast<double>();
    const RowMatOf<float> gx = g * w;
    Matrix grad_in(rows_, weight.cols());
    view(grad_in) = gx.cast<double>();
    return grad_in;
  }
  view(weight_grad).noalias() += view(grad_out).transpose() * view(input_);
  return matmul(grad_out, weight);
}

std::vector<Param> Dense::params() {
  return {{"weight", &weight, &weight_grad}, {"bias", &bias, &bias_grad}};
}

// ---------------------------------------------------------------- activations

Matrix Relu::forward(const Matrix& in, const BatchContext&) {
  check_width(in, shape_.size(), "relu");
  output_ = in;
  for (double& v : output_.values()) v = v > 0.0 ? v : 0.0;
  return output_;
}

Matrix Relu::backward(const Matrix& grad_out) {
  check_same_shape(grad_out, output_, "relu");
  Matrix g = grad_out;
  auto gv = g.values();
  auto ov = output_.values();
  for (std::size_t i = 0; i < gv.size(); ++i)
    if (!(ov[i] > 0.0)) gv[i] = 0.0;
  return g;
}

Matrix Sigmoid::forward(const Matrix& in, const BatchContext&) {
  check_width(in, shape_.size(), "sigmoid");
  output_ = in;
  for (double& v : output_.values()) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  return output_;
}

Matrix Sigmoid::backward(const Matrix& grad_out) {
  check_same_shape(grad_out, output_, "sigmoid");
  Matrix g = grad_out;
  auto gv = g.values();
  auto ov = output_.values();
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= ov[i] * (1.0 - ov[i]);
  return g;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(Shape shape, double eps, double momentum)
    : gamma(1, shape.channels, 1.0),
      beta(1, shape.channels),
      gamma_grad(1, shape.channels),
      beta_grad(1, shape.channels),
      running_mean(1, shape.channels),
      running_var(1, shape.channels, 1.0),
      tracked(1, 1),
      shape_(shape),
      eps_(eps),
      momentum_(momentum) {}

Matrix BatchNorm::forward(const Matrix& in, const BatchContext& ctx) {
  check_width(in, shape_.size(), "batchnorm");
  const std::size_t m = in.rows();
  const std::size_t channels = shape_.channels;
  const std::size_t spatial = shape_.spatial();
  const double count = static_cast<double>(m * spatial);
  last_train_ = ctx.mode == Mode::Train;
  if (!last_train_ && tracked(0, 0) == 0.0) {
    throw NnError("batchnorm: evaluated before any training batch");
  }
  if (last_train_ && m * spatial < 2) {
    throw NnError("batchnorm: train mode needs more than one value per channel");
  }

  normalized_ = Matrix(m, in.cols());
  inv_std_.assign(channels, 0.0);
  Matrix out(m, in.cols());
  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (last_train_) {
      for (std::size_t s = 0; s < m; ++s) {
        const double* x = in.data() + s * in.cols() + c * spatial;
        for (std::size_t p = 0; p < spatial; ++p) mean += x[p];
      }
      mean /= count;
      for (std::size_t s = 0; s < m; ++s) {
        const double* x = in.data() + s * in.cols() + c * spatial;
        for (std::size_t p = 0; p < spatial; ++p) var += (x[p] - mean) * (x[p] - mean);
      }
      var /= count;
      running_mean(0, c) = (1.0 - momentum_) * running_mean(0, c) + momentum_ * mean;
      running_var(0, c) =
          (1.0 - momentum_) * running_var(0, c) + momentum_ * var * count / (count - 1.0);
    } else {
      mean = running_mean(0, c);
      var = running_var(0, c);
    }
    const double inv_std = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv_std;
    for (std::size_t s = 0; s < m; ++s) {
      const std::size_t base = s * in.cols() + c * spatial;
      for (std::size_t p = 0; p < spatial; ++p) {
        const double xhat = (in.data()[base + p] - mean) * inv_std;
        normalized_.data()[base + p] = xhat;
        out.data()[base + p] = gamma(0, c) * xhat + beta(0, c);
      }
    }
  }
  if (last_train_) tracked(0, 0) = 1.0;
  return out;
}

Matrix BatchNorm::backward(const Matrix& grad_out) {
  check_same_shape(grad_out, normalized_, "batchnorm");
  const std::size_t m = grad_out.rows();
  const std::size_t spatial = shape_.spatial();
  const double count = static_cast<double>(m * spatial);
  Matrix grad_in(m, grad_out.cols());
  for (std::size_t c = 0; c < shape_.channels; ++c) {
    NormSums sums;
    double sum_g = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      const std::size_t base = s * grad_out.cols() + c * spatial;
      for (std::size_t p = 0; p < spatial; ++p) {
        const double g = grad_out.data()[base + p];
        const double xhat = normalized_.data()[base + p];
        sum_g += g;
        sums.sum_dxhat_xhat += g * xhat;
      }
    }
    gamma_grad(0, c) += sums.sum_dxhat_xhat;
    beta_grad(0, c) += sum_g;
    const double gm = gamma(0, c);
    sums.sum_dxhat = gm * sum_g;
    sums.sum_dxhat_xhat *= gm;
    const double scale = inv_std_[c] / count;
    for (std::size_t s = 0; s < m; ++s) {
      const std::size_t base = s * grad_out.cols() + c * spatial;
      const double* go = grad_out.data() + base;
      const double* xhat = normalized_.data() + base;
      double* gi = grad_in.data() + base;
      if (last_train_) {
        for (std::size_t p = 0; p < spatial; ++p)
          gi[p] = scale * (count * gm * go[p] - sums.sum_dxhat - xhat[p] * sums.sum_dxhat_xhat);
      } else {
        for (std::size_t p = 0; p < spatial; ++p) gi[p] = inv_std_[c] * gm * go[p];
      }
    }
  }
  return grad_in;
}

std::vector<Param> BatchNorm::params() {
  return {{"gamma", &gamma, &gamma_grad}, {"beta", &beta, &beta_grad}};
}

// ---------------------------------------------------------------- GroupNorm

GroupNorm::GroupNorm(Shape shape, std::size_t groups, double eps)
    : gamma(1, shape.channels, 1.0),
      beta(1, shape.channels),
      gamma_grad(1, shape.channels),
      beta_grad(1, shape.channels),
      shape_(shape),
      groups_(groups),
      eps_(eps) {
  if (groups == 0 || shape.channels % groups != 0) {
    throw NnError("groupnorm: " + std::to_string(shape.channels) +
                  " channels are not divisible into " + std::to_string(groups) + " groups");
  }
}

Matrix GroupNorm::forward(const Matrix& in, const BatchContext&) {
  check_width(in, shape_.size(), "groupnorm");
  const std::size_t m = in.rows();
  const std::size_t per_group = shape_.channels / groups_;
  const std::size_t spatial = shape_.spatial();
  const std::size_t span_len = per_group * spatial;
  normalized_ = Matrix(m, in.cols());
  inv_std_.assign(m * groups_, 0.0);
  Matrix out(m, in.cols());
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t g = 0; g < groups_; ++g) {
      const std::size_t base = s * in.cols() + g * span_len;
      const double* x = in.data() + base;
      double mean = 0.0;
      for (std::size_t i = 0; i < span_len; ++i) mean += x[i];
      mean /= static_cast<double>(span_len);
      double var = 0.0;
      for (std::size_t i = 0; i < span_len; ++i) var += (x[i] - mean) * (x[i] - mean);
      var /= static_cast<double>(span_len);
      const double inv_std = 1.0 / std::sqrt(var + eps_);
      inv_std_[s * groups_ + g] = inv_std;
      for (std::size_t c = g * per_group; c < (g + 1) * per_group; ++c) {
        const std::size_t offset = s * in.cols() + c * spatial;
        const double* xc = in.data() + offset;
        double* xhat = normalized_.data() + offset;
        double* y = out.data() + offset;
        const double gm = gamma(0, c);
        const double bt = beta(0, c);
        for (std::size_t p = 0; p < spatial; ++p) {
          xhat[p] = (xc[p] - mean) * inv_std;
          y[p] = gm * xhat[p] + bt;
        }
      }
    }
  }
  return out;
}

Matrix GroupNorm::backward(const Matrix& grad_out) {
  check_same_shape(grad_out, normalized_, "groupnorm");
  const std::size_t m = grad_out.rows();
  const std::size_t per_group = shape_.channels / groups_;
  const std::size_t spatial = shape_.spatial();
  const double count = static_cast<double>(per_group * spatial);
  Matrix grad_in(m, grad_out.cols());
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t g = 0; g < groups_; ++g) {
      NormSums sums;
      for (std::size_t c = g * per_group; c < (g + 1) * per_group; ++c) {
        const std::size_t offset = s * grad_out.cols() + c * spatial;
        const double* go = grad_out.data() + offset;
        const double* xhat = normalized_.data() + offset;
        double sum_g = 0.0;
        double sum_gx = 0.0;
        for (std::size_t p = 0; p < spatial; ++p) {
          sum_g += go[p];
          sum_gx += go[p] * xhat[p];
        }
        gamma_grad(0, c) += sum_gx;
        beta_grad(0, c) += sum_g;
        sums.sum_dxhat += gamma(0, c) * sum_g;
        sums.sum_dxhat_xhat += gamma(0, c) * sum_gx;
      }
      const double scale = inv_std_[s * groups_ + g] / count;
      for (std::size_t c = g * per_group; c < (g + 1) * per_group; ++c) {
        const std::size_t offset = s * grad_out.cols() + c * spatial;
        const double* go = grad_out.data() + offset;
        const double* xhat = normalized_.data() + offset;
        double* gi = grad_in.data() + offset;
        const double gm = gamma(0, c);
        for (std::size_t p = 0; p < spatial; ++p)
          gi[p] = scale * (count * gm * go[p] - sums.sum_dxhat - xhat[p] * sums.sum_dxhat_xhat);
      }
    }
  }
  return grad_in;
}

std::vector<Param> GroupNorm::params() {
  return {{"gamma", &gamma, &gamma_grad}, {"beta", &beta, &beta_grad}};
}

// ---------------------------------------------------------------- MDN

MdnLayer::MdnLayer(Shape shape, MdnConfig cfg, MdnState state)
    : shape_(shape), cfg_(cfg), state_(std::move(state)) {
  cfg_.feature_count = shape.size();
  if (state_.beta.empty()) state_.beta = Matrix(state_.design_width(), shape.size());
}

Matrix MdnLayer::forward(const Matrix& in, const BatchContext& ctx) {
  check_width(in, shape_.size(), "mdn");
  if (ctx.design == nullptr) throw NnError("mdn: batch context carries no metadata design");
  last_train_ = ctx.mode == Mode::Train;
  if (last_train_) {
    design_ = *ctx.design;
    return forward_train(state_, design_, in, cfg_);
  }
  return forward_eval(state_, *ctx.design, in);
}

Matrix MdnLayer::backward(const Matrix& grad_out) {
  // Eval mode subtracts a constant, so the map is the identity.
  if (!last_train_) return grad_out;
  return mdn::backward(design_, grad_out, state_, cfg_);
}

// ---------------------------------------------------------------- loss

LossResult bce_loss(const Matrix& probabilities, std::span<const double> targets) {
  if (probabilities.cols() != 1 || probabilities.rows() != targets.size()) {
    throw NnError("bce_loss: expected " + std::to_string(targets.size()) +
                  "x1 probabilities, got " + probabilities.shape_string());
  }
  if (targets.empty()) throw NnError("bce_loss: empty batch");
  constexpr double kClamp = 1e-7;
  const double m = static_cast<double>(targets.size());
  LossResult result;
  result.grad = Matrix(probabilities.rows(), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double p = std::clamp(probabilities(i, 0), kClamp, 1.0 - kClamp);
    const double y = targets[i];
    result.loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    result.grad(i, 0) = (p - y) / (p * (1.0 - p)) / m;
  }
  result.loss /= m;
  return result;
}

// ---------------------------------------------------------------- LayerStack

void LayerStack::add(std::unique_ptr<Layer> layer) {
  if (!layers_.empty() && layers_.back()->output_shape().size() != layer->input_shape().size()) {
    throw NnError(std::string("LayerStack: ") + to_string(layer->kind()) + " expects " +
                  std::to_string(layer->input_shape().size()) + " inputs but previous layer gives " +
                  std::to_string(layers_.back()->output_shape().size()));
  }
  layers_.push_back(std::move(layer));
}

Matrix LayerStack::forward(const Matrix& input, const BatchContext& ctx) {
  Matrix act = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    act = layers_[i]->forward(act, ctx);
    if (i == tap_) tapped_ = act;
  }
  return act;
}

void LayerStack::backward(const Matrix& grad_out) {
  Matrix g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g);
    if (g.empty()) break;
  }
}

void LayerStack::zero_grad() {
  for (auto& p : params()) p.grad->fill(0.0);
}

std::vector<Param> LayerStack::params() {
  std::vector<Param> all;
  for (auto& layer : layers_) {
    for (auto& p : layer->params()) all.push_back(p);
  }
  return all;
}

std::size_t LayerStack::count(LayerKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      layers_.begin(), layers_.end(), [kind](const auto& l) { return l->kind() == kind; }));
}

// ---------------------------------------------------------------- optimizers

void TrainState::ensure_buffers(std::span<const Param> params, std::vector<Matrix>& buffers) {
  if (buffers.size() == params.size()) return;
  buffers.clear();
  for (const auto& p : params) buffers.emplace_back(p.value->rows(), p.value->cols());
}

void TrainState::sgd_step(std::span<const Param> params, double lr, double momentum) {
  ensure_buffers(params, first_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].value->values();
    auto grad = params[i].grad->values();
    auto velocity = first_[i].values();
    for (std::size_t j = 0; j < value.size(); ++j) {
      velocity[j] = momentum * velocity[j] + grad[j];
      value[j] -= lr * velocity[j];
    }
  }
  ++iteration_;
}

void TrainState::adam_step(std::span<const Param> params) {
  ensure_buffers(params, first_);
  ensure_buffers(params, second_);
  ++iteration_;
  const double t = static_cast<double>(iteration_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].value->values();
    auto grad = params[i].grad->values();
    auto m = first_[i].values();
    auto v = second_[i].values();
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * grad[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * grad[j] * grad[j];
      value[j] -= cfg_.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
}

void TrainState::step(std::span<const Param> params) {
  if (cfg_.kind == OptimizerKind::Sgd) {
    sgd_step(params, cfg_.learning_rate, cfg_.momentum);
  } else {
    adam_step(params);
  }
}

}  // namespace mdn::nn
