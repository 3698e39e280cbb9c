#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mdn/linalg.hpp"
#include "mdn/metadata_norm.hpp"
#include "mdn/rng.hpp"

namespace mdn::nn {

class NnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { Train, Eval };

enum class LayerKind { Conv2d, Dense, Relu, Sigmoid, BatchNorm, GroupNorm, Mdn };

/// Arithmetic used inside the conv and dense matrix products. Parameters,
/// activations and gradients stay double either way.
enum class GemmPrecision { F64, F32 };

const char* to_string(LayerKind kind);

/// Per-sample activation shape. Activations travel as M × (C·H·W) matrices,
/// channel-major within a row; dense features use H = W = 1.
struct Shape {
  std::size_t channels = 0;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const noexcept { return channels * height * width; }
  std::size_t spatial() const noexcept { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// What a layer may need to know about the batch besides its input.
struct BatchContext {
  Mode mode = Mode::Train;
  const Matrix* design = nullptr;  ///< M × K̃ MDN design rows of this batch
};

struct Param {
  std::string name;
  Matrix* value;
  Matrix* grad;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual Shape input_shape() const = 0;
  virtual Shape output_shape() const = 0;

  virtual Matrix forward(const Matrix& in, const BatchContext& ctx) = 0;
  /// Accumulates parameter gradients and returns the gradient w.r.t. the
  /// input of the most recent forward call.
  virtual Matrix backward(const Matrix& grad_out) = 0;

  virtual std::vector<Param> params() { return {}; }
  /// Non-trainable tensors that still belong in a checkpoint.
  virtual std::vector<Matrix*> buffers() { return {}; }
};

/// Valid-padding, stride-1 cross-correlation.
class Conv2d final : public Layer {
 public:
  Conv2d(Shape input, std::size_t out_channels, std::size_t kernel, Rng& rng);

  LayerKind kind() const override { return LayerKind::Conv2d; }
  Shape input_shape() const override { return in_; }
  Shape output_shape() const override { return out_; }
  Matrix forward(const Matrix& in, const BatchContext& ctx) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Param> params() override;

  /// The first layer of a network has no use for its input gradient.
  void set_skip_input_grad(bool skip) { skip_input_grad_ = skip; }
  void set_precision(GemmPrecision p) { precision_ = p; }
  std::size_t kernel() const noexcept { return kernel_; }

  Matrix weight;  ///< out_channels × (in_channels·k·k)
  Matrix bias;    ///< 1 × out_channels
  Matrix weight_grad;
  Matrix bias_grad;

 private:
  template <class T>
  void im2col(const double* image, T* cols) const;
  template <class T>
  void col2im(const T* cols, double* image) const;
  template <class T>
  Matrix forward_as(const Matrix& in);
  template <class T>
  Matrix backward_as(const Matrix& grad_out);

  Shape in_;
  Shape out_;
  std::size_t kernel_;
  bool skip_input_grad_ = false;
  GemmPrecision precision_ = GemmPrecision::F64;
  Matrix input_;
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in_features, std::size_t out_features, Rng& rng);

  LayerKind kind() const override { return LayerKind::Dense; }
  Shape input_shape() const override { return {weight.cols(), 1, 1}; }
  Shape output_shape() const override { return {weight.rows(), 1, 1}; }
  Matrix forward(const Matrix& in, const BatchContext& ctx) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Param> params() override;

  void set_precision(GemmPrecision p) { precision_ = p; }

  Matrix weight;  ///< out × in
  Matrix bias;    ///< 1 × out
  Matrix weight_grad;
  Matrix bias_grad;

 private:
  GemmPrecision precision_ = GemmPrecision::F64;
  std::size_t rows_ = 0;
  Matrix input_;
  std::vector<float> input_f32_;
};

class Relu final : public Layer {
 public:
  explicit Relu(Shape shape) : shape_(shape) {}
  LayerKind kind() const override { return LayerKind::Relu; }
  Shape input_shape() const override { return shape_; }
  Shape output_shape() const override { return shape_; }
  Matrix forward(const Matrix& in, const BatchContext& ctx) override;
  Matrix backward(const Matrix& grad_out) override;

 private:
  Shape shape_;
  Matrix output_;
};

class Sigmoid final : public Layer {
 public:
  explicit Sigmoid(Shape shape) : shape_(shape) {}
  LayerKind kind() const override { return LayerKind::Sigmoid; }
  Shape input_shape() const override { return shape_; }
  Shape output_shape() const override { return shape_; }
  Matrix forward(const Matrix& in, const BatchContext& ctx) override;
  Matrix backward(const Matrix& grad_out) override;

 private:
  Shape shape_;
  Matrix output_;
};

/// Per-channel standardization with batch statistics in train mode and
/// running statistics in eval mode, followed by a learnable affine map.
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(Shape shape, double eps = 1e-5, double momentum = 0.1);

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  Shape input_shape() const override { return shape_; }
  Shape output_shape() const override { return shape_; }
  Matrix forward(const Matrix& in, const BatchContext& ctx) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Param> params() override;
  std::vector<Matrix*> buffers() override { return {&running_mean, &running_var, &tracked}; }

  Matrix gamma, beta, gamma_grad, beta_grad;
  Matrix running_mean, running_var;
  Matrix tracked;  ///< 1×1; nonzero once a train batch has been seen

 private:
  Shape shape_;
  double eps_;
  double momentum_;
  Matrix normalized_;
  std::vector<double> inv_std_;
  bool last_train_ = false;
};

/// Per-sample standardization over channel groups, then per-channel affine.
class GroupNorm final : public Layer {
 public:
  GroupNorm(Shape shape, std::size_t groups, double eps = 1e-5);

  LayerKind kind() const override { return LayerKind::GroupNorm; }
  Shape input_shape() const override { return shape_; }
  Shape output_shape() const override { return shape_; }
  Matrix forward(const Matrix& in, const BatchContext& ctx) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Param> params() override;

  std::size_t groups() const noexcept { return groups_; }

  Matrix gamma, beta, gamma_grad, beta_grad;

 private:
  Shape shape_;
  std::size_t groups_;
  double eps_;
  Matrix normalized_;
  std::vector<double> inv_std_;  ///< M × groups
};

/// Metadata normalization on the flattened activation block.
class MdnLayer final : public Layer {
 public:
  MdnLayer(Shape shape, MdnConfig cfg, MdnState state);

  LayerKind kind() const override { return LayerKind::Mdn; }
  Shape input_shape() const override { return shape_; }
  Shape output_shape() const override { return shape_; }
  Matrix forward(const Matrix& in, const BatchContext& ctx) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Matrix*> buffers() override { return {&state_.sigma_inv, &state_.beta}; }

  const MdnState& state() const noexcept { return state_; }
  MdnState& state() noexcept { return state_; }
  const MdnConfig& config() const noexcept { return cfg_; }

 private:
  Shape shape_;
  MdnConfig cfg_;
  MdnState state_;
  Matrix design_;
  bool last_train_ = false;
};

struct LossResult {
  double loss = 0.0;
  Matrix grad;  ///< d loss / d probabilities, same shape as the input
};

/// Mean binary cross-entropy on probabilities clamped to [1e-7, 1 − 1e-7].
LossResult bce_loss(const Matrix& probabilities, std::span<const double> targets);

/// Ordered layer sequence with an optional feature tap (the output of one
/// layer recorded on every forward pass).
class LayerStack {
 public:
  void add(std::unique_ptr<Layer> layer);
  void set_tap(std::size_t layer_index) { tap_ = layer_index; }
  std::size_t tap_index() const noexcept { return tap_; }

  Matrix forward(const Matrix& input, const BatchContext& ctx);
  void backward(const Matrix& grad_out);
  void zero_grad();

  std::vector<Param> params();
  const Matrix& tapped() const noexcept { return tapped_; }

  std::size_t size() const noexcept { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i); }
  const Layer& at(std::size_t i) const { return *layers_.at(i); }
  std::size_t count(LayerKind kind) const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::size_t tap_ = static_cast<std::size_t>(-1);
  Matrix tapped_;
};

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 1e-3;
  double momentum = 0.9;  ///< SGD only
  double beta1 = 0.9;     ///< Adam only
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Optimizer state for one LayerStack: velocity (SGD) or moment buffers (Adam).
class TrainState {
 public:
  explicit TrainState(OptimizerConfig cfg) : cfg_(cfg) {}

  /// Classical momentum: v ← μ·v + g, p ← p − lr·v.
  void sgd_step(std::span<const Param> params, double lr, double momentum);
  void adam_step(std::span<const Param> params);
  void step(std::span<const Param> params);

  const OptimizerConfig& config() const noexcept { return cfg_; }
  std::size_t iteration() const noexcept { return iteration_; }
  std::size_t epoch = 0;
  Mode mode = Mode::Train;

 private:
  void ensure_buffers(std::span<const Param> params, std::vector<Matrix>& buffers);

  OptimizerConfig cfg_;
  std::size_t iteration_ = 0;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
};

}  // namespace mdn::nn
