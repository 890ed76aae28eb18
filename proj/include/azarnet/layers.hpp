#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "azarnet/rng.hpp"
#include "azarnet/tensor.hpp"

namespace azarnet {

enum class Mode { Train, Infer };

// Combined L1 + L2 penalty: l1 * sum|v| + l2 * sum v^2.
struct Regularizer {
  double l1 = 0.0;
  double l2 = 0.0;

  bool active() const noexcept { return l1 != 0.0 || l2 != 0.0; }
};

template <typename T>
struct ParamRef {
  std::string name;
  BasicTensor<T>* value = nullptr;
  BasicTensor<T>* grad = nullptr;  // null for running statistics
  bool trainable() const noexcept { return grad != nullptr; }
};

// A differentiable stage. All tensors carry the batch on axis 0; shapes
// passed to output_shape() are per sample. backward() consumes the cache
// written by the most recent train-mode forward() and overwrites the
// layer's parameter gradients.
template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const noexcept { return name_; }

  virtual std::string kind() const = 0;
  // Row label in the architecture summary.
  virtual std::string label() const = 0;
  // Activation layers are part of the graph but not of the summary table.
  virtual bool listed() const { return true; }

  virtual Shape output_shape(const Shape& input) const = 0;
  virtual BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, Rng& rng) = 0;
  virtual BasicTensor<T> backward(const BasicTensor<T>& grad_out) = 0;

  // Trainable parameters followed by non-trainable state.
  virtual std::vector<ParamRef<T>> params() { return {}; }
  virtual std::size_t param_count() const { return 0; }

  // Kernel + activity penalty for the last train-mode forward.
  virtual double penalty() const { return 0.0; }

  virtual void clear_cache() {}

 private:
  std::string name_;
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels,
         Regularizer kernel_reg = {}, Regularizer activity_reg = {});

  std::string kind() const override { return "conv2d"; }
  std::string label() const override;
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, Rng& rng) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  std::vector<ParamRef<T>> params() override;
  std::size_t param_count() const override { return kernel.size() + bias.size(); }
  double penalty() const override;
  void clear_cache() override;

  std::size_t in_channels() const noexcept { return kernel.dim(2); }
  std::size_t out_channels() const noexcept { return kernel.dim(3); }

  BasicTensor<T> kernel;  // [3, 3, in, out]
  BasicTensor<T> bias;    // [out]
  BasicTensor<T> kernel_grad;
  BasicTensor<T> bias_grad;
  Regularizer kernel_reg;
  Regularizer activity_reg;
  // The first layer of a network has no upstream consumer for grad_in.
  bool propagate_input_grad = true;

 private:
  BasicTensor<T> input_;
  BasicTensor<T> output_;
  bool cached_ = false;
};

template <typename T>
class MaxPool2x2 final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  std::string kind() const override { return "maxpool"; }
  std::string label() const override { return "2D Max Pooling (2*2)"; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, Rng& rng) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void clear_cache() override;

  // Flat input index of each output's maximum; ties keep the first element
  // in row-major order.
  const std::vector<std::uint32_t>& argmax() const noexcept { return argmax_; }

 private:
  Shape input_shape_;
  std::vector<std::uint32_t> argmax_;
  bool cached_ = false;
};

template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  BatchNorm(std::string name, std::size_t channels, double momentum = 0.8, double epsilon = 1e-3);

  std::string kind() const override { return "batchnorm"; }
  std::string label() const override;
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, Rng& rng) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  std::vector<ParamRef<T>> params() override;
  // gamma, beta, running mean and running variance.
  std::size_t param_count() const override { return 4 * gamma.size(); }
  void clear_cache() override;

  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  BasicTensor<T> gamma_grad;
  BasicTensor<T> beta_grad;
  double momentum;
  double epsilon;

 private:
  BasicTensor<T> xhat_;
  std::vector<T> inv_std_;
  bool cached_ = false;
};

template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(std::string name, double rate);

  std::string kind() const override { return "dropout"; }
  std::string label() const override;
  Shape output_shape(const Shape& input) const override { return input; }
  // Train: inverted dropout with a fresh mask from rng. Infer: identity.
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, Rng& rng) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void clear_cache() override;

  double rate() const noexcept { return rate_; }

 private:
  double rate_;
  BasicTensor<T> mask_;  // 0 or 1/(1-rate)
  bool cached_ = false;
};

template <typename T>
class LeakyRelu final : public Layer<T> {
 public:
  LeakyRelu(std::string name, double alpha = 0.1) : Layer<T>(std::move(name)), alpha_(alpha) {}

  std::string kind() const override { return "leaky_relu"; }
  std::string label() const override { return "LeakyReLU"; }
  bool listed() const override { return false; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, Rng& rng) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void clear_cache() override;

  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
  BasicTensor<T> input_;
  bool cached_ = false;
};

template <typename T>
class Reshape final : public Layer<T> {
 public:
  Reshape(std::string name, Shape target) : Layer<T>(std::move(name)), target_(std::move(target)) {}

  std::string kind() const override { return "reshape"; }
  std::string label() const override { return "Reshape"; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, Rng& rng) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;

 private:
  Shape target_;
  Shape input_shape_;
};

// Reset-after GRU with separate input and recurrent biases. Gate blocks in
// the 3n axis are ordered update (z), reset (r), candidate (h).
template <typename T>
class Gru final : public Layer<T> {
 public:
  Gru(std::string name, std::size_t input_dim, std::size_t units, bool return_sequences,
      Regularizer kernel_reg = {}, Regularizer activity_reg = {});

  std::string kind() const override { return "gru"; }
  std::string label() const override;
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, Rng& rng) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  std::vector<ParamRef<T>> params() override;
  std::size_t param_count() const override {
    return kernel.size() + recurrent_kernel.size() + input_bias.size() + recurrent_bias.size();
  }
  double penalty() const override;
  void clear_cache() override;

  // Explicit initial state h0 of shape [B, units].
  BasicTensor<T> forward_from(const BasicTensor<T>& x, const BasicTensor<T>& h0, Mode mode);

  std::size_t units() const noexcept { return units_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  bool return_sequences() const noexcept { return return_sequences_; }

  BasicTensor<T> kernel;            // W [m, 3n]
  BasicTensor<T> recurrent_kernel;  // U [n, 3n]
  BasicTensor<T> input_bias;        // [3n]
  BasicTensor<T> recurrent_bias;    // [3n]
  BasicTensor<T> kernel_grad;
  BasicTensor<T> recurrent_kernel_grad;
  BasicTensor<T> input_bias_grad;
  BasicTensor<T> recurrent_bias_grad;
  Regularizer kernel_reg;
  Regularizer activity_reg;

 private:
  std::size_t input_dim_;
  std::size_t units_;
  bool return_sequences_;

  // Per-step caches, each [T, B, ...].
  BasicTensor<T> input_;
  std::vector<T> h_prev_;
  std::vector<T> z_;
  std::vector<T> r_;
  std::vector<T> cand_;
  std::vector<T> rec_cand_;  // h U_h + b_rh, before the reset gate
  BasicTensor<T> output_;
  bool cached_ = false;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, std::size_t in, std::size_t out, std::string label = {});

  std::string kind() const override { return "dense"; }
  std::string label() const override;
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, Rng& rng) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  std::vector<ParamRef<T>> params() override;
  std::size_t param_count() const override { return weights.size() + bias.size(); }
  void clear_cache() override;

  BasicTensor<T> weights;  // [in, out]
  BasicTensor<T> bias;     // [out]
  BasicTensor<T> weights_grad;
  BasicTensor<T> bias_grad;

 private:
  std::string label_;
  BasicTensor<T> input_;
  bool cached_ = false;
};

// Elementwise v > 0 ? v : alpha v.
template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, double alpha = 0.1);

// Row-wise softmax over the last axis with max subtraction.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

// Mean over rows of -sum_j d_j log(max(p_j, 1e-12)).
template <typename T>
double cross_entropy_loss(const BasicTensor<T>& probs, const BasicTensor<T>& targets);

// Fused softmax + cross-entropy gradient w.r.t. logits: (p - d) / B.
template <typename T>
BasicTensor<T> softmax_cross_entropy_grad(const BasicTensor<T>& probs,
                                          const BasicTensor<T>& targets);

// penalty = l1 * sum|v| + l2 * sum v^2.
template <typename T>
double regularizer_value(const Regularizer& reg, const BasicTensor<T>& v);

// Glorot-uniform fill: U(-l, l), l = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(BasicTensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

#define AZARNET_EXTERN_LAYERS(T)              \
  extern template class Conv2d<T>;            \
  extern template class MaxPool2x2<T>;        \
  extern template class BatchNorm<T>;         \
  extern template class Dropout<T>;           \
  extern template class LeakyRelu<T>;         \
  extern template class Reshape<T>;           \
  extern template class Gru<T>;               \
  extern template class Dense<T>;

AZARNET_EXTERN_LAYERS(float)
AZARNET_EXTERN_LAYERS(double)
#undef AZARNET_EXTERN_LAYERS

}  // namespace azarnet
