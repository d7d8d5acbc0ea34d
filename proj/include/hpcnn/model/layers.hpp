#ifndef HPCNN_MODEL_LAYERS_HPP
#define HPCNN_MODEL_LAYERS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hpcnn/core/tensor.hpp"
#include "hpcnn/nn/activation.hpp"
#include "hpcnn/nn/batchnorm.hpp"
#include "hpcnn/nn/conv.hpp"
#include "hpcnn/nn/linear.hpp"
#include "hpcnn/nn/pooling.hpp"
#include "hpcnn/perf/autotune.hpp"

namespace hpcnn {

/// Trainable tensor owned by a layer, with its gradient slot.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T> grad;
  bool decay = true;  // weight decay applies (conv/linear weights only)
};

/// Non-trainable state that still belongs in a checkpoint.
template <typename T>
struct NamedBuffer {
  std::string name;
  Tensor<T>* value = nullptr;
};

/// A differentiable graph node. `forward` may keep pointers to its inputs;
/// they must stay alive until the matching `backward`.
template <typename T>
class Layer {
 public:
  Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t arity() const { return 1; }
  virtual Shape output_shape(std::span<const Shape> inputs) const = 0;
  virtual Tensor<T> forward(std::span<const Tensor<T>* const> inputs, Mode mode) = 0;
  /// Returns one gradient per input and overwrites the parameter gradients.
  virtual std::vector<Tensor<T>> backward(const Tensor<T>& grad_out) = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  virtual std::vector<NamedBuffer<T>> buffers() { return {}; }
  /// While frozen, piecewise-linear layers (ReLU, max pooling) reuse the
  /// branch chosen by the last unfrozen forward instead of re-deciding it, so
  /// the layer computes its local linear piece. Used by gradient checking.
  virtual void freeze_branches(bool) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    const Tensor<T>* in[] = {&x};
    return forward(std::span<const Tensor<T>* const>(in), mode);
  }

  /// Prefixes parameter and buffer names, e.g. "layer1.0.conv1".
  void set_name(std::string prefix) { prefix_ = std::move(prefix); rename(); }
  const std::string& name() const { return prefix_; }

 protected:
  virtual void rename() {}
  std::string qualified(std::string_view local) const {
    return prefix_.empty() ? std::string(local) : prefix_ + "." + std::string(local);
  }
  void expect_arity(std::span<const Shape> inputs) const {
    if (inputs.size() != arity())
      throw DimensionError(std::string(kind()) + " expects " + std::to_string(arity()) + " input(s), got " +
                           std::to_string(inputs.size()));
  }

 private:
  std::string prefix_;
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  using Layer<T>::forward;
  Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t pad, bool bias)
      : params_(ConvParams<T>::make(in, out, k, stride, pad, bias)) {
    weight_.value = &params_.weight;
    if (params_.bias) bias_.value = &*params_.bias;
    bias_.decay = false;
    rename();
  }

  std::string_view kind() const override { return "conv2d"; }
  ConvParams<T>& params() { return params_; }
  const ConvParams<T>& params() const { return params_; }

  /// Pins the kernel; otherwise every call asks the process autotuner.
  void force_strategy(std::optional<ConvStrategy> s) { forced_ = s; }
  std::optional<ConvStrategy> last_strategy() const { return last_; }

  Shape output_shape(std::span<const Shape> in) const override {
    this->expect_arity(in);
    return params_.output_shape(Shape4::of(in[0])).shape();
  }

  Tensor<T> forward(std::span<const Tensor<T>* const> in, Mode) override {
    input_ = in[0];
    const auto sig = perf::LayerSignature::of(Shape4::of(input_->shape()), params_);
    last_ = forced_ ? *forced_ : perf::autotune_select<T>(sig);
    return conv2d_forward(*input_, params_, *last_);
  }

  std::vector<Tensor<T>> backward(const Tensor<T>& grad_out) override {
    auto g = conv2d_backward(*input_, params_, *last_, grad_out);
    weight_.grad = std::move(g.weight);
    if (g.bias) bias_.grad = std::move(*g.bias);
    std::vector<Tensor<T>> out;
    out.push_back(std::move(g.input));
    return out;
  }

  std::vector<Parameter<T>*> parameters() override {
    if (params_.bias) return {&weight_, &bias_};
    return {&weight_};
  }

 protected:
  void rename() override {
    weight_.name = this->qualified("weight");
    bias_.name = this->qualified("bias");
  }

 private:
  ConvParams<T> params_;
  Parameter<T> weight_, bias_;
  const Tensor<T>* input_ = nullptr;
  std::optional<ConvStrategy> forced_;
  std::optional<ConvStrategy> last_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  using Layer<T>::forward;
  explicit BatchNorm2d(std::size_t channels) : state_(BatchNormState<T>::make(channels)) {
    gamma_.value = &state_.gamma;
    beta_.value = &state_.beta;
    gamma_.decay = beta_.decay = false;
    rename();
  }

  std::string_view kind() const override { return "batchnorm2d"; }
  BatchNormState<T>& state() { return state_; }

  /// When false, train-mode passes leave the running statistics untouched.
  void set_track_running_stats(bool on) { track_ = on; }

  Shape output_shape(std::span<const Shape> in) const override {
    this->expect_arity(in);
    const auto d = Shape4::of(in[0]);
    if (d.c != state_.channels())
      throw DimensionError("batchnorm2d over " + std::to_string(state_.channels()) + " channels got " + in[0].str());
    return in[0];
  }

  Tensor<T> forward(std::span<const Tensor<T>* const> in, Mode mode) override {
    mode_ = mode;
    cache_ = batchnorm_forward(*in[0], state_, mode);
    if (cache_->update && track_) apply_update(state_, std::move(*cache_->update));
    cache_->update.reset();
    return std::move(cache_->output);
  }

  std::vector<Tensor<T>> backward(const Tensor<T>& grad_out) override {
    auto g = batchnorm_backward(*cache_, state_, mode_, grad_out);
    gamma_.grad = std::move(g.gamma);
    beta_.grad = std::move(g.beta);
    std::vector<Tensor<T>> out;
    out.push_back(std::move(g.input));
    return out;
  }

  std::vector<Parameter<T>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<NamedBuffer<T>> buffers() override {
    return {{this->qualified("running_mean"), &state_.running_mean},
            {this->qualified("running_var"), &state_.running_var}};
  }

 protected:
  void rename() override {
    gamma_.name = this->qualified("weight");
    beta_.name = this->qualified("bias");
  }

 private:
  BatchNormState<T> state_;
  Parameter<T> gamma_, beta_;
  std::optional<BatchNormForward<T>> cache_;
  Mode mode_ = Mode::Train;
  bool track_ = true;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  using Layer<T>::forward;
  std::string_view kind() const override { return "relu"; }
  Shape output_shape(std::span<const Shape> in) const override {
    this->expect_arity(in);
    return in[0];
  }
  Tensor<T> forward(std::span<const Tensor<T>* const> in, Mode) override {
    input_ = in[0];
    if (!frozen_) return relu(*input_);
    Tensor<T> y(input_->shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = frozen_mask_[i] ? (*input_)[i] : T(0);
    return y;
  }
  std::vector<Tensor<T>> backward(const Tensor<T>& grad_out) override {
    std::vector<Tensor<T>> out;
    out.push_back(relu_backward(*input_, grad_out));
    return out;
  }
  void freeze_branches(bool on) override {
    if (on && !frozen_) {
      frozen_mask_.resize(input_->size());
      for (std::size_t i = 0; i < input_->size(); ++i) frozen_mask_[i] = (*input_)[i] > T(0);
    }
    frozen_ = on;
  }

 private:
  const Tensor<T>* input_ = nullptr;
  bool frozen_ = false;
  std::vector<unsigned char> frozen_mask_;
};

template <typename T>
class Pool2d final : public Layer<T> {
 public:
  using Layer<T>::forward;
  explicit Pool2d(PoolKind kind, std::size_t window = 2, std::size_t stride = 2)
      : kind_(kind), window_(window), stride_(stride) {}

  std::string_view kind() const override { return kind_ == PoolKind::Max ? "maxpool2d" : "global_avg_pool"; }

  Shape output_shape(std::span<const Shape> in) const override {
    this->expect_arity(in);
    const auto d = Shape4::of(in[0]);
    if (kind_ == PoolKind::GlobalAvg) return Shape{d.n, d.c, 1, 1};
    if (window_ > d.h || window_ > d.w)
      throw DimensionError("pool window " + std::to_string(window_) + " larger than input " + in[0].str());
    return Shape{d.n, d.c, (d.h - window_) / stride_ + 1, (d.w - window_) / stride_ + 1};
  }

  Tensor<T> forward(std::span<const Tensor<T>* const> in, Mode) override {
    input_shape_ = in[0]->shape();
    if (frozen_ && kind_ == PoolKind::Max) {
      for (std::size_t o = 0; o < cache_.output.size(); ++o) cache_.output[o] = (*in[0])[cache_.argmax[o]];
      return cache_.output;
    }
    cache_ = pool_forward(*in[0], kind_, window_, stride_);
    return cache_.output;
  }

  std::vector<Tensor<T>> backward(const Tensor<T>& grad_out) override {
    std::vector<Tensor<T>> out;
    out.push_back(pool_backward(input_shape_, cache_, kind_, grad_out));
    return out;
  }
  void freeze_branches(bool on) override { frozen_ = on; }

 private:
  bool frozen_ = false;
  PoolKind kind_;
  std::size_t window_, stride_;
  Shape input_shape_;
  PoolForward<T> cache_;
};

/// N x C x H x W -> N x (C*H*W).
template <typename T>
class Flatten final : public Layer<T> {
 public:
  using Layer<T>::forward;
  std::string_view kind() const override { return "flatten"; }
  Shape output_shape(std::span<const Shape> in) const override {
    this->expect_arity(in);
    return Shape{in[0][0], in[0].numel() / in[0][0]};
  }
  Tensor<T> forward(std::span<const Tensor<T>* const> in, Mode) override {
    input_shape_ = in[0]->shape();
    const Shape s = in[0]->shape();
    return in[0]->reshape(Shape{s[0], s.numel() / s[0]});
  }
  std::vector<Tensor<T>> backward(const Tensor<T>& grad_out) override {
    std::vector<Tensor<T>> out;
    out.push_back(grad_out.reshape(input_shape_));
    return out;
  }

 private:
  Shape input_shape_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  using Layer<T>::forward;
  Linear(std::size_t in, std::size_t out) : weight_t_(Shape{in, out}), bias_t_(Shape{out}) {
    weight_.value = &weight_t_;
    bias_.value = &bias_t_;
    bias_.decay = false;
    rename();
  }

  std::string_view kind() const override { return "linear"; }
  Tensor<T>& weight() { return weight_t_; }
  Tensor<T>& bias() { return bias_t_; }

  Shape output_shape(std::span<const Shape> in) const override {
    this->expect_arity(in);
    if (in[0].rank() != 2 || in[0][1] != weight_t_.dim(0))
      throw DimensionError("linear expects [N x " + std::to_string(weight_t_.dim(0)) + "], got " + in[0].str());
    return Shape{in[0][0], weight_t_.dim(1)};
  }

  Tensor<T> forward(std::span<const Tensor<T>* const> in, Mode) override {
    input_ = in[0];
    return linear_forward(*input_, weight_t_, bias_t_);
  }

  std::vector<Tensor<T>> backward(const Tensor<T>& grad_out) override {
    auto g = linear_backward(*input_, weight_t_, grad_out);
    weight_.grad = std::move(g.weight);
    bias_.grad = std::move(g.bias);
    std::vector<Tensor<T>> out;
    out.push_back(std::move(g.input));
    return out;
  }

  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

 protected:
  void rename() override {
    weight_.name = this->qualified("weight");
    bias_.name = this->qualified("bias");
  }

 private:
  Tensor<T> weight_t_, bias_t_;
  Parameter<T> weight_, bias_;
  const Tensor<T>* input_ = nullptr;
};

/// Residual join: elementwise sum of the main path and the skip path.
template <typename T>
class Add final : public Layer<T> {
 public:
  using Layer<T>::forward;
  std::string_view kind() const override { return "add"; }
  std::size_t arity() const override { return 2; }

  Shape output_shape(std::span<const Shape> in) const override {
    this->expect_arity(in);
    if (in[0] != in[1])
      throw DimensionError("residual add of mismatched shapes " + in[0].str() + " and " + in[1].str());
    return in[0];
  }

  Tensor<T> forward(std::span<const Tensor<T>* const> in, Mode) override {
    if (in[0]->shape() != in[1]->shape())
      throw DimensionError("residual add of mismatched shapes " + in[0]->shape().str() + " and " +
                           in[1]->shape().str());
    Tensor<T> out(in[0]->shape());
    const T* a = in[0]->raw();
    const T* b = in[1]->raw();
    perf::parallel_for_ranges(out.size(), [&](perf::Range r) {
      for (std::size_t i = r.begin; i < r.end; ++i) out[i] = a[i] + b[i];
    });
    return out;
  }

  std::vector<Tensor<T>> backward(const Tensor<T>& grad_out) override { return {grad_out, grad_out}; }
};

}  // namespace hpcnn

#endif  // HPCNN_MODEL_LAYERS_HPP
