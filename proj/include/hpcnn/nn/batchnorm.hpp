#ifndef HPCNN_NN_BATCHNORM_HPP
#define HPCNN_NN_BATCHNORM_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "hpcnn/core/tensor.hpp"
#include "hpcnn/perf/parallel.hpp"

namespace hpcnn {

enum class Mode { Train, Eval };

/// Learned affine parameters plus the running statistics used in eval mode.
template <typename T>
struct BatchNormState {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  static BatchNormState make(std::size_t channels) {
    return {Tensor<T>(Shape{channels}, T(1)), Tensor<T>(Shape{channels}), Tensor<T>(Shape{channels}),
            Tensor<T>(Shape{channels}, T(1)), T(0.1), T(1e-5)};
  }

  std::size_t channels() const { return gamma.size(); }

  void validate() const {
    const Shape s{channels()};
    if (beta.shape() != s || running_mean.shape() != s || running_var.shape() != s)
      throw DimensionError("batch-norm state tensors disagree on channel count");
    if (!(eps > T(0))) throw ArgumentError("batch-norm epsilon must be positive");
  }
};

/// Running-statistics update produced by a train-mode forward pass.
template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;
};

template <typename T>
struct BatchNormForward {
  Tensor<T> output;
  Tensor<T> normalized;    // x_hat, kept for backward
  std::vector<T> inv_std;  // per channel
  std::optional<RunningStats<T>> update;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

/// Per-channel normalization over (N, H, W).
///
/// Train mode normalizes with the batch mean and population variance and
/// returns the momentum-blended running statistics (the running variance is
/// fed the unbiased batch variance). The caller decides whether to commit
/// them with `apply_update`. Eval mode reads the running statistics only.
template <typename T>
BatchNormForward<T> batchnorm_forward(const Tensor<T>& x, const BatchNormState<T>& st, Mode mode) {
  st.validate();
  const auto d = Shape4::of(x.shape());
  if (d.c != st.channels())
    throw DimensionError("batch norm over " + std::to_string(st.channels()) + " channels got input " +
                         x.shape().str());
  const std::size_t count = d.n * d.plane();
  if (mode == Mode::Train && count < 2)
    throw ArgumentError("train-mode batch norm needs at least two values per channel");

  BatchNormForward<T> out{Tensor<T>(x.shape()), Tensor<T>(x.shape()), std::vector<T>(d.c), std::nullopt};
  if (mode == Mode::Train) out.update = RunningStats<T>{Tensor<T>(Shape{d.c}), Tensor<T>(Shape{d.c})};

  perf::parallel_for(d.c, [&](std::size_t c) {
    T mean, var;
    if (mode == Mode::Train) {
      T sum = T(0);
      for (std::size_t n = 0; n < d.n; ++n) {
        const T* p = x.raw() + (n * d.c + c) * d.plane();
        for (std::size_t i = 0; i < d.plane(); ++i) sum += p[i];
      }
      mean = sum / T(count);
      T sq = T(0);
      for (std::size_t n = 0; n < d.n; ++n) {
        const T* p = x.raw() + (n * d.c + c) * d.plane();
        for (std::size_t i = 0; i < d.plane(); ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / T(count);
      const T unbiased = sq / T(count - 1);
      out.update->mean[c] = (T(1) - st.momentum) * st.running_mean[c] + st.momentum * mean;
      out.update->var[c] = (T(1) - st.momentum) * st.running_var[c] + st.momentum * unbiased;
    } else {
      mean = st.running_mean[c];
      var = st.running_var[c];
    }
    const T inv_std = T(1) / std::sqrt(var + st.eps);
    out.inv_std[c] = inv_std;
    const T g = st.gamma[c], b = st.beta[c];
    for (std::size_t n = 0; n < d.n; ++n) {
      const std::size_t off = (n * d.c + c) * d.plane();
      for (std::size_t i = 0; i < d.plane(); ++i) {
        const T xh = (x[off + i] - mean) * inv_std;
        out.normalized[off + i] = xh;
        out.output[off + i] = g * xh + b;
      }
    }
  });
  return out;
}

template <typename T>
void apply_update(BatchNormState<T>& st, RunningStats<T> update) {
  st.running_mean = std::move(update.mean);
  st.running_var = std::move(update.var);
}

/// Gradients of batchnorm_forward. `mode` must match the forward call:
/// train mode differentiates through the batch statistics, eval mode treats
/// the running statistics as constants.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormForward<T>& fwd, const BatchNormState<T>& st, Mode mode,
                                     const Tensor<T>& grad_out) {
  if (grad_out.shape() != fwd.normalized.shape())
    throw DimensionError("batch-norm grad_out " + grad_out.shape().str() + " does not match " +
                         fwd.normalized.shape().str());
  const auto d = Shape4::of(grad_out.shape());
  const T count = T(d.n * d.plane());
  BatchNormGrads<T> g{Tensor<T>(grad_out.shape()), Tensor<T>(Shape{d.c}), Tensor<T>(Shape{d.c})};
  perf::parallel_for(d.c, [&](std::size_t c) {
    T sum_g = T(0), sum_gx = T(0);
    for (std::size_t n = 0; n < d.n; ++n) {
      const std::size_t off = (n * d.c + c) * d.plane();
      for (std::size_t i = 0; i < d.plane(); ++i) {
        sum_g += grad_out[off + i];
        sum_gx += grad_out[off + i] * fwd.normalized[off + i];
      }
    }
    g.beta[c] = sum_g;
    g.gamma[c] = sum_gx;
    const T scale = st.gamma[c] * fwd.inv_std[c];
    for (std::size_t n = 0; n < d.n; ++n) {
      const std::size_t off = (n * d.c + c) * d.plane();
      for (std::size_t i = 0; i < d.plane(); ++i) {
        if (mode == Mode::Train)
          g.input[off + i] =
              scale * (grad_out[off + i] - sum_g / count - fwd.normalized[off + i] * sum_gx / count);
        else
          g.input[off + i] = scale * grad_out[off + i];
      }
    }
  });
  return g;
}

}  // namespace hpcnn

#endif  // HPCNN_NN_BATCHNORM_HPP
