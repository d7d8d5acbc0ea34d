#ifndef HPCNN_NN_ACTIVATION_HPP
#define HPCNN_NN_ACTIVATION_HPP

#include "hpcnn/core/tensor.hpp"
#include "hpcnn/perf/parallel.hpp"

namespace hpcnn {

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  perf::parallel_for_ranges(x.size(), [&](perf::Range r) {
    for (std::size_t i = r.begin; i < r.end; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  });
  return y;
}

/// Passes grad where the forward input was strictly positive.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  if (x.shape() != grad_out.shape())
    throw DimensionError("relu grad_out " + grad_out.shape().str() + " does not match " + x.shape().str());
  Tensor<T> g(x.shape());
  perf::parallel_for_ranges(x.size(), [&](perf::Range r) {
    for (std::size_t i = r.begin; i < r.end; ++i) g[i] = x[i] > T(0) ? grad_out[i] : T(0);
  });
  return g;
}

}  // namespace hpcnn

#endif  // HPCNN_NN_ACTIVATION_HPP
