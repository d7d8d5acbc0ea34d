#ifndef HPCNN_NN_LINEAR_HPP
#define HPCNN_NN_LINEAR_HPP

#include "hpcnn/core/gemm.hpp"
#include "hpcnn/core/tensor.hpp"

namespace hpcnn {

template <typename T>
struct LinearGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

namespace detail {
template <typename T>
void check_linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(0) || b.dim(0) != w.dim(1))
    throw DimensionError("linear shape mismatch: x " + x.shape().str() + ", W " + w.shape().str() + ", b " +
                         b.shape().str());
}
}  // namespace detail

/// y = x W + b for x [N x D], W [D x K], b [K].
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::check_linear(x, w, b);
  const std::size_t n = x.dim(0), d = x.dim(1), k = w.dim(1);
  Tensor<T> y(Shape{n, k});
  for (std::size_t i = 0; i < n; ++i) std::copy(b.data().begin(), b.data().end(), y.raw() + i * k);
  gemm<T>(n, k, d, {x.raw(), d}, {w.raw(), k}, y.raw(), k, true);
  return y;
}

template <typename T>
LinearGrads<T> linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out) {
  const std::size_t n = x.dim(0), d = x.dim(1), k = w.dim(1);
  if (grad_out.shape() != Shape{n, k})
    throw DimensionError("linear grad_out " + grad_out.shape().str() + " does not match [" + std::to_string(n) +
                         "x" + std::to_string(k) + "]");
  LinearGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>(Shape{k})};
  gemm<T>(n, d, k, {grad_out.raw(), k}, {w.raw(), k, Trans::Yes}, g.input.raw(), d);
  gemm<T>(d, k, n, {x.raw(), d, Trans::Yes}, {grad_out.raw(), k}, g.weight.raw(), k);
  for (std::size_t j = 0; j < k; ++j) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += grad_out[i * k + j];
    g.bias[j] = acc;
  }
  return g;
}

}  // namespace hpcnn

#endif  // HPCNN_NN_LINEAR_HPP
