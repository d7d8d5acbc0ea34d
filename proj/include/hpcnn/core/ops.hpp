#ifndef HPCNN_CORE_OPS_HPP
#define HPCNN_CORE_OPS_HPP

#include <algorithm>
#include <cstddef>
#include <limits>

#include "hpcnn/core/gemm.hpp"
#include "hpcnn/perf/parallel.hpp"
#include "hpcnn/core/tensor.hpp"

namespace hpcnn {

/// Matrix product of two rank-2 tensors.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul shape mismatch: " + a.shape().str() + " x " + b.shape().str());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c(Shape{m, n});
  gemm<T>(m, n, k, {a.raw(), k}, {b.raw(), n}, c.raw(), n);
  return c;
}

/// Applies f to every element; the result has the shape of t.
template <typename T, typename F>
Tensor<T> elementwise_map(const Tensor<T>& t, F&& f) {
  Tensor<T> out(t.shape());
  const T* src = t.raw();
  T* dst = out.raw();
  perf::parallel_for_ranges(t.size(), [&](perf::Range r) {
    for (std::size_t i = r.begin; i < r.end; ++i) dst[i] = f(src[i]);
  });
  return out;
}

enum class ReduceOp { Sum, Mean, Max };

/// Reduces `axis` away. Each output element folds its slice in index order.
template <typename T>
Tensor<T> reduce(const Tensor<T>& t, std::size_t axis, ReduceOp op) {
  if (axis >= t.rank())
    throw ArgumentError("reduce axis " + std::to_string(axis) + " out of range for rank " +
                        std::to_string(t.rank()));
  const auto& dims = t.shape().dims();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= dims[i];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) inner *= dims[i];
  const std::size_t len = dims[axis];

  std::vector<std::size_t> out_dims;
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (i != axis) out_dims.push_back(dims[i]);
  if (out_dims.empty()) out_dims.push_back(1);
  Tensor<T> out{Shape(out_dims)};

  const T* src = t.raw();
  T* dst = out.raw();
  perf::parallel_for(outer * inner, [&](std::size_t idx) {
    const std::size_t o = idx / inner, i = idx % inner;
    const T* base = src + o * len * inner + i;
    T acc = op == ReduceOp::Max ? -std::numeric_limits<T>::infinity() : T(0);
    for (std::size_t j = 0; j < len; ++j) {
      const T v = base[j * inner];
      acc = op == ReduceOp::Max ? std::max(acc, v) : acc + v;
    }
    dst[idx] = op == ReduceOp::Mean ? acc / T(len) : acc;
  });
  return out;
}

}  // namespace hpcnn

#endif  // HPCNN_CORE_OPS_HPP
