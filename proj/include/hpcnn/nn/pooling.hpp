#ifndef HPCNN_NN_POOLING_HPP
#define HPCNN_NN_POOLING_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "hpcnn/core/tensor.hpp"
#include "hpcnn/perf/parallel.hpp"

namespace hpcnn {

enum class PoolKind { Max, GlobalAvg };

template <typename T>
struct PoolForward {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // max pooling: flat input index per output element
};

/// Max pooling over window x window patches, or global average pooling to
/// N x C x 1 x 1 (window and stride ignored). Max ties resolve to the first
/// position in row-major window order.
template <typename T>
PoolForward<T> pool_forward(const Tensor<T>& x, PoolKind kind, std::size_t window = 2, std::size_t stride = 2) {
  const auto d = Shape4::of(x.shape());
  if (kind == PoolKind::GlobalAvg) {
    PoolForward<T> out{Tensor<T>(Shape{d.n, d.c, 1, 1}), {}};
    perf::parallel_for(d.n * d.c, [&](std::size_t nc) {
      const T* p = x.raw() + nc * d.plane();
      T acc = T(0);
      for (std::size_t i = 0; i < d.plane(); ++i) acc += p[i];
      out.output[nc] = acc / T(d.plane());
    });
    return out;
  }
  if (window < 1 || stride < 1) throw ArgumentError("pool window and stride must be >= 1");
  if (window > d.h || window > d.w)
    throw DimensionError("pool window " + std::to_string(window) + " larger than input " + x.shape().str());
  const std::size_t ho = (d.h - window) / stride + 1, wo = (d.w - window) / stride + 1;
  PoolForward<T> out{Tensor<T>(Shape{d.n, d.c, ho, wo}), std::vector<std::size_t>(d.n * d.c * ho * wo)};
  perf::parallel_for(d.n * d.c, [&](std::size_t nc) {
    const std::size_t in_off = nc * d.plane();
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = in_off + (oy * stride) * d.w + ox * stride;
        for (std::size_t wy = 0; wy < window; ++wy)
          for (std::size_t wx = 0; wx < window; ++wx) {
            const std::size_t idx = in_off + (oy * stride + wy) * d.w + ox * stride + wx;
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t o = (nc * ho + oy) * wo + ox;
        out.output[o] = x[best];
        out.argmax[o] = best;
      }
  });
  return out;
}

/// Routes max-pool gradients to the argmax input; spreads global-average
/// gradients uniformly as g / (H * W).
template <typename T>
Tensor<T> pool_backward(const Shape& input_shape, const PoolForward<T>& fwd, PoolKind kind,
                        const Tensor<T>& grad_out) {
  if (grad_out.shape() != fwd.output.shape())
    throw DimensionError("pool grad_out " + grad_out.shape().str() + " does not match " +
                         fwd.output.shape().str());
  const auto d = Shape4::of(input_shape);
  Tensor<T> g(input_shape);
  if (kind == PoolKind::GlobalAvg) {
    perf::parallel_for(d.n * d.c, [&](std::size_t nc) {
      const T v = grad_out[nc] / T(d.plane());
      T* p = g.raw() + nc * d.plane();
      for (std::size_t i = 0; i < d.plane(); ++i) p[i] = v;
    });
    return g;
  }
  const std::size_t per_plane = fwd.output.size() / (d.n * d.c);
  // Overlapping windows can share an argmax, so accumulate per plane.
  perf::parallel_for(d.n * d.c, [&](std::size_t nc) {
    for (std::size_t o = nc * per_plane; o < (nc + 1) * per_plane; ++o) g[fwd.argmax[o]] += grad_out[o];
  });
  return g;
}

}  // namespace hpcnn

#endif  // HPCNN_NN_POOLING_HPP
