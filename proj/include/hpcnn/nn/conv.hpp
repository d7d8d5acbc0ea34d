#ifndef HPCNN_NN_CONV_HPP
#define HPCNN_NN_CONV_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpcnn/core/gemm.hpp"
#include "hpcnn/perf/parallel.hpp"
#include "hpcnn/core/tensor.hpp"

namespace hpcnn {

/// The two convolution kernels: a direct loop nest over the convolution sum,
/// and im2col unrolling followed by one GEMM per batch item.
enum class ConvStrategy { Direct, Unroll };

inline std::string_view to_string(ConvStrategy s) { return s == ConvStrategy::Direct ? "DIRECT" : "UNROLL"; }

inline ConvStrategy parse_strategy(std::string_view s) {
  if (s == "DIRECT") return ConvStrategy::Direct;
  if (s == "UNROLL") return ConvStrategy::Unroll;
  throw ArgumentError("unknown convolution strategy '" + std::string(s) + "'");
}

/// Square-kernel 2-D convolution with zero padding. Cross-correlation
/// convention: the kernel is not flipped.
template <typename T>
struct ConvParams {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Tensor<T> weight;               // [out, in, k, k]
  std::optional<Tensor<T>> bias;  // [out]

  static ConvParams make(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t pad,
                         bool with_bias) {
    ConvParams p;
    p.in_channels = in;
    p.out_channels = out;
    p.kernel = k;
    p.stride = stride;
    p.padding = pad;
    p.weight = Tensor<T>(Shape{out, in, k, k});
    if (with_bias) p.bias = Tensor<T>(Shape{out});
    p.validate();
    return p;
  }

  void validate() const {
    if (kernel < 1 || stride < 1) throw ArgumentError("convolution needs kernel >= 1 and stride >= 1");
    if (weight.shape() != Shape{out_channels, in_channels, kernel, kernel})
      throw DimensionError("conv weight " + weight.shape().str() + " inconsistent with " +
                           std::to_string(out_channels) + "x" + std::to_string(in_channels) + "x" +
                           std::to_string(kernel) + "x" + std::to_string(kernel));
    if (bias && bias->shape() != Shape{out_channels})
      throw DimensionError("conv bias " + bias->shape().str() + " does not match " + std::to_string(out_channels) +
                           " output channels");
  }

  /// floor((extent + 2p - k) / s) + 1; throws when that is < 1.
  std::size_t out_extent(std::size_t extent) const {
    if (extent + 2 * padding < kernel)
      throw DimensionError("convolution output would be empty: extent " + std::to_string(extent) + ", kernel " +
                           std::to_string(kernel) + ", padding " + std::to_string(padding));
    return (extent + 2 * padding - kernel) / stride + 1;
  }

  Shape4 output_shape(const Shape4& in) const {
    if (in.c != in_channels)
      throw DimensionError("conv expects " + std::to_string(in_channels) + " input channels, got " +
                           std::to_string(in.c));
    return {in.n, out_channels, out_extent(in.h), out_extent(in.w)};
  }
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weight;
  std::optional<Tensor<T>> bias;
};

namespace detail {

// Output positions o in [lo, hi) whose input coordinate o*s + tap - p lies
// inside [0, extent).
struct ValidSpan {
  std::size_t lo = 0, hi = 0;
};

inline ValidSpan valid_outputs(std::size_t tap, std::size_t extent, std::size_t out_extent, std::size_t stride,
                               std::size_t pad) {
  const long long t = static_cast<long long>(tap), p = static_cast<long long>(pad);
  const long long s = static_cast<long long>(stride), e = static_cast<long long>(extent);
  long long lo = 0;
  if (p > t) lo = std::min<long long>((p - t + s - 1) / s, static_cast<long long>(out_extent));
  long long hi = (e - 1 + p - t);
  hi = hi < 0 ? 0 : hi / s + 1;
  hi = std::min<long long>(hi, static_cast<long long>(out_extent));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

struct ConvDims {
  std::size_t n, c, h, w, co, k, s, p, ho, wo;
  std::size_t taps() const { return c * k * k; }
  std::size_t out_plane() const { return ho * wo; }
};

template <typename T>
ConvDims dims_of(const Shape4& in, const ConvParams<T>& p) {
  const Shape4 out = p.output_shape(in);
  return {in.n, in.c, in.h, in.w, p.out_channels, p.kernel, p.stride, p.padding, out.h, out.w};
}

}  // namespace detail

/// Unrolls one C x H x W item into a (C*k*k) x (Ho*Wo) patch matrix. Rows are
/// ordered (c, ky, kx); padded taps are written as zero.
template <typename T>
void im2col(const T* x, const detail::ConvDims& d, T* col) {
  for (std::size_t c = 0; c < d.c; ++c)
    for (std::size_t ky = 0; ky < d.k; ++ky)
      for (std::size_t kx = 0; kx < d.k; ++kx) {
        T* row = col + ((c * d.k + ky) * d.k + kx) * d.out_plane();
        const auto xs = detail::valid_outputs(kx, d.w, d.wo, d.s, d.p);
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          T* dst = row + oy * d.wo;
          const long long iy = static_cast<long long>(oy * d.s + ky) - static_cast<long long>(d.p);
          if (iy < 0 || iy >= static_cast<long long>(d.h)) {
            std::fill(dst, dst + d.wo, T(0));
            continue;
          }
          const T* src = x + (c * d.h + static_cast<std::size_t>(iy)) * d.w;
          std::fill(dst, dst + xs.lo, T(0));
          for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) dst[ox] = src[ox * d.s + kx - d.p];
          std::fill(dst + xs.hi, dst + d.wo, T(0));
        }
      }
}

/// Scatter-adds a patch-matrix gradient back onto a C x H x W item, visiting
/// taps in (c, ky, kx) order.
template <typename T>
void col2im_add(const T* col, const detail::ConvDims& d, T* gx) {
  for (std::size_t c = 0; c < d.c; ++c)
    for (std::size_t ky = 0; ky < d.k; ++ky)
      for (std::size_t kx = 0; kx < d.k; ++kx) {
        const T* row = col + ((c * d.k + ky) * d.k + kx) * d.out_plane();
        const auto xs = detail::valid_outputs(kx, d.w, d.wo, d.s, d.p);
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const long long iy = static_cast<long long>(oy * d.s + ky) - static_cast<long long>(d.p);
          if (iy < 0 || iy >= static_cast<long long>(d.h)) continue;
          T* dst = gx + (c * d.h + static_cast<std::size_t>(iy)) * d.w;
          for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) dst[ox * d.s + kx - d.p] += row[oy * d.wo + ox];
        }
      }
}

namespace detail {

// Both strategies accumulate every output through one fused multiply-add
// chain per element in the same index order, so they agree bit for bit;
// the only difference is memory traffic. Padded taps add w * 0 in the GEMM
// route and are skipped here, which leaves the running value unchanged.

template <typename T>
void direct_forward(const T* x, const T* w, T* y, const ConvDims& d) {
  perf::parallel_for(d.n * d.co, [&](std::size_t job) {
    const std::size_t n = job / d.co, co = job % d.co;
    T* out = y + (n * d.co + co) * d.out_plane();
    std::fill(out, out + d.out_plane(), T(0));
    for (std::size_t c = 0; c < d.c; ++c) {
      const T* plane = x + (n * d.c + c) * d.h * d.w;
      for (std::size_t ky = 0; ky < d.k; ++ky) {
        const auto ys = valid_outputs(ky, d.h, d.ho, d.s, d.p);
        for (std::size_t kx = 0; kx < d.k; ++kx) {
          const T wv = w[((co * d.c + c) * d.k + ky) * d.k + kx];
          const auto xs = valid_outputs(kx, d.w, d.wo, d.s, d.p);
          for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
            const T* src = plane + (oy * d.s + ky - d.p) * d.w;
            T* dst = out + oy * d.wo;
            if (d.s == 1) {
              for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) dst[ox] = std::fma(wv, src[ox + kx - d.p], dst[ox]);
            } else {
              for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) dst[ox] = std::fma(wv, src[ox * d.s + kx - d.p], dst[ox]);
            }
          }
        }
      }
    }
  });
}

template <typename T>
void direct_backward_input(const T* w, const T* gy, T* gx, const ConvDims& d) {
  perf::parallel_for(d.n * d.c, [&](std::size_t job) {
    const std::size_t n = job / d.c, c = job % d.c;
    T* dst_plane = gx + (n * d.c + c) * d.h * d.w;
    std::fill(dst_plane, dst_plane + d.h * d.w, T(0));
    std::vector<T> row(d.wo);
    for (std::size_t ky = 0; ky < d.k; ++ky) {
      const auto ys = valid_outputs(ky, d.h, d.ho, d.s, d.p);
      for (std::size_t kx = 0; kx < d.k; ++kx) {
        const auto xs = valid_outputs(kx, d.w, d.wo, d.s, d.p);
        for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
          std::fill(row.begin(), row.end(), T(0));
          for (std::size_t co = 0; co < d.co; ++co) {
            const T wv = w[((co * d.c + c) * d.k + ky) * d.k + kx];
            const T* g = gy + ((n * d.co + co) * d.ho + oy) * d.wo;
            for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) row[ox] = std::fma(wv, g[ox], row[ox]);
          }
          T* dst = dst_plane + (oy * d.s + ky - d.p) * d.w;
          for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) dst[ox * d.s + kx - d.p] += row[ox];
        }
      }
    }
  });
}

template <typename T>
void direct_backward_weight(const T* x, const T* gy, T* gw, const ConvDims& d) {
  const std::size_t taps = d.taps();
  perf::parallel_for(d.co, [&](std::size_t co) {
    T* acc = gw + co * taps;
    std::fill(acc, acc + taps, T(0));
    for (std::size_t n = 0; n < d.n; ++n) {
      const T* g = gy + (n * d.co + co) * d.out_plane();
      for (std::size_t oy = 0; oy < d.ho; ++oy)
        for (std::size_t ox = 0; ox < d.wo; ++ox) {
          const T gv = g[oy * d.wo + ox];
          for (std::size_t c = 0; c < d.c; ++c) {
            const T* plane = x + (n * d.c + c) * d.h * d.w;
            for (std::size_t ky = 0; ky < d.k; ++ky) {
              const long long iy = static_cast<long long>(oy * d.s + ky) - static_cast<long long>(d.p);
              if (iy < 0 || iy >= static_cast<long long>(d.h)) continue;
              const T* src = plane + static_cast<std::size_t>(iy) * d.w;
              T* a = acc + (c * d.k + ky) * d.k;
              for (std::size_t kx = 0; kx < d.k; ++kx) {
                const long long ix = static_cast<long long>(ox * d.s + kx) - static_cast<long long>(d.p);
                if (ix < 0 || ix >= static_cast<long long>(d.w)) continue;
                a[kx] = std::fma(gv, src[ix], a[kx]);
              }
            }
          }
        }
    }
  });
}

template <typename T>
void unroll_forward(const T* x, const T* w, T* y, const ConvDims& d) {
  const std::size_t taps = d.taps(), plane = d.out_plane();
  auto item = [&](std::size_t n, auto&& gemm_fn) {
    thread_local std::vector<T> col;
    col.resize(taps * plane);
    im2col(x + n * d.c * d.h * d.w, d, col.data());
    gemm_fn(d.co, plane, taps, MatrixRef<T>{w, taps}, MatrixRef<T>{col.data(), plane}, y + n * d.co * plane, plane,
            false);
  };
  if (d.n >= perf::pool().size()) {
    perf::parallel_for(d.n, [&](std::size_t n) { item(n, gemm_serial<T>); });
  } else {
    for (std::size_t n = 0; n < d.n; ++n) item(n, gemm<T>);
  }
}

template <typename T>
void unroll_backward_input(const T* w, const T* gy, T* gx, const ConvDims& d) {
  const std::size_t taps = d.taps(), plane = d.out_plane(), item_in = d.c * d.h * d.w;
  auto item = [&](std::size_t n, auto&& gemm_fn) {
    thread_local std::vector<T> col;
    col.resize(taps * plane);
    gemm_fn(taps, plane, d.co, MatrixRef<T>{w, taps, Trans::Yes}, MatrixRef<T>{gy + n * d.co * plane, plane},
            col.data(), plane, false);
    T* dst = gx + n * item_in;
    std::fill(dst, dst + item_in, T(0));
    col2im_add(col.data(), d, dst);
  };
  if (d.n >= perf::pool().size()) {
    perf::parallel_for(d.n, [&](std::size_t n) { item(n, gemm_serial<T>); });
  } else {
    for (std::size_t n = 0; n < d.n; ++n) item(n, gemm<T>);
  }
}

template <typename T>
void unroll_backward_weight(const T* x, const T* gy, T* gw, const ConvDims& d) {
  const std::size_t taps = d.taps(), plane = d.out_plane(), item_in = d.c * d.h * d.w;
  const std::size_t threads = perf::pool().size();

  if (!perf::config().deterministic && threads > 1 && d.n >= threads) {
    // Batch-sharded partial sums: faster, but the summation order follows
    // the thread count.
    const auto shards = perf::partition(d.n, threads);
    std::vector<std::vector<T>> partial(threads, std::vector<T>(d.co * taps, T(0)));
    perf::parallel_for(threads, [&](std::size_t s) {
      std::vector<T> col(taps * plane);
      for (std::size_t n = shards[s].begin; n < shards[s].end; ++n) {
        im2col(x + n * item_in, d, col.data());
        gemm_serial<T>(d.co, taps, plane, MatrixRef<T>{gy + n * d.co * plane, plane},
                       MatrixRef<T>{col.data(), plane, Trans::Yes}, partial[s].data(), taps, true);
      }
    });
    std::fill(gw, gw + d.co * taps, T(0));
    for (const auto& p : partial)
      for (std::size_t i = 0; i < p.size(); ++i) gw[i] += p[i];
    return;
  }

  // Items are folded into the gradient in batch order; only the patch
  // extraction and the output tiles of each GEMM run in parallel.
  std::fill(gw, gw + d.co * taps, T(0));
  const std::size_t chunk = std::max<std::size_t>(1, threads);
  std::vector<T> cols(chunk * taps * plane);
  for (std::size_t n0 = 0; n0 < d.n; n0 += chunk) {
    const std::size_t cnt = std::min(chunk, d.n - n0);
    perf::parallel_for(cnt, [&](std::size_t i) { im2col(x + (n0 + i) * item_in, d, cols.data() + i * taps * plane); });
    for (std::size_t i = 0; i < cnt; ++i)
      gemm<T>(d.co, taps, plane, MatrixRef<T>{gy + (n0 + i) * d.co * plane, plane},
              MatrixRef<T>{cols.data() + i * taps * plane, plane, Trans::Yes}, gw, taps, true);
  }
}

template <typename T>
void add_bias(T* y, const Tensor<T>& bias, const ConvDims& d) {
  perf::parallel_for(d.n * d.co, [&](std::size_t job) {
    const T b = bias[job % d.co];
    T* out = y + job * d.out_plane();
    for (std::size_t i = 0; i < d.out_plane(); ++i) out[i] += b;
  });
}

template <typename T>
Tensor<T> bias_grad(const T* gy, const ConvDims& d) {
  Tensor<T> gb(Shape{d.co});
  perf::parallel_for(d.co, [&](std::size_t co) {
    T acc = T(0);
    for (std::size_t n = 0; n < d.n; ++n) {
      const T* g = gy + (n * d.co + co) * d.out_plane();
      for (std::size_t i = 0; i < d.out_plane(); ++i) acc += g[i];
    }
    gb[co] = acc;
  });
  return gb;
}

}  // namespace detail

/// Forward convolution of an N x C x H x W batch.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvParams<T>& p, ConvStrategy strategy) {
  p.validate();
  const auto d = detail::dims_of(Shape4::of(x.shape()), p);
  Tensor<T> y(Shape{d.n, d.co, d.ho, d.wo});
  if (strategy == ConvStrategy::Direct)
    detail::direct_forward(x.raw(), p.weight.raw(), y.raw(), d);
  else
    detail::unroll_forward(x.raw(), p.weight.raw(), y.raw(), d);
  if (p.bias) detail::add_bias(y.raw(), *p.bias, d);
  return y;
}

/// Gradients of the forward map with respect to input, weight and bias.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvParams<T>& p, ConvStrategy strategy,
                             const Tensor<T>& grad_out) {
  p.validate();
  const auto d = detail::dims_of(Shape4::of(x.shape()), p);
  const Shape expected{d.n, d.co, d.ho, d.wo};
  if (grad_out.shape() != expected)
    throw DimensionError("conv grad_out " + grad_out.shape().str() + " does not match output " + expected.str());
  ConvGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(p.weight.shape()), std::nullopt};
  if (strategy == ConvStrategy::Direct) {
    detail::direct_backward_input(p.weight.raw(), grad_out.raw(), g.input.raw(), d);
    detail::direct_backward_weight(x.raw(), grad_out.raw(), g.weight.raw(), d);
  } else {
    detail::unroll_backward_input(p.weight.raw(), grad_out.raw(), g.input.raw(), d);
    detail::unroll_backward_weight(x.raw(), grad_out.raw(), g.weight.raw(), d);
  }
  if (p.bias) g.bias = detail::bias_grad(grad_out.raw(), d);
  return g;
}

}  // namespace hpcnn

#endif  // HPCNN_NN_CONV_HPP
