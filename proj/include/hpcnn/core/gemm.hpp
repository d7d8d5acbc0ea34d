#ifndef HPCNN_CORE_GEMM_HPP
#define HPCNN_CORE_GEMM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "hpcnn/perf/parallel.hpp"

namespace hpcnn {

enum class Trans { No, Yes };

/// Strided view of a row-major matrix operand, optionally transposed.
template <typename T>
struct MatrixRef {
  const T* data;
  std::size_t ld;
  Trans trans = Trans::No;

  T operator()(std::size_t r, std::size_t c) const {
    return trans == Trans::No ? data[r * ld + c] : data[c * ld + r];
  }
};

namespace detail {

template <typename T>
struct GemmTile {
  static constexpr std::size_t mr = 6;
  static constexpr std::size_t nr = 128 / sizeof(T);
  static constexpr std::size_t kc = 256;
  static constexpr std::size_t mc = 120;
  static constexpr std::size_t nc = 1024;
};

// Register-blocked update of an mr x nr tile of C. Each C element is a
// single fused multiply-add chain over k in increasing order, starting from
// the value already stored in C. Nothing here reassociates the sum, so the
// result for an element does not depend on which tile or thread computes it.
template <typename T>
void micro_kernel(std::size_t kc, const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t ldc,
                  std::size_t mr, std::size_t nr) {
  constexpr std::size_t MR = GemmTile<T>::mr;
  constexpr std::size_t NR = GemmTile<T>::nr;
  T acc[MR][NR];
  for (std::size_t i = 0; i < MR; ++i)
    for (std::size_t j = 0; j < NR; ++j) acc[i][j] = (i < mr && j < nr) ? c[i * ldc + j] : T(0);
  for (std::size_t k = 0; k < kc; ++k) {
    const T* bk = b + k * NR;
    const T* ak = a + k * MR;
    for (std::size_t i = 0; i < MR; ++i) {
      const T ai = ak[i];
      for (std::size_t j = 0; j < NR; ++j) acc[i][j] = std::fma(ai, bk[j], acc[i][j]);
    }
  }
  for (std::size_t i = 0; i < mr; ++i)
    for (std::size_t j = 0; j < nr; ++j) c[i * ldc + j] = acc[i][j];
}

// Serial packed GEMM on a sub-block: C[m x n] (+)= op(A)[m x k] * op(B)[k x n].
template <typename T>
void gemm_block(std::size_t m, std::size_t n, std::size_t k, MatrixRef<T> a, MatrixRef<T> b, T* c,
                 std::size_t ldc, bool accumulate) {
  using Tile = GemmTile<T>;
  if (!accumulate)
    for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T(0));
  if (k == 0) return;

  thread_local std::vector<T> pack_a, pack_b;
  pack_a.resize(Tile::mc * Tile::kc);
  pack_b.resize(Tile::kc * ((Tile::nc + Tile::nr - 1) / Tile::nr) * Tile::nr);

  for (std::size_t jc = 0; jc < n; jc += Tile::nc) {
    const std::size_t ncur = std::min(Tile::nc, n - jc);
    for (std::size_t pc = 0; pc < k; pc += Tile::kc) {
      const std::size_t kcur = std::min(Tile::kc, k - pc);
      for (std::size_t jr = 0; jr < ncur; jr += Tile::nr) {
        const std::size_t nr = std::min(Tile::nr, ncur - jr);
        T* dst = pack_b.data() + jr * kcur;
        for (std::size_t kk = 0; kk < kcur; ++kk)
          for (std::size_t j = 0; j < Tile::nr; ++j)
            dst[kk * Tile::nr + j] = j < nr ? b(pc + kk, jc + jr + j) : T(0);
      }
      for (std::size_t ic = 0; ic < m; ic += Tile::mc) {
        const std::size_t mcur = std::min(Tile::mc, m - ic);
        for (std::size_t ir = 0; ir < mcur; ir += Tile::mr) {
          const std::size_t mr = std::min(Tile::mr, mcur - ir);
          T* dst = pack_a.data() + ir * kcur;
          for (std::size_t kk = 0; kk < kcur; ++kk)
            for (std::size_t i = 0; i < Tile::mr; ++i)
              dst[kk * Tile::mr + i] = i < mr ? a(ic + ir + i, pc + kk) : T(0);
        }
        for (std::size_t jr = 0; jr < ncur; jr += Tile::nr)
          for (std::size_t ir = 0; ir < mcur; ir += Tile::mr)
            micro_kernel<T>(kcur, pack_a.data() + ir * kcur, pack_b.data() + jr * kcur,
                            c + (ic + ir) * ldc + jc + jr, ldc, std::min(Tile::mr, mcur - ir),
                            std::min(Tile::nr, ncur - jr));
      }
    }
  }
}

}  // namespace detail

/// C[m x n] = op(A) * op(B), or C += op(A) * op(B) when `accumulate`.
///
/// Work is split across the process pool along rows or columns of C; the
/// reduction dimension is never split, so results are bit-identical for
/// every thread count.
template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, MatrixRef<T> a, MatrixRef<T> b, T* c, std::size_t ldc,
          bool accumulate = false) {
  if (m == 0 || n == 0) return;
  const std::size_t threads = perf::pool().size();
  const bool tiny = m * n * std::max<std::size_t>(k, 1) < 32 * 1024;
  if (threads == 1 || tiny || perf::detail::inside_worker) {
    detail::gemm_block(m, n, k, a, b, c, ldc, accumulate);
    return;
  }
  using Tile = detail::GemmTile<T>;
  if (n >= m) {
    const std::size_t panels = (n + Tile::nr - 1) / Tile::nr;
    perf::parallel_for_ranges(panels, [&](perf::Range r) {
      const std::size_t j0 = r.begin * Tile::nr, j1 = std::min(n, r.end * Tile::nr);
      MatrixRef<T> bs = b;
      bs.data = b.trans == Trans::No ? b.data + j0 : b.data + j0 * b.ld;
      detail::gemm_block(m, j1 - j0, k, a, bs, c + j0, ldc, accumulate);
    });
  } else {
    const std::size_t panels = (m + Tile::mr - 1) / Tile::mr;
    perf::parallel_for_ranges(panels, [&](perf::Range r) {
      const std::size_t i0 = r.begin * Tile::mr, i1 = std::min(m, r.end * Tile::mr);
      MatrixRef<T> as = a;
      as.data = a.trans == Trans::No ? a.data + i0 * a.ld : a.data + i0;
      detail::gemm_block(i1 - i0, n, k, as, b, c + i0 * ldc, ldc, accumulate);
    });
  }
}

/// Serial entry point for callers that already run inside a worker chunk.
template <typename T>
void gemm_serial(std::size_t m, std::size_t n, std::size_t k, MatrixRef<T> a, MatrixRef<T> b, T* c, std::size_t ldc,
                 bool accumulate = false) {
  detail::gemm_block(m, n, k, a, b, c, ldc, accumulate);
}

}  // namespace hpcnn

#endif  // HPCNN_CORE_GEMM_HPP
