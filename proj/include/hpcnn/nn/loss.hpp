#ifndef HPCNN_NN_LOSS_HPP
#define HPCNN_NN_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "hpcnn/core/tensor.hpp"

namespace hpcnn {

template <typename T>
struct LossResult {
  T loss;                // mean over the batch
  Tensor<T> grad;        // d loss / d logits
  Tensor<T> probabilities;
};

/// Mean softmax cross-entropy of logits [N x K] against class indices.
/// Rows are shifted by their max before exponentiation.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size())
    throw DimensionError("logits " + logits.shape().str() + " vs " + std::to_string(targets.size()) + " targets");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  LossResult<T> r{T(0), Tensor<T>(logits.shape()), Tensor<T>(logits.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= k)
      throw ArgumentError("target " + std::to_string(targets[i]) + " out of range for " + std::to_string(k) +
                          " classes");
    const T* row = logits.raw() + i * k;
    const T mx = *std::max_element(row, row + k);
    T z = T(0);
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const T log_z = std::log(z) + mx;
    total += double(log_z - row[targets[i]]);
    for (std::size_t j = 0; j < k; ++j) {
      const T p = std::exp(row[j] - log_z);
      r.probabilities[i * k + j] = p;
      r.grad[i * k + j] = (p - (j == targets[i] ? T(1) : T(0))) / T(n);
    }
  }
  r.loss = static_cast<T>(total / double(n));
  return r;
}

}  // namespace hpcnn

#endif  // HPCNN_NN_LOSS_HPP
