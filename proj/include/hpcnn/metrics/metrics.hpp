#ifndef HPCNN_METRICS_METRICS_HPP
#define HPCNN_METRICS_METRICS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hpcnn/core/error.hpp"

namespace hpcnn::metrics {

/// K x K counts; rows are the actual class, columns the predicted class.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {}

  std::size_t classes() const { return k_; }
  std::uint64_t at(std::size_t actual, std::size_t predicted) const { return counts_.at(actual * k_ + predicted); }
  std::uint64_t& at(std::size_t actual, std::size_t predicted) { return counts_.at(actual * k_ + predicted); }

  void add(std::size_t actual, std::size_t predicted) {
    if (actual >= k_ || predicted >= k_)
      throw ArgumentError("label pair (" + std::to_string(actual) + ", " + std::to_string(predicted) +
                          ") out of range for " + std::to_string(k_) + " classes");
    ++counts_[actual * k_ + predicted];
  }

  /// Merges a shard counted separately (elementwise addition).
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.k_ != k_) throw DimensionError("merging confusion matrices of different class counts");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < k_; ++i) t += counts_[i * k_ + i];
    return t;
  }
  std::uint64_t row_sum(std::size_t r) const {
    std::uint64_t t = 0;
    for (std::size_t c = 0; c < k_; ++c) t += counts_[r * k_ + c];
    return t;
  }
  std::uint64_t col_sum(std::size_t c) const {
    std::uint64_t t = 0;
    for (std::size_t r = 0; r < k_; ++r) t += counts_[r * k_ + c];
    return t;
  }

  /// Rows scaled to sum to 1; an all-zero row stays zero.
  std::vector<double> row_normalized() const {
    std::vector<double> out(counts_.size(), 0.0);
    for (std::size_t r = 0; r < k_; ++r) {
      const auto s = row_sum(r);
      if (!s) continue;
      for (std::size_t c = 0; c < k_; ++c) out[r * k_ + c] = double(counts_[r * k_ + c]) / double(s);
    }
    return out;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_ = 0;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const std::size_t> actual, std::span<const std::size_t> predicted,
                                 std::size_t k) {
  if (actual.size() != predicted.size())
    throw DimensionError(std::to_string(actual.size()) + " actual labels vs " + std::to_string(predicted.size()) +
                         " predictions");
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < actual.size(); ++i) cm.add(actual[i], predicted[i]);
  return cm;
}

/// One-vs-rest tallies for class c.
struct BinaryCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline BinaryCounts one_vs_rest(const ConfusionMatrix& cm, std::size_t c) {
  BinaryCounts b;
  b.tp = cm.at(c, c);
  b.fn = cm.row_sum(c) - b.tp;
  b.fp = cm.col_sum(c) - b.tp;
  b.tn = cm.total() - b.tp - b.fn - b.fp;
  return b;
}

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<double> precision, recall, f1;
  std::vector<std::uint64_t> support;  // actual count per class
  // Set for class c when any of its three ratios hit 0/0 and was defined as 0.
  std::vector<bool> degenerate;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
  double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;

  bool any_degenerate() const {
    for (bool d : degenerate)
      if (d) return true;
    return false;
  }
};

/// Accuracy = trace / total; per class P = TP/(TP+FP), R = TP/(TP+FN),
/// F1 = 2PR/(P+R). Macro = unweighted class mean, weighted = support-weighted
/// mean, micro = ratios of the summed one-vs-rest tallies.
inline MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw ArgumentError("cannot compute metrics of an empty confusion matrix");
  const std::size_t k = cm.classes();
  MetricsReport r;
  r.accuracy = double(cm.trace()) / double(total);
  r.precision.resize(k);
  r.recall.resize(k);
  r.f1.resize(k);
  r.support.resize(k);
  r.degenerate.assign(k, false);
  auto ratio = [&](double num, double den, std::size_t c) {
    if (den == 0.0) {
      r.degenerate[c] = true;
      return 0.0;
    }
    return num / den;
  };
  BinaryCounts sum;
  for (std::size_t c = 0; c < k; ++c) {
    const auto b = one_vs_rest(cm, c);
    sum.tp += b.tp;
    sum.fp += b.fp;
    sum.fn += b.fn;
    r.support[c] = b.tp + b.fn;
    r.precision[c] = ratio(double(b.tp), double(b.tp + b.fp), c);
    r.recall[c] = ratio(double(b.tp), double(b.tp + b.fn), c);
    r.f1[c] = ratio(2.0 * r.precision[c] * r.recall[c], r.precision[c] + r.recall[c], c);
    r.macro_precision += r.precision[c] / double(k);
    r.macro_recall += r.recall[c] / double(k);
    r.macro_f1 += r.f1[c] / double(k);
    const double w = double(r.support[c]) / double(total);
    r.weighted_precision += w * r.precision[c];
    r.weighted_recall += w * r.recall[c];
    r.weighted_f1 += w * r.f1[c];
  }
  r.micro_precision = double(sum.tp) / double(sum.tp + sum.fp);
  r.micro_recall = double(sum.tp) / double(sum.tp + sum.fn);
  r.micro_f1 = r.micro_precision + r.micro_recall > 0.0
                   ? 2.0 * r.micro_precision * r.micro_recall / (r.micro_precision + r.micro_recall)
                   : 0.0;
  return r;
}

}  // namespace hpcnn::metrics

#endif  // HPCNN_METRICS_METRICS_HPP
