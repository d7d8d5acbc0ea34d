#ifndef HPCNN_DATA_LOADER_HPP
#define HPCNN_DATA_LOADER_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "hpcnn/core/random.hpp"
#include "hpcnn/data/cifar.hpp"
#include "hpcnn/data/transforms.hpp"
#include "hpcnn/perf/parallel.hpp"

namespace hpcnn::data {

struct Batch {
  Tensor<float> images;              // N x 3 x 32 x 32, normalized
  std::vector<std::size_t> labels;
  std::vector<std::size_t> indices;  // dataset positions, for tracing
};

/// Train batches get crop -> flip -> normalize; eval batches normalize only
/// and consume no randomness.
enum class Split { Train, Eval };

struct AugmentParams {
  std::size_t crop_padding = 2;
  double flip_probability = 0.5;
  NormalizationParams norm;
};

/// Lazy view of one epoch's batches over a dataset that must outlive it.
///
/// The visiting order is a permutation drawn from (seed, epoch); each item's
/// augmentation draws from its own stream keyed by (seed, epoch, index), so
/// batches can be built in any order or in parallel without changing the
/// result.
class BatchLoader {
 public:
  BatchLoader(const Dataset& ds, std::size_t batch_size, bool shuffle, Split split, std::uint64_t seed,
              std::size_t epoch = 0, AugmentParams aug = {})
      : ds_(&ds), batch_size_(batch_size), split_(split), seed_(seed), epoch_(epoch), aug_(aug) {
    if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
    aug_.norm.validate();
    order_.resize(ds.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (shuffle) {
      std::mt19937_64 rng(derive_seed(seed, {epoch, 0x5u}));
      std::shuffle(order_.begin(), order_.end(), rng);
    }
  }

  std::size_t size() const { return (order_.size() + batch_size_ - 1) / batch_size_; }
  std::size_t batch_size() const { return batch_size_; }
  std::size_t items() const { return order_.size(); }
  const std::vector<std::size_t>& order() const { return order_; }

  Batch operator[](std::size_t b) const {
    if (b >= size()) throw ArgumentError("batch " + std::to_string(b) + " of " + std::to_string(size()));
    const std::size_t begin = b * batch_size_;
    const std::size_t n = std::min(batch_size_, order_.size() - begin);
    Batch out{Tensor<float>(Shape{n, kChannels, kSide, kSide}), std::vector<std::size_t>(n),
              std::vector<std::size_t>(order_.begin() + long(begin), order_.begin() + long(begin + n))};
    perf::parallel_for(n, [&](std::size_t i) {
      const std::size_t idx = out.indices[i];
      out.labels[i] = ds_->labels[idx];
      const Tensor<float> img = prepare(idx);
      std::copy(img.data().begin(), img.data().end(), out.images.raw() + i * kImageBytes);
    });
    return out;
  }

  /// The transformed image for dataset position `idx` in this epoch.
  Tensor<float> prepare(std::size_t idx) const {
    Tensor<float> img = ds_->image(idx).pixels;
    if (split_ == Split::Train) {
      std::mt19937_64 rng(derive_seed(seed_, {epoch_, 0xA7u, idx}));
      img = random_crop(img, rng, kSide, aug_.crop_padding);
      img = horizontal_flip(img, rng, aug_.flip_probability);
    }
    return normalize(img, aug_.norm);
  }

 private:
  const Dataset* ds_;
  std::size_t batch_size_;
  Split split_;
  std::uint64_t seed_;
  std::size_t epoch_;
  AugmentParams aug_;
  std::vector<std::size_t> order_;
};

inline BatchLoader make_batches(const Dataset& ds, std::size_t batch_size, bool shuffle, Split split,
                                std::uint64_t seed, std::size_t epoch = 0, AugmentParams aug = {}) {
  return BatchLoader(ds, batch_size, shuffle, split, seed, epoch, aug);
}

/// Seeded draw of min(per_class, available) items from every class, kept in
/// dataset order.
inline Dataset stratified_subset(const Dataset& ds, std::size_t per_class, std::uint64_t seed) {
  if (per_class < 1) throw ArgumentError("subset size per class must be at least 1");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    std::mt19937_64 rng(derive_seed(seed, {c, 0x5Bu}));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(per_class, idx.size()));
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  Dataset out;
  out.num_classes = ds.num_classes;
  out.pixels.reserve(keep.size() * kImageBytes);
  for (auto i : keep) out.push_back(ds.image_bytes(i), ds.labels[i]);
  return out;
}

/// Base colour of a synthetic class: every channel sits on the level grid
/// {0.2, 0.5, 0.8} (base-3 digits of the class id), so any two of the first
/// 27 classes differ by at least 0.3 in some channel mean.
inline std::array<float, 3> synthetic_class_color(std::size_t label) {
  static constexpr float levels[] = {0.2f, 0.5f, 0.8f};
  std::array<float, 3> c{};
  std::size_t v = label % 27;
  for (auto& ch : c) {
    ch = levels[v % 3];
    v /= 3;
  }
  return c;
}

/// n images with labels cycling 0..K-1: per-class base colour plus a fixed
/// per-class +-0.1 texture, plus N(0, 0.1) pixel noise, quantized to bytes.
inline Dataset synthetic_dataset(std::size_t num_classes, std::size_t n, std::uint64_t seed) {
  if (num_classes < 2 || num_classes > 256) throw ArgumentError("synthetic data needs 2..256 classes");
  Dataset ds;
  ds.num_classes = num_classes;
  ds.pixels.resize(n * kImageBytes);
  ds.labels.resize(n);
  std::vector<std::vector<float>> texture(num_classes, std::vector<float>(kImageBytes));
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::mt19937_64 rng(derive_seed(seed, {c, 0x7Eu}));
    std::bernoulli_distribution coin(0.5);
    for (auto& t : texture[c]) t = coin(rng) ? 0.1f : -0.1f;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % num_classes;
    ds.labels[i] = static_cast<std::uint8_t>(label);
    const auto color = synthetic_class_color(label);
    std::mt19937_64 rng(derive_seed(seed, {i, 0x9Au}));
    std::normal_distribution<float> noise(0.0f, 0.1f);
    for (std::size_t k = 0; k < kImageBytes; ++k) {
      const float v = color[k / (kSide * kSide)] + texture[label][k] + noise(rng);
      ds.pixels[i * kImageBytes + k] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }
  }
  return ds;
}

}  // namespace hpcnn::data

#endif  // HPCNN_DATA_LOADER_HPP
