#ifndef HPCNN_DATA_TRANSFORMS_HPP
#define HPCNN_DATA_TRANSFORMS_HPP

#include <array>
#include <random>
#include <utility>

#include "hpcnn/core/error.hpp"
#include "hpcnn/core/tensor.hpp"

// Image transforms on C x H x W float tensors.

namespace hpcnn::data {

/// Window of `size` x `size` taken at (oy, ox) from the image zero-padded by
/// `padding` on every side. (padding, padding) is the original image.
inline Tensor<float> crop_at(const Tensor<float>& img, std::size_t oy, std::size_t ox, std::size_t padding,
                             std::size_t size) {
  if (img.rank() != 3) throw DimensionError("expected a C x H x W image, got " + img.shape().str());
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (oy > h + 2 * padding - size || ox > w + 2 * padding - size || size > h + 2 * padding)
    throw ArgumentError("crop window falls outside the padded image");
  Tensor<float> out(Shape{c, size, size});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < size; ++y) {
      const long sy = long(y + oy) - long(padding);
      if (sy < 0 || sy >= long(h)) continue;
      for (std::size_t x = 0; x < size; ++x) {
        const long sx = long(x + ox) - long(padding);
        if (sx < 0 || sx >= long(w)) continue;
        out[(ch * size + y) * size + x] = img[(ch * h + std::size_t(sy)) * w + std::size_t(sx)];
      }
    }
  return out;
}

/// Offsets uniform over {0 .. 2*padding}^2; y is drawn first.
template <typename Rng>
std::pair<std::size_t, std::size_t> draw_crop_offset(Rng& rng, std::size_t padding) {
  std::uniform_int_distribution<std::size_t> dist(0, 2 * padding);
  const std::size_t oy = dist(rng);
  const std::size_t ox = dist(rng);
  return {oy, ox};
}

/// Zero-pad by `padding`, then crop `size` x `size` at a random offset.
template <typename Rng>
Tensor<float> random_crop(const Tensor<float>& img, Rng& rng, std::size_t size = 32, std::size_t padding = 2) {
  const auto [oy, ox] = draw_crop_offset(rng, padding);
  return crop_at(img, oy, ox, padding, size);
}

/// Column j -> W-1-j in every row.
inline Tensor<float> flip_horizontal(const Tensor<float>& img) {
  if (img.rank() != 3) throw DimensionError("expected a C x H x W image, got " + img.shape().str());
  const std::size_t rows = img.dim(0) * img.dim(1), w = img.dim(2);
  Tensor<float> out(img.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t x = 0; x < w; ++x) out[r * w + x] = img[r * w + (w - 1 - x)];
  return out;
}

/// Flips with probability p (one Bernoulli draw per call).
template <typename Rng>
Tensor<float> horizontal_flip(const Tensor<float>& img, Rng& rng, double p = 0.5) {
  if (p < 0.0 || p > 1.0) throw ArgumentError("flip probability must lie in [0, 1]");
  std::bernoulli_distribution coin(p);
  return coin(rng) ? flip_horizontal(img) : img;
}

struct NormalizationParams {
  std::array<float, 3> mean{0.4914f, 0.4822f, 0.4465f};
  std::array<float, 3> std{0.2023f, 0.1994f, 0.2010f};

  void validate() const {
    for (float s : std)
      if (!(s > 0.0f)) throw ArgumentError("normalization std must be positive");
  }
};

inline Tensor<float> normalize(const Tensor<float>& img, const NormalizationParams& p = {}) {
  p.validate();
  if (img.rank() != 3 || img.dim(0) != 3) throw DimensionError("normalize expects 3 x H x W, got " + img.shape().str());
  const std::size_t plane = img.dim(1) * img.dim(2);
  Tensor<float> out(img.shape());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = (img[c * plane + i] - p.mean[c]) / p.std[c];
  return out;
}

inline Tensor<float> denormalize(const Tensor<float>& img, const NormalizationParams& p = {}) {
  p.validate();
  if (img.rank() != 3 || img.dim(0) != 3) throw DimensionError("denormalize expects 3 x H x W, got " + img.shape().str());
  const std::size_t plane = img.dim(1) * img.dim(2);
  Tensor<float> out(img.shape());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = img[c * plane + i] * p.std[c] + p.mean[c];
  return out;
}

}  // namespace hpcnn::data

#endif  // HPCNN_DATA_TRANSFORMS_HPP
