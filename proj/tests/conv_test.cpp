#include <gtest/gtest.h>

#include <random>

#include "hpcnn/nn/conv.hpp"
#include "test_util.hpp"

using namespace hpcnn;
using hpcnn::test::naive_conv;
using hpcnn::test::random_tensor;
using hpcnn::test::ScopedPool;

namespace {

template <typename T>
ConvParams<T> random_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t s, std::size_t p, bool bias,
                          std::uint64_t seed) {
  auto params = ConvParams<T>::make(in, out, k, s, p, bias);
  params.weight = random_tensor<T>(params.weight.shape(), seed);
  if (bias) params.bias = random_tensor<T>(Shape{out}, seed + 1);
  return params;
}

constexpr ConvStrategy kBoth[] = {ConvStrategy::Direct, ConvStrategy::Unroll};

}  // namespace

TEST(Conv2d, AllOnesCountsTaps) {
  auto p = ConvParams<float>::make(1, 1, 3, 1, 0, false);
  p.weight.fill(1.0f);
  for (auto s : kBoth) {
    auto y = conv2d_forward(Tensor<float>(Shape{1, 1, 3, 3}, 1.0f), p, s);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_EQ(y[0], 9.0f) << to_string(s);
  }
}

TEST(Conv2d, UnitKernelIsIdentity) {
  auto p = ConvParams<float>::make(1, 1, 1, 1, 0, false);
  p.weight.fill(1.0f);
  auto x = random_tensor<float>(Shape{2, 1, 5, 4}, 3);
  for (auto s : kBoth) EXPECT_EQ(conv2d_forward(x, p, s), x);
}

TEST(Conv2d, UnrollMatchesDirectOnReferenceCase) {
  auto x = random_tensor<float>(Shape{2, 3, 8, 8}, 10);
  auto p = random_conv<float>(3, 4, 3, 1, 1, true, 11);
  auto direct = conv2d_forward(x, p, ConvStrategy::Direct);
  auto unroll = conv2d_forward(x, p, ConvStrategy::Unroll);
  EXPECT_LT(max_relative_error(unroll, direct), 1e-5);
  auto oracle = naive_conv(x, p.weight, 1, 1);
  for (std::size_t i = 0; i < oracle.size(); ++i) oracle[i] += (*p.bias)[(i / 64) % 4];
  EXPECT_LT(max_relative_error(direct.cast<double>(), oracle), 1e-5);
}

// Padding wider than half the kernel on a 1-pixel-wide image: some taps see
// only padding for every output column.
TEST(Conv2d, PaddingWiderThanHalfKernel) {
  for (std::size_t w : {1, 2}) {
    auto x = random_tensor<float>(Shape{1, 2, 3, w}, 20 + w);
    auto p = random_conv<float>(2, 2, 7, 1, 4, true, 21);
    auto direct = conv2d_forward(x, p, ConvStrategy::Direct);
    EXPECT_EQ(conv2d_forward(x, p, ConvStrategy::Unroll), direct);
    auto oracle = naive_conv(x, p.weight, 1, 4);
    const std::size_t plane = oracle.size() / 2;
    for (std::size_t i = 0; i < oracle.size(); ++i) oracle[i] += (*p.bias)[i / plane];
    EXPECT_LT(max_relative_error(direct.cast<double>(), oracle), 1e-5);
    auto g = random_tensor<float>(direct.shape(), 22);
    auto gd = conv2d_backward(x, p, ConvStrategy::Direct, g);
    auto gu = conv2d_backward(x, p, ConvStrategy::Unroll, g);
    EXPECT_EQ(gd.input, gu.input);
    EXPECT_EQ(gd.weight, gu.weight);
  }
}

TEST(Conv2d, RejectsChannelMismatchAndEmptyOutput) {
  auto p = ConvParams<float>::make(3, 4, 5, 1, 0, false);
  EXPECT_THROW(conv2d_forward(Tensor<float>(Shape{1, 2, 8, 8}), p, ConvStrategy::Direct), DimensionError);
  EXPECT_THROW(conv2d_forward(Tensor<float>(Shape{1, 3, 4, 4}), p, ConvStrategy::Unroll), DimensionError);
}

TEST(Conv2d, BackwardRejectsWrongGradShape) {
  auto p = ConvParams<float>::make(2, 3, 3, 1, 1, false);
  auto x = random_tensor<float>(Shape{1, 2, 5, 5}, 1);
  EXPECT_THROW(conv2d_backward(x, p, ConvStrategy::Direct, Tensor<float>(Shape{1, 3, 4, 4})), DimensionError);
}

TEST(Conv2d, ZeroUpstreamGradientGivesZeroGradients) {
  auto p = random_conv<double>(2, 3, 3, 2, 1, true, 4);
  auto x = random_tensor<double>(Shape{2, 2, 7, 7}, 5);
  auto y = conv2d_forward(x, p, ConvStrategy::Direct);
  for (auto s : kBoth) {
    auto g = conv2d_backward(x, p, s, Tensor<double>(y.shape()));
    EXPECT_EQ(g.input, Tensor<double>(x.shape()));
    EXPECT_EQ(g.weight, Tensor<double>(p.weight.shape()));
    EXPECT_EQ(*g.bias, Tensor<double>(Shape{3}));
  }
}

TEST(Conv2d, UnitKernelPassesGradientThrough) {
  auto p = ConvParams<double>::make(1, 1, 1, 1, 0, false);
  p.weight.fill(1.0);
  auto x = random_tensor<double>(Shape{2, 1, 4, 4}, 6);
  auto g = random_tensor<double>(Shape{2, 1, 4, 4}, 7);
  for (auto s : kBoth) EXPECT_EQ(conv2d_backward(x, p, s, g).input, g);
}

// Both kernels fold every element through the same multiply-add chain, so on
// top of the 1e-5 contract they are expected to agree exactly.
TEST(Conv2d, StrategiesAgreeOnRandomShapes) {
  std::mt19937 rng(2024);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  const std::size_t kernels[] = {1, 3, 5};
  int checked = 0;
  for (int trial = 0; trial < 240; ++trial) {
    const std::size_t n = pick(1, 4), c = pick(1, 8), hw = pick(3, 16), co = pick(1, 8);
    const std::size_t k = kernels[pick(0, 2)], s = pick(1, 2), pad = pick(0, 2);
    if (hw + 2 * pad < k) continue;
    auto x = random_tensor<float>(Shape{n, c, hw, hw}, 1000 + trial);
    auto p = random_conv<float>(c, co, k, s, pad, trial % 2 == 0, 5000 + trial);
    auto yd = conv2d_forward(x, p, ConvStrategy::Direct);
    auto yu = conv2d_forward(x, p, ConvStrategy::Unroll);
    ASSERT_LT(max_relative_error(yu, yd), 1e-5);
    ASSERT_EQ(yu, yd);
    auto g = random_tensor<float>(yd.shape(), 9000 + trial);
    auto gd = conv2d_backward(x, p, ConvStrategy::Direct, g);
    auto gu = conv2d_backward(x, p, ConvStrategy::Unroll, g);
    ASSERT_EQ(gd.input, gu.input);
    ASSERT_EQ(gd.weight, gu.weight);
    ++checked;
  }
  EXPECT_GE(checked, 200);
}

TEST(Conv2d, DeterministicAcrossThreadCounts) {
  auto x = random_tensor<float>(Shape{6, 5, 12, 12}, 1);
  auto p = random_conv<float>(5, 7, 3, 1, 1, false, 2);
  auto g = random_tensor<float>(Shape{6, 7, 12, 12}, 3);
  Tensor<float> y1, gx1, gw1;
  {
    ScopedPool pool(1);
    y1 = conv2d_forward(x, p, ConvStrategy::Unroll);
    auto grads = conv2d_backward(x, p, ConvStrategy::Unroll, g);
    gx1 = grads.input;
    gw1 = grads.weight;
  }
  for (std::size_t t : {2u, 4u}) {
    ScopedPool pool(t);
    for (auto s : kBoth) {
      EXPECT_TRUE(bit_identical(y1, conv2d_forward(x, p, s)));
      auto grads = conv2d_backward(x, p, s, g);
      EXPECT_TRUE(bit_identical(gx1, grads.input));
      EXPECT_TRUE(bit_identical(gw1, grads.weight));
    }
  }
}

TEST(Conv2d, ShardedWeightGradientStaysClose) {
  auto x = random_tensor<float>(Shape{8, 4, 9, 9}, 1);
  auto p = random_conv<float>(4, 6, 3, 1, 1, false, 2);
  auto g = random_tensor<float>(Shape{8, 6, 9, 9}, 3);
  Tensor<float> ref;
  {
    ScopedPool pool(1);
    ref = conv2d_backward(x, p, ConvStrategy::Unroll, g).weight;
  }
  ScopedPool pool(4, /*deterministic=*/false);
  EXPECT_LT(max_relative_error(conv2d_backward(x, p, ConvStrategy::Unroll, g).weight, ref), 1e-5);
}
