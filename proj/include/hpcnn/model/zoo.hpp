#ifndef HPCNN_MODEL_ZOO_HPP
#define HPCNN_MODEL_ZOO_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>

#include "hpcnn/model/model.hpp"

namespace hpcnn {

namespace detail {

// Kaiming normal with fan-out scaling for conv weights, U(-1/sqrt(fan_in),
// 1/sqrt(fan_in)) for linear weights, zero biases, BN gamma 1 / beta 0.
template <typename T>
void init_parameters(Model<T>& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& node : m.nodes()) {
    if (auto* conv = dynamic_cast<Conv2d<T>*>(node.layer.get())) {
      auto& p = conv->params();
      const double fan_out = double(p.out_channels * p.kernel * p.kernel);
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_out));
      for (auto& v : p.weight.data()) v = static_cast<T>(dist(rng));
      if (p.bias) p.bias->fill(T(0));
    } else if (auto* lin = dynamic_cast<Linear<T>*>(node.layer.get())) {
      const double bound = 1.0 / std::sqrt(double(lin->weight().dim(0)));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : lin->weight().data()) v = static_cast<T>(dist(rng));
      lin->bias().fill(T(0));
    }
  }
}

template <typename T>
std::size_t conv_bn_relu(Model<T>& m, const std::string& conv_name, const std::string& bn_name,
                         const std::string& relu_name, std::size_t in, std::size_t out, std::size_t stride) {
  m.add(conv_name, std::make_unique<Conv2d<T>>(in, out, 3, stride, 1, false));
  m.add(bn_name, std::make_unique<BatchNorm2d<T>>(out));
  return m.add(relu_name, std::make_unique<ReLU<T>>());
}

// conv3x3-BN-ReLU-conv3x3-BN plus identity or projection shortcut, then ReLU.
template <typename T>
std::size_t basic_block(Model<T>& m, const std::string& prefix, std::size_t input, std::size_t in, std::size_t out,
                        std::size_t stride) {
  m.add(prefix + ".conv1", std::make_unique<Conv2d<T>>(in, out, 3, stride, 1, false), {input});
  m.add(prefix + ".bn1", std::make_unique<BatchNorm2d<T>>(out));
  m.add(prefix + ".relu1", std::make_unique<ReLU<T>>());
  m.add(prefix + ".conv2", std::make_unique<Conv2d<T>>(out, out, 3, 1, 1, false));
  const std::size_t main = m.add(prefix + ".bn2", std::make_unique<BatchNorm2d<T>>(out));
  std::size_t skip = input;
  if (stride != 1 || in != out) {
    m.add(prefix + ".shortcut.0", std::make_unique<Conv2d<T>>(in, out, 1, stride, 0, false), {input});
    skip = m.add(prefix + ".shortcut.1", std::make_unique<BatchNorm2d<T>>(out));
  }
  m.add(prefix + ".add", std::make_unique<Add<T>>(), {main, skip});
  return m.add(prefix + ".relu2", std::make_unique<ReLU<T>>());
}

inline void require_classes(std::size_t num_classes) {
  if (num_classes < 2) throw ArgumentError("a classifier needs at least two classes");
}

}  // namespace detail

/// ResNet-18 for 32x32 inputs: 3x3 stride-1 stem without max pooling, four
/// stages of two basic blocks (64, 128, 256, 512 channels; first-block
/// strides 1, 2, 2, 2), global average pooling, linear classifier.
template <typename T>
Model<T> build_resnet18_cifar(std::size_t num_classes, std::uint64_t seed = 0) {
  detail::require_classes(num_classes);
  Model<T> m("resnet18", num_classes);
  std::size_t x = detail::conv_bn_relu(m, "conv1", "bn1", "relu", 3, 64, 1);
  const std::size_t widths[] = {64, 128, 256, 512};
  std::size_t in = 64;
  for (std::size_t stage = 0; stage < 4; ++stage) {
    const std::string name = "layer" + std::to_string(stage + 1);
    x = detail::basic_block(m, name + ".0", x, in, widths[stage], stage == 0 ? 1 : 2);
    x = detail::basic_block(m, name + ".1", x, widths[stage], widths[stage], 1);
    in = widths[stage];
  }
  m.add("avgpool", std::make_unique<Pool2d<T>>(PoolKind::GlobalAvg));
  m.add("flatten", std::make_unique<Flatten<T>>());
  m.add("linear", std::make_unique<Linear<T>>(512, num_classes));
  detail::init_parameters(m, seed);
  return m;
}

/// Five 3x3 convolutions (64, 192, 384, 256, 256 channels) with overlapping
/// 3x3/stride-2 max pooling after conv1, conv2 and conv5 (32 -> 15 -> 7 -> 3),
/// then fully connected 2304 -> 512 -> num_classes.
template <typename T>
Model<T> build_alexnet_cifar(std::size_t num_classes, std::uint64_t seed = 0) {
  detail::require_classes(num_classes);
  Model<T> m("alexnet", num_classes);
  auto conv = [&](const std::string& name, std::size_t in, std::size_t out) {
    m.add("features." + name, std::make_unique<Conv2d<T>>(in, out, 3, 1, 1, true));
    m.add("features." + name + ".relu", std::make_unique<ReLU<T>>());
  };
  auto pool = [&](const std::string& name) { m.add("features." + name, std::make_unique<Pool2d<T>>(PoolKind::Max, 3, 2)); };
  conv("conv1", 3, 64);
  pool("pool1");
  conv("conv2", 64, 192);
  pool("pool2");
  conv("conv3", 192, 384);
  conv("conv4", 384, 256);
  conv("conv5", 256, 256);
  pool("pool5");
  m.add("flatten", std::make_unique<Flatten<T>>());
  m.add("classifier.fc1", std::make_unique<Linear<T>>(256 * 3 * 3, 512));
  m.add("classifier.relu", std::make_unique<ReLU<T>>());
  m.add("classifier.fc2", std::make_unique<Linear<T>>(512, num_classes));
  detail::init_parameters(m, seed);
  return m;
}

/// Desk-scale model: two conv-BN-ReLU-maxpool blocks (8 and 16 channels)
/// and a linear classifier over the 16 x 8 x 8 feature map.
template <typename T>
Model<T> build_tinycnn(std::size_t num_classes, std::uint64_t seed = 0) {
  detail::require_classes(num_classes);
  Model<T> m("tinycnn", num_classes);
  detail::conv_bn_relu(m, "block1.conv", "block1.bn", "block1.relu", 3, 8, 1);
  m.add("block1.pool", std::make_unique<Pool2d<T>>(PoolKind::Max, 2, 2));
  detail::conv_bn_relu(m, "block2.conv", "block2.bn", "block2.relu", 8, 16, 1);
  m.add("block2.pool", std::make_unique<Pool2d<T>>(PoolKind::Max, 2, 2));
  m.add("flatten", std::make_unique<Flatten<T>>());
  m.add("linear", std::make_unique<Linear<T>>(16 * 8 * 8, num_classes));
  detail::init_parameters(m, seed);
  return m;
}

/// Builds a model by name: "resnet18", "alexnet" or "tinycnn".
template <typename T>
Model<T> build_model(const std::string& name, std::size_t num_classes, std::uint64_t seed = 0) {
  if (name == "resnet18") return build_resnet18_cifar<T>(num_classes, seed);
  if (name == "alexnet") return build_alexnet_cifar<T>(num_classes, seed);
  if (name == "tinycnn") return build_tinycnn<T>(num_classes, seed);
  throw ConfigError("unknown model '" + name + "' (expected resnet18, alexnet or tinycnn)");
}

}  // namespace hpcnn

#endif  // HPCNN_MODEL_ZOO_HPP
