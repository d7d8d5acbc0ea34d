#ifndef HPCNN_TRAIN_OPTIMIZER_HPP
#define HPCNN_TRAIN_OPTIMIZER_HPP

#include <cmath>
#include <span>
#include <vector>

#include "hpcnn/model/layers.hpp"

namespace hpcnn {

struct OptimizerConfig {
  double learning_rate = 0.1;
  double momentum = 0.2;
  double weight_decay = 5e-4;

  /// Same learning rate and decay with the more common momentum of 0.9.
  static OptimizerConfig conventional() { return {0.1, 0.9, 5e-4}; }

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  }
};

struct SchedulerConfig {
  std::vector<std::size_t> milestones{150, 250};
  double gamma = 0.1;

  void validate() const {
    for (std::size_t i = 1; i < milestones.size(); ++i)
      if (milestones[i] <= milestones[i - 1]) throw ConfigError("scheduler milestones must be strictly increasing");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("scheduler gamma must lie in (0, 1]");
  }
};

/// base_lr * gamma^(number of milestones <= epoch); epochs count from 0.
inline double scheduled_lr(std::size_t epoch, double base_lr, const SchedulerConfig& cfg = {}) {
  double lr = base_lr;
  for (auto m : cfg.milestones)
    if (m <= epoch) lr *= cfg.gamma;
  return lr;
}

/// One SGD step on a single tensor:
///   g' = g + wd * w   (only when `decay`),   v = m * v + g',   w = w - lr * v.
template <typename T>
void sgd_update(Tensor<T>& w, const Tensor<T>& g, Tensor<T>& v, double lr, double momentum, double weight_decay,
                bool decay = true) {
  if (g.shape() != w.shape() || v.shape() != w.shape())
    throw DimensionError("sgd: weight " + w.shape().str() + ", grad " + g.shape().str() + ", buffer " +
                         v.shape().str());
  const T tlr = static_cast<T>(lr), tm = static_cast<T>(momentum), twd = static_cast<T>(decay ? weight_decay : 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const T gd = g[i] + twd * w[i];
    v[i] = tm * v[i] + gd;
    w[i] = w[i] - tlr * v[i];
  }
}

/// Applies sgd_update to every parameter, creating zeroed momentum buffers
/// on first use. `lr` overrides cfg.learning_rate (scheduler output).
template <typename T>
void sgd_step(std::span<Parameter<T>* const> params, std::vector<Tensor<T>>& buffers, const OptimizerConfig& cfg,
              double lr) {
  if (buffers.empty())
    for (auto* p : params) buffers.emplace_back(p->value->shape());
  if (buffers.size() != params.size())
    throw DimensionError("sgd: " + std::to_string(buffers.size()) + " momentum buffers for " +
                         std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    sgd_update(*params[i]->value, params[i]->grad, buffers[i], lr, cfg.momentum, cfg.weight_decay, params[i]->decay);
}

}  // namespace hpcnn

#endif  // HPCNN_TRAIN_OPTIMIZER_HPP
