#ifndef HPCNN_NN_GRAD_CHECK_HPP
#define HPCNN_NN_GRAD_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hpcnn/model/model.hpp"

namespace hpcnn {

struct GradCheckOptions {
  double step = 1e-3;       // central-difference h
  double tolerance = 1e-4;  // pass threshold on the max relative error
  // Denominator floor: relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Coordinates probed per tensor; 0 probes every element.
  std::size_t samples_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst;          // "tensor[index]" of the worst coordinate
  std::size_t checked = 0;
  bool passed = false;
};

/// A tensor whose analytic gradient is compared against finite differences.
struct GradTarget {
  std::string name;
  Tensor<double>* value = nullptr;
  Tensor<double> analytic;
};

/// Checks d/dtheta of the scalar probe loss L = sum(out * R), R fixed random.
///
/// `forward` recomputes the output from the current target values,
/// `backward(R)` must fill every target's `analytic` after a forward pass.
/// `freeze(true)`, if given, pins ReLU masks and max-pool winners at the
/// unperturbed point for the perturbed passes: the probed function is then
/// the local linear piece, whose derivative is the true gradient there, and
/// a +-h step that happens to straddle a kink cannot spoil the estimate.
inline GradCheckReport grad_check(std::vector<GradTarget>& targets, const std::function<Tensor<double>()>& forward,
                                  const std::function<void(const Tensor<double>&)>& backward,
                                  const GradCheckOptions& opt, const std::function<void(bool)>& freeze = {}) {
  // Scrambled so the probe never coincides with data drawn from the same seed.
  std::mt19937_64 rng(opt.seed * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  Tensor<double> out = forward();
  Tensor<double> r(out.shape());
  for (auto& v : r.data()) v = unit(rng);
  backward(r);
  if (freeze) freeze(true);

  auto probe_loss = [&] {
    const Tensor<double> y = forward();
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += y[i] * r[i];
    return l;
  };

  GradCheckReport rep;
  for (auto& t : targets) {
    if (t.analytic.shape() != t.value->shape())
      throw DimensionError("analytic gradient of " + t.name + " has shape " + t.analytic.shape().str() +
                           ", value has " + t.value->shape().str());
    std::vector<std::size_t> order(t.value->size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t want = opt.samples_per_tensor ? std::min(opt.samples_per_tensor, order.size()) : order.size();
    for (std::size_t k = 0; k < want; ++k) {
      const std::size_t i = order[k];
      double& x = (*t.value)[i];
      const double x0 = x;
      x = x0 + opt.step;
      const double lp = probe_loss();
      x = x0 - opt.step;
      const double lm = probe_loss();
      x = x0;
      const double numeric = (lp - lm) / (2.0 * opt.step);
      const double a = t.analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.floor});
      if (err >= rep.max_relative_error) {
        rep.max_relative_error = err;
        rep.worst = t.name + "[" + std::to_string(i) + "]";
      }
      ++rep.checked;
    }
  }
  if (freeze) freeze(false);
  // Leave the callers' caches consistent with the unperturbed values.
  forward();
  rep.passed = rep.checked > 0 && rep.max_relative_error < opt.tolerance;
  return rep;
}

/// Checks a single-input layer w.r.t. its input and every parameter, in
/// train mode.
inline GradCheckReport grad_check(Layer<double>& layer, Tensor<double> input, const GradCheckOptions& opt = {}) {
  std::vector<GradTarget> targets{{"input", &input, {}}};
  const auto params = layer.parameters();
  for (auto* p : params) targets.push_back({p->name, p->value, {}});
  return grad_check(
      targets, [&] { return layer.forward(input, Mode::Train); },
      [&](const Tensor<double>& r) {
        auto g = layer.backward(r);
        targets[0].analytic = std::move(g.at(0));
        for (std::size_t j = 0; j < params.size(); ++j) targets[j + 1].analytic = params[j]->grad;
      },
      opt, [&](bool on) { layer.freeze_branches(on); });
}

/// Whole-model check: input gradient plus every registered parameter.
inline GradCheckReport grad_check(Model<double>& model, Tensor<double> input, const GradCheckOptions& opt = {}) {
  std::vector<GradTarget> targets{{"input", &input, {}}};
  const auto params = model.parameters();
  for (auto* p : params) targets.push_back({p->name, p->value, {}});
  return grad_check(
      targets, [&] { return model.forward(input, Mode::Train); },
      [&](const Tensor<double>& r) {
        targets[0].analytic = model.backward(r);
        for (std::size_t j = 0; j < params.size(); ++j) targets[j + 1].analytic = params[j]->grad;
      },
      opt, [&](bool on) { model.freeze_branches(on); });
}

}  // namespace hpcnn

#endif  // HPCNN_NN_GRAD_CHECK_HPP
