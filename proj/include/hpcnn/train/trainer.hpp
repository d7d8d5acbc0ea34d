#ifndef HPCNN_TRAIN_TRAINER_HPP
#define HPCNN_TRAIN_TRAINER_HPP

#include <algorithm>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hpcnn/core/hash.hpp"
#include "hpcnn/data/loader.hpp"
#include "hpcnn/metrics/metrics.hpp"
#include "hpcnn/metrics/timer.hpp"
#include "hpcnn/model/model.hpp"
#include "hpcnn/nn/loss.hpp"
#include "hpcnn/train/optimizer.hpp"

namespace hpcnn {

struct TrainConfig {
  std::string model = "resnet18";
  std::size_t epochs = 1;
  std::size_t batch_size = 128;
  OptimizerConfig optimizer;
  SchedulerConfig scheduler;
  data::AugmentParams augment;
  perf::PerfConfig perf;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    optimizer.validate();
    scheduler.validate();
    try {
      perf.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }

  /// Every field that influences the result, in a fixed textual form.
  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "model=" << model << ";epochs=" << epochs << ";batch=" << batch_size << ";lr=" << optimizer.learning_rate
       << ";momentum=" << optimizer.momentum << ";wd=" << optimizer.weight_decay << ";milestones=";
    for (std::size_t i = 0; i < scheduler.milestones.size(); ++i) os << (i ? "," : "") << scheduler.milestones[i];
    os << ";gamma=" << scheduler.gamma << ";pad=" << augment.crop_padding << ";flip=" << augment.flip_probability
       << ";threads=" << perf.num_threads << ";autotune=" << perf.autotune << ";deterministic=" << perf.deterministic
       << ";seed=" << seed;
    return os.str();
  }

  std::uint64_t hash() const { return fnv1a64(canonical()); }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double learning_rate = 0.0;
  double train_loss = 0.0, train_acc = 0.0;
  double test_loss = 0.0, test_acc = 0.0;
  double train_seconds = 0.0, eval_seconds = 0.0;
  double epoch_seconds() const { return train_seconds + eval_seconds; }
};

struct TrainState {
  std::size_t epoch = 0;  // completed epochs
  std::uint64_t seed = 0;
  std::vector<Tensor<float>> momentum;  // one per model parameter, same order
  std::vector<EpochRecord> history;
  metrics::ConfusionMatrix confusion;  // from the latest evaluation

  double train_seconds() const {
    double t = 0;
    for (const auto& h : history) t += h.train_seconds;
    return t;
  }
  double eval_seconds() const {
    double t = 0;
    for (const auto& h : history) t += h.eval_seconds;
    return t;
  }
  double total_seconds() const { return train_seconds() + eval_seconds(); }
};

struct EvalResult {
  double loss = 0.0;
  metrics::ConfusionMatrix confusion;
  double accuracy() const { return confusion.total() ? double(confusion.trace()) / double(confusion.total()) : 0.0; }
};

inline std::size_t argmax_row(const Tensor<float>& logits, std::size_t row) {
  const std::size_t k = logits.dim(1);
  const float* p = logits.raw() + row * k;
  return std::size_t(std::max_element(p, p + k) - p);
}

/// Eval-mode pass over the whole set: no augmentation, running BN statistics.
inline EvalResult evaluate(Model<float>& model, const data::Dataset& test, std::size_t batch_size,
                           const data::NormalizationParams& norm = {}) {
  if (test.size() == 0) throw ArgumentError("evaluation set is empty");
  data::AugmentParams aug;
  aug.norm = norm;
  const auto loader = data::make_batches(test, batch_size, false, data::Split::Eval, 0, 0, aug);
  EvalResult r{0.0, metrics::ConfusionMatrix(model.num_classes())};
  for (std::size_t b = 0; b < loader.size(); ++b) {
    const auto batch = loader[b];
    const auto logits = model.forward(batch.images, Mode::Eval);
    const auto l = softmax_cross_entropy(logits, std::span<const std::size_t>(batch.labels));
    r.loss += double(l.loss) * double(batch.labels.size());
    for (std::size_t i = 0; i < batch.labels.size(); ++i) r.confusion.add(batch.labels[i], argmax_row(logits, i));
  }
  model.release();
  r.loss /= double(test.size());
  return r;
}

namespace detail {

// Re-throws with "epoch E, batch B: " prepended, keeping the error class.
[[noreturn]] inline void rethrow_with_context(const std::string& where) {
  try {
    throw;
  } catch (const DimensionError& e) {
    throw DimensionError(where + e.what());
  } catch (const DataError& e) {
    throw DataError(where + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError(where + e.what());
  } catch (const Error& e) {
    throw Error(where + e.what());
  }
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochRecord&, const TrainState&)>;

/// Runs `epochs` more epochs starting after state.epoch. Each epoch shuffles
/// with a stream derived from (seed, epoch), trains with the scheduled
/// learning rate, then evaluates. A resumed state therefore continues the
/// exact sequence an uninterrupted run would have produced.
inline TrainState train_epochs(Model<float>& model, const data::Dataset& train, const data::Dataset& test,
                               const TrainConfig& cfg, std::size_t epochs, TrainState state = {},
                               const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (epochs < 1) throw ArgumentError("train_epochs needs at least one epoch");
  if (train.size() == 0) throw ArgumentError("training set is empty");
  if (train.num_classes != model.num_classes())
    throw ArgumentError("dataset has " + std::to_string(train.num_classes) + " classes, model " +
                        std::to_string(model.num_classes()));
  perf::configure_pool(cfg.perf);
  state.seed = cfg.seed;
  const auto params = model.parameters();

  for (std::size_t e = 0; e < epochs; ++e) {
    const std::size_t epoch = state.epoch;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = scheduled_lr(epoch, cfg.optimizer.learning_rate, cfg.scheduler);
    metrics::Stopwatch watch;
    const auto loader = data::make_batches(train, cfg.batch_size, true, data::Split::Train, cfg.seed, epoch, cfg.augment);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < loader.size(); ++b) {
      try {
        const auto batch = loader[b];
        const auto logits = model.forward(batch.images, Mode::Train);
        const auto l = softmax_cross_entropy(logits, std::span<const std::size_t>(batch.labels));
        if (!std::isfinite(l.loss)) throw Error("loss is not finite");
        loss_sum += double(l.loss) * double(batch.labels.size());
        for (std::size_t i = 0; i < batch.labels.size(); ++i) correct += argmax_row(logits, i) == batch.labels[i];
        model.backward(l.grad);
        sgd_step(std::span<Parameter<float>* const>(params), state.momentum, cfg.optimizer, rec.learning_rate);
      } catch (const Error&) {
        detail::rethrow_with_context("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": ");
      }
    }
    model.release();
    rec.train_seconds = watch.seconds();
    rec.train_loss = loss_sum / double(train.size());
    rec.train_acc = double(correct) / double(train.size());

    watch.restart();
    if (test.size()) {
      auto ev = evaluate(model, test, cfg.batch_size, cfg.augment.norm);
      rec.test_loss = ev.loss;
      rec.test_acc = ev.accuracy();
      state.confusion = std::move(ev.confusion);
    }
    rec.eval_seconds = watch.seconds();

    state.history.push_back(rec);
    state.epoch = epoch + 1;
    if (on_epoch) on_epoch(rec, state);
  }
  return state;
}

}  // namespace hpcnn

#endif  // HPCNN_TRAIN_TRAINER_HPP
