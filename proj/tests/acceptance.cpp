// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance 3 6        just those
//
// Exit status 0 when every selected criterion passes, 77 when the only
// failures come from criteria whose environment precondition is missing
// (no CIFAR-10 files, fewer than 4 cores), 1 otherwise.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hpcnn/bench/bench.hpp"
#include "hpcnn/nn/grad_check.hpp"
#include "test_util.hpp"

using namespace hpcnn;
namespace fs = std::filesystem;
using hpcnn::test::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  bool precondition_missing = false;  // failure owed to the environment
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

const char* cifar_dir() {
  const char* d = std::getenv("CIFAR10_DIR");
  return d && *d ? d : nullptr;
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("hpcnn_accept_" + std::to_string(std::random_device{}()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

// ---------------------------------------------------------------------------
// 1. Gradient correctness

Outcome gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_at;
  std::size_t checks = 0, failed = 0;
  auto record = [&](const std::string& what, const GradCheckReport& r) {
    ++checks;
    if (!r.passed) ++failed;
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_at = what + " " + r.worst;
    }
  };

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GradCheckOptions o;
    o.seed = seed;
    std::mt19937_64 rng(seed);
    auto x4 = [&](std::size_t c, std::size_t hw) { return random_tensor<double>(Shape{2, c, hw, hw}, rng()); };

    for (auto strategy : {ConvStrategy::Direct, ConvStrategy::Unroll}) {
      const std::size_t k = seed % 3 == 0 ? 1 : 3, s = 1 + seed % 2, p = k == 3 ? seed % 2 : 0;
      Conv2d<double> conv(2, 3, k, s, p, seed % 2 == 0);
      conv.force_strategy(strategy);
      conv.params().weight = random_tensor<double>(conv.params().weight.shape(), rng());
      if (conv.params().bias) *conv.params().bias = random_tensor<double>(Shape{3}, rng());
      record("conv/" + std::string(to_string(strategy)), grad_check(conv, x4(2, 5), o));
    }
    BatchNorm2d<double> bn(3);
    bn.state().gamma = random_tensor<double>(Shape{3}, rng(), 0.5, 1.5);
    bn.state().beta = random_tensor<double>(Shape{3}, rng());
    record("batchnorm", grad_check(bn, x4(3, 4), o));
    ReLU<double> relu;
    record("relu", grad_check(relu, x4(2, 4), o));
    Pool2d<double> maxpool(PoolKind::Max, seed % 2 ? 3 : 2, 2), avg(PoolKind::GlobalAvg);
    record("maxpool", grad_check(maxpool, x4(2, 7), o));
    record("avgpool", grad_check(avg, x4(2, 5), o));
    Linear<double> lin(4, 5);
    lin.weight() = random_tensor<double>(Shape{4, 5}, rng());
    lin.bias() = random_tensor<double>(Shape{5}, rng());
    record("linear", grad_check(lin, random_tensor<double>(Shape{3, 4}, rng()), o));
    Flatten<double> flat;
    record("flatten", grad_check(flat, x4(2, 3), o));

    // Softmax cross-entropy has a scalar output; differentiate it directly.
    {
      auto z = random_tensor<double>(Shape{4, 10}, rng(), -3.0, 3.0);
      std::vector<std::size_t> t(4);
      for (auto& v : t) v = rng() % 10;
      std::vector<GradTarget> targets{{"logits", &z, {}}};
      GradCheckReport r = grad_check(
          targets, [&] { return Tensor<double>(Shape{1}, std::vector<double>{softmax_cross_entropy(z, std::span<const std::size_t>(t)).loss}); },
          [&](const Tensor<double>& probe) {
            auto g = softmax_cross_entropy(z, std::span<const std::size_t>(t)).grad;
            for (auto& v : g.data()) v *= probe[0];
            targets[0].analytic = std::move(g);
          },
          o);
      record("softmax_ce", r);
    }

    // Residual sum: two inputs, so drive the generic checker directly.
    {
      Add<double> add;
      auto a = x4(3, 4), b = x4(3, 4);
      std::vector<GradTarget> targets{{"lhs", &a, {}}, {"rhs", &b, {}}};
      const std::vector<const Tensor<double>*> in{&a, &b};
      record("add", grad_check(
                        targets, [&] { return add.forward(std::span<const Tensor<double>* const>(in), Mode::Train); },
                        [&](const Tensor<double>& probe) {
                          auto g = add.backward(probe);
                          targets[0].analytic = std::move(g.at(0));
                          targets[1].analytic = std::move(g.at(1));
                        },
                        o));
    }

    auto tiny = build_tinycnn<double>(10, seed);
    GradCheckOptions to = o;
    to.samples_per_tensor = 8;
    record("tinycnn", grad_check(tiny, random_tensor<double>(Shape{2, 3, 32, 32}, rng()), to));
  }
  const double secs = since(t0);
  Outcome out;
  out.pass = failed == 0 && worst < 1e-4 && secs < 60.0;
  out.detail = std::to_string(checks) + " checks over 20 seeds, " + std::to_string(failed) + " failed, max rel err " +
               sci(worst) + " (" + worst_at + "), " + fmt(secs, 1) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// 2. Kernel equivalence

Outcome kernels() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  std::size_t cases = 0, bad = 0;
  double worst = 0.0;
  while (cases < 250) {
    const std::size_t n = pick(1, 4), c = pick(1, 16), co = pick(1, 16), h = pick(1, 20), w = pick(1, 20);
    const std::size_t k = std::size_t(2 * pick(0, 3) + 1), s = pick(1, 3), p = pick(0, k / 2 + 1);
    if (h + 2 * p < k || w + 2 * p < k) continue;
    auto params = ConvParams<float>::make(c, co, k, s, p, pick(0, 1) == 1);
    params.weight = random_tensor<float>(params.weight.shape(), rng());
    if (params.bias) *params.bias = random_tensor<float>(Shape{co}, rng());
    const auto x = random_tensor<float>(Shape{n, c, h, w}, rng());
    const auto yd = conv2d_forward(x, params, ConvStrategy::Direct);
    const auto yu = conv2d_forward(x, params, ConvStrategy::Unroll);
    const auto g = random_tensor<float>(yd.shape(), rng());
    const auto bd = conv2d_backward(x, params, ConvStrategy::Direct, g);
    const auto bu = conv2d_backward(x, params, ConvStrategy::Unroll, g);
    double e = max_relative_error(yu, yd);
    e = std::max({e, max_relative_error(bu.input, bd.input), max_relative_error(bu.weight, bd.weight)});
    worst = std::max(worst, e);
    if (!(e < 1e-5)) ++bad;
    ++cases;
  }
  const double secs = since(t0);
  return {bad == 0 && secs < 60.0,
          std::to_string(cases) + " random shapes (forward and backward), " + std::to_string(bad) +
              " outside 1e-5, max rel diff " + sci(worst) + ", " + fmt(secs, 1) + " s"};
}

// ---------------------------------------------------------------------------
// 3. Metrics oracle

Outcome metrics_oracle() {
  std::mt19937_64 rng(3);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t k = 2 + rng() % 9, n = 1 + rng() % 300;
    std::vector<std::size_t> actual(n), predicted(n);
    for (std::size_t i = 0; i < n; ++i) {
      actual[i] = rng() % k;
      predicted[i] = rng() % 3 == 0 ? actual[i] : rng() % k;  // skewed towards correct
    }
    const auto rep = metrics::compute_metrics(metrics::confusion(actual, predicted, k));
    double macro_p = 0, macro_r = 0, macro_f = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += actual[i] == predicted[i];
    if (rep.accuracy != double(correct) / double(n)) ++mismatches;
    for (std::size_t c = 0; c < k; ++c) {
      std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool is = actual[i] == c, said = predicted[i] == c;
        tp += is && said;
        tn += !is && !said;
        fp += !is && said;
        fn += is && !said;
      }
      const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
      const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
      const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
      const auto b = metrics::one_vs_rest(metrics::confusion(actual, predicted, k), c);
      if (b.tp != tp || b.tn != tn || b.fp != fp || b.fn != fn) ++mismatches;
      if (rep.precision[c] != p || rep.recall[c] != r || rep.f1[c] != f) ++mismatches;
      macro_p += p;
      macro_r += r;
      macro_f += f;
    }
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
    if (!close(rep.macro_precision, macro_p / double(k)) || !close(rep.macro_recall, macro_r / double(k)) ||
        !close(rep.macro_f1, macro_f / double(k)))
      ++mismatches;
  }

  // Binary fixture: TP=35, FN=5, FP=10, TN=50 with class 1 as positive.
  metrics::ConfusionMatrix cm(2);
  for (int i = 0; i < 35; ++i) cm.add(1, 1);
  for (int i = 0; i < 5; ++i) cm.add(1, 0);
  for (int i = 0; i < 10; ++i) cm.add(0, 1);
  for (int i = 0; i < 50; ++i) cm.add(0, 0);
  const auto rep = metrics::compute_metrics(cm);
  auto r4 = [](double v) { return std::round(v * 1e4) / 1e4; };
  const bool binary = r4(rep.accuracy) == 0.85 && r4(rep.precision[1]) == 0.7778 && r4(rep.recall[1]) == 0.875 &&
                      r4(rep.f1[1]) == 0.8235;
  return {mismatches == 0 && binary,
          "120 random label vectors, " + std::to_string(mismatches) + " mismatches; binary case acc " +
              fmt(rep.accuracy, 4) + " P " + fmt(rep.precision[1], 4) + " R " + fmt(rep.recall[1], 4) + " F1 " +
              fmt(rep.f1[1], 4)};
}

// ---------------------------------------------------------------------------
// 4. Optimizer / scheduler fixtures

Outcome optimizer_fixtures() {
  std::vector<std::string> bad;
  auto step = [](double w, double g, double& v, double lr, double m, double wd) {
    Tensor<double> W(Shape{1}, std::vector<double>{w}), G(Shape{1}, std::vector<double>{g}),
        V(Shape{1}, std::vector<double>{v});
    sgd_update(W, G, V, lr, m, wd, true);
    v = V[0];
    return W[0];
  };
  double v = 0;
  if (step(1.0, 0.5, v, 0.1, 0.0, 0.0) != 0.95) bad.push_back("plain step");
  v = 0;
  const double w_wd = step(1.0, 0.5, v, 0.1, 0.0, 5e-4);
  if (v != 0.5 + 5e-4 * 1.0 || w_wd != 1.0 - 0.1 * (0.5 + 5e-4)) bad.push_back("weight decay");
  if (std::abs(w_wd - 0.94995) > 1e-15) bad.push_back("weight decay value");
  v = 0;
  const double w1 = step(1.0, 0.5, v, 0.1, 0.2, 0.0);
  const double v1 = v;
  const double w2 = step(w1, 0.5, v, 0.1, 0.2, 0.0);
  if (v1 != 0.5 || w1 != 0.95 || std::abs(v - 0.6) > 1e-15 || std::abs(w2 - 0.89) > 1e-15) bad.push_back("momentum");

  const SchedulerConfig sched;  // milestones 150, 250; gamma 0.1
  const OptimizerConfig opt;
  auto lr = [&](std::size_t e) { return scheduled_lr(e, opt.learning_rate, sched); };
  if (lr(0) != 0.1 || lr(149) != 0.1) bad.push_back("lr before first milestone");
  if (std::abs(lr(150) - 0.01) > 1e-15 || std::abs(lr(249) - 0.01) > 1e-15) bad.push_back("lr after 150");
  if (std::abs(lr(250) - 0.001) > 1e-15) bad.push_back("lr after 250");
  if (opt.momentum != 0.2 || opt.weight_decay != 5e-4) bad.push_back("defaults");

  std::string detail = "sgd fixtures and lr(0/149/150/250) = " + fmt(lr(0), 3) + "/" + fmt(lr(149), 3) + "/" +
                       fmt(lr(150), 3) + "/" + fmt(lr(250), 3);
  for (const auto& b : bad) detail += "; mismatch: " + b;
  return {bad.empty(), detail};
}

// ---------------------------------------------------------------------------
// 5. Data fidelity

Outcome data_fidelity() {
  std::vector<std::string> bad;
  TempDir dir;
  // Full-size fixture files in the CIFAR-10 binary layout with balanced labels.
  std::mt19937_64 rng(5);
  auto make = [&](std::size_t n) {
    data::Dataset ds;
    ds.pixels.resize(n * data::kImageBytes);
    for (auto& b : ds.pixels) b = static_cast<std::uint8_t>(rng());
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<std::uint8_t>((i * 7) % 10);
    return ds;
  };
  std::vector<data::Dataset> written;
  for (const auto& f : data::kTrainFiles) {
    written.push_back(make(data::kRecordsPerFile));
    data::write_batch_file(dir.path / f, written.back());
  }
  written.push_back(make(data::kRecordsPerFile));
  data::write_batch_file(dir.path / data::kTestFile, written.back());
  for (const auto& f : data::kTrainFiles)
    if (fs::file_size(dir.path / f) != 30'730'000) bad.push_back("fixture size");

  const auto splits = data::load_cifar10(dir.path);
  auto per_class = [](const data::Dataset& ds, std::size_t expect) {
    for (auto c : ds.class_counts())
      if (c != expect) return false;
    return true;
  };
  if (splits.train.size() != 50000 || !per_class(splits.train, 5000)) bad.push_back("train class counts");
  if (splits.test.size() != 10000 || !per_class(splits.test, 1000)) bad.push_back("test class counts");
  if (std::vector<std::uint8_t>(splits.train.pixels.begin(), splits.train.pixels.begin() + 10000 * 3072) !=
          written[0].pixels ||
      splits.test.labels != written[5].labels)
    bad.push_back("byte round trip");
  const auto rec = data::encode_record(splits.train.image(123));
  std::vector<std::uint8_t> raw{written[0].labels[123]};
  raw.insert(raw.end(), written[0].pixels.begin() + 123 * 3072, written[0].pixels.begin() + 124 * 3072);
  if (rec != raw) bad.push_back("record encode/decode");

  // A file one byte short and a record with label 10 must be rejected.
  {
    std::ofstream(dir.path / "short.bin", std::ios::binary) << std::string(data::kFileBytes - 1, '\0');
    bool threw = false;
    try {
      data::read_batch_file(dir.path / "short.bin");
    } catch (const DataError&) {
      threw = true;
    }
    if (!threw) bad.push_back("short file accepted");
    auto corrupt = written[5];
    corrupt.labels[17] = 10;
    std::ofstream out(dir.path / "bad_label.bin", std::ios::binary);
    for (std::size_t i = 0; i < corrupt.size(); ++i) {
      out.put(char(corrupt.labels[i]));
      out.write(reinterpret_cast<const char*>(corrupt.pixels.data() + i * 3072), 3072);
    }
    out.close();
    threw = false;
    try {
      data::read_batch_file(dir.path / "bad_label.bin");
    } catch (const DataError&) {
      threw = true;
    }
    if (!threw) bad.push_back("label 10 accepted");
  }

  Tensor<float> px(Shape{3, 32, 32});
  px.fill(0.4914f);
  px[1] = 1.0f;
  const auto n = data::normalize(px);
  if (std::abs(n[0]) > 1e-6 || std::abs(n[1] - 2.5141f) > 1e-4) bad.push_back("normalization fixture");

  std::string detail = "full-size fixture files: sizes, 5000/1000 per class, byte round trip, rejections; R 0.4914 -> " +
                       fmt(n[0], 4) + ", 1.0 -> " + fmt(n[1], 4);
  if (const char* real = cifar_dir()) {
    const auto c = data::load_cifar10(real);
    if (!per_class(c.train, 5000) || !per_class(c.test, 1000)) bad.push_back("real CIFAR-10 class counts");
    detail += "; real CIFAR-10 at " + std::string(real) + " checked";
  } else {
    detail += "; CIFAR10_DIR unset, real files not checked";
  }
  for (const auto& b : bad) detail += "; mismatch: " + b;
  return {bad.empty(), detail};
}

// ---------------------------------------------------------------------------
// Shared run configuration for the resnet-scale criteria.

bench::RunConfig resnet_run(std::size_t per_class, std::size_t threads) {
  bench::RunConfig c;
  c.train.model = "resnet18";
  c.train.epochs = 1;
  c.train.batch_size = 128;
  c.train.perf.num_threads = threads;
  c.train.perf.deterministic = true;
  c.seed = 2024;
  if (const char* d = cifar_dir()) {
    c.data_dir = d;
    c.subset = per_class;
    c.test_subset = 10;
  } else {
    c.synthetic = true;
    c.synthetic_train = per_class * 10;
    c.synthetic_test = 100;
  }
  return c;
}

bool same_parameters(const bench::RunResult& a, const bench::RunResult& b) {
  if (a.parameters.size() != b.parameters.size()) return false;
  for (std::size_t i = 0; i < a.parameters.size(); ++i)
    if (!bit_identical(a.parameters[i], b.parameters[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// 6. Determinism

Outcome determinism() {
  const auto t0 = Clock::now();
  const auto data = bench::load_data(resnet_run(50, 1));
  const bench::RunOptions quiet{false};
  const auto a = bench::run(resnet_run(50, 1), data, quiet);
  const auto b = bench::run(resnet_run(50, 1), data, quiet);
  const bool repeat = same_parameters(a, b);
  bool threads_ok = true;
  std::string per_thread;
  for (std::size_t t : {2, 4}) {
    const auto r = bench::run(resnet_run(50, t), data, quiet);
    const bool same = same_parameters(a, r);
    threads_ok = threads_ok && same;
    per_thread += " t=" + std::to_string(t) + (same ? " identical" : " DIFFERENT");
  }
  return {repeat && threads_ok,
          "resnet18, 1 epoch, " + std::to_string(data.train.size()) + " images (" +
              (cifar_dir() ? "CIFAR-10 subset" : "synthetic") + "): repeat run " +
              (repeat ? "identical" : "DIFFERENT") + ";" + per_thread + " vs t=1; " + fmt(since(t0), 1) + " s"};
}

// ---------------------------------------------------------------------------
// 7. Learning at desk scale

Outcome learning() {
  // tinycnn on separable synthetic data with the default optimizer settings.
  const auto t0 = Clock::now();
  bench::RunConfig tiny;
  tiny.train.model = "tinycnn";
  tiny.train.epochs = 3;
  tiny.train.batch_size = 64;
  tiny.train.perf.num_threads = 1;
  tiny.synthetic = true;
  tiny.synthetic_train = 5000;
  tiny.synthetic_test = 1000;
  tiny.seed = 7;
  const auto r = bench::run(tiny, bench::RunOptions{false});
  const double tiny_secs = since(t0);
  const double train_acc = r.state.history.back().train_acc;
  const bool tiny_ok = train_acc >= 0.80 && tiny_secs < 60.0;
  std::string detail = "tinycnn synthetic: train acc " + fmt(100 * train_acc, 2) + "% after 3 epochs in " +
                       fmt(tiny_secs, 1) + " s (" + (tiny_ok ? "ok" : "below target") + ")";

  const char* real = cifar_dir();
  if (!real) {
    detail += "; resnet18 part needs CIFAR-10 (set CIFAR10_DIR), not run";
    return {false, detail, tiny_ok};
  }
  const auto t1 = Clock::now();
  bench::RunConfig res;
  res.train.model = "resnet18";
  res.train.epochs = 5;
  res.train.batch_size = 128;  // default lr, momentum and weight decay
  res.train.perf.num_threads = std::max(1u, std::thread::hardware_concurrency());
  res.data_dir = real;
  res.subset = 500;
  res.seed = 1;
  const auto rr = bench::run(res, bench::RunOptions{false, {}, &std::cerr});
  const bool res_ok = rr.test_accuracy() >= 0.35;
  detail += "; resnet18 5000-image subset: test acc " + fmt(100 * rr.test_accuracy(), 2) + "% after 5 epochs in " +
            fmt(since(t1) / 60.0, 1) + " min";
  return {tiny_ok && res_ok, detail};
}

// ---------------------------------------------------------------------------
// 8. HPC-tools speedup analog

Outcome speedup() {
  bench::RunConfig base = resnet_run(160, 1);  // 1600 images = 50 batches of 32
  base.train.batch_size = 32;
  base.train.perf.autotune = false;
  base.label = "No HPC tools & ResNet-18";
  if (cifar_dir()) base.subset = 160;
  bench::RunConfig hpc = base;
  hpc.train.perf.num_threads = 4;
  hpc.train.perf.autotune = true;
  hpc.label = "HPC tools & ResNet-18";
  perf::tuner().cache().clear();

  TempDir dir;
  const auto rows = bench::compare({base, hpc}, dir.path, bench::Format::Markdown, bench::RunOptions{true});
  const double s = rows[0].training_seconds() / rows[1].training_seconds();
  const bool same_acc = rows[0].test_accuracy() == rows[1].test_accuracy();
  const unsigned cores = std::thread::hardware_concurrency();
  const bool verified = cores >= 4;
  const bool pass = same_acc && (verified ? s >= 1.2 : s > 1.0);
  std::string detail = "resnet18 50 batches of 32: " + fmt(rows[0].training_seconds(), 1) + " s -> " +
                       fmt(rows[1].training_seconds(), 1) + " s, speedup " + fmt(s, 3) + " (need " +
                       (verified ? ">= 1.2" : "> 1.0") + ", " + std::to_string(cores) + " hardware threads), accuracy " +
                       (same_acc ? "identical" : "DIFFERS");
  if (!verified) detail += "; machine below the 4-core precondition";
  return {pass, detail, !pass && same_acc && !verified};
}

// ---------------------------------------------------------------------------
// 9. Report fidelity

Outcome report_fidelity() {
  TempDir dir;
  bench::RunConfig c;
  c.train.model = "tinycnn";
  c.train.epochs = 3;
  c.train.batch_size = 32;
  c.train.perf.num_threads = 1;
  c.synthetic = true;
  c.synthetic_train = 300;
  c.synthetic_test = 100;
  c.seed = 9;
  auto c2 = c;
  c2.train.perf.num_threads = 2;
  c2.label = "TinyCNN 2 threads";
  std::vector<std::string> bad;
  const auto rows = bench::compare({c, c2}, dir.path, bench::Format::Csv, bench::RunOptions{true});

  auto lines = [](const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);)
      if (!l.empty() && l[0] != '#') out.push_back(l);
    return out;
  };
  const std::string header = "Configuration,Epoch,Test Acc,Precision,Recall,F1 Score,Training Time(s),Speedup";
  if (lines(dir.path / "report.csv").at(0) != header) bad.push_back("csv header");
  const auto md = bench::format_report(rows, bench::Format::Markdown, true);
  if (md.rfind("| Configuration | Epoch | Test Acc | Precision | Recall | F1 Score | Training Time(s) | Speedup |", 0) != 0)
    bad.push_back("markdown header");
  const auto js = bench::json::parse(bench::format_report(rows, bench::Format::Json, true));
  std::vector<std::string> cols = bench::kReportColumns;
  cols.push_back("Speedup");
  if (js["columns"].get<std::vector<std::string>>() != cols) bad.push_back("json columns");

  for (const char* sub : {"1_no_hpc_tools_tinycnn", "2_tinycnn_2_threads"}) {
    const auto curve = lines(dir.path / sub / "curves.csv");
    if (curve.size() != 1 + c.train.epochs) bad.push_back(std::string(sub) + " curve rows");
    if (curve.at(0) != "epoch,train_loss,train_acc,test_loss,test_acc,epoch_time_s") bad.push_back("curve header");
    for (std::size_t i = 1; i < curve.size(); ++i) {
      std::stringstream ss(curve[i]);
      std::vector<double> v;
      for (std::string f; std::getline(ss, f, ',');) v.push_back(std::stod(f));
      if (v.size() != 6 || v[0] != double(i) || v[2] < 0 || v[2] > 1 || v[4] < 0 || v[4] > 1 || v[1] < 0 || v[3] < 0 ||
          v[5] <= 0)
        bad.push_back(std::string(sub) + " curve row " + std::to_string(i));
    }
  }
  std::string detail = "csv, markdown and json headers; " + std::to_string(rows.size()) + " curve files with " +
                       std::to_string(c.train.epochs) + " in-range rows each";
  for (const auto& b : bad) detail += "; mismatch: " + b;
  return {bad.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},      {"kernel equivalence", kernels},
      {"metrics oracle", metrics_oracle},       {"optimizer/scheduler fixtures", optimizer_fixtures},
      {"data fidelity", data_fidelity},         {"determinism", determinism},
      {"learning at desk scale", learning},     {"speedup with threads + autotune", speedup},
      {"report fidelity", report_fidelity}};

  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > int(criteria.size())) {
      std::cerr << "unknown criterion '" << argv[i] << "'\n";
      return 2;
    }
    selected.push_back(std::size_t(n));
  }
  if (selected.empty())
    for (std::size_t i = 1; i <= criteria.size(); ++i) selected.push_back(i);

  bool hard_failure = false, env_failure = false;
  for (auto n : selected) {
    const auto& [name, fn] = criteria[n - 1];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << n << " (" << name << "): " << o.detail << std::endl;
    if (!o.pass) (o.precondition_missing ? env_failure : hard_failure) = true;
  }
  if (hard_failure) return 1;
  return env_failure ? 77 : 0;
}
