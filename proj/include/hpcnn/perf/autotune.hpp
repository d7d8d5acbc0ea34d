#ifndef HPCNN_PERF_AUTOTUNE_HPP
#define HPCNN_PERF_AUTOTUNE_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <compare>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "hpcnn/core/error.hpp"
#include "hpcnn/nn/conv.hpp"
#include "hpcnn/perf/parallel.hpp"

namespace hpcnn::perf {

/// Shape key for kernel selection: (N, C_in, H, W, C_out, k, s, p).
struct LayerSignature {
  std::size_t n = 1, c_in = 1, h = 1, w = 1, c_out = 1, k = 1, s = 1, p = 0;

  auto operator<=>(const LayerSignature&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << "N=" << n << " C=" << c_in << " H=" << h << " W=" << w << " Cout=" << c_out << " k=" << k << " s=" << s
       << " p=" << p;
    return os.str();
  }

  template <typename T>
  static LayerSignature of(const Shape4& in, const ConvParams<T>& params) {
    return {in.n, in.c, in.h, in.w, params.out_channels, params.kernel, params.stride, params.padding};
  }
};

struct TuneRecord {
  ConvStrategy choice = ConvStrategy::Unroll;
  double direct_seconds = 0.0;
  double unroll_seconds = 0.0;
  bool fallback = false;  // measurement failed, DIRECT chosen without timing
  std::string note;
  bool pruned = false;  // DIRECT cut short; direct_seconds is its one over-bound run
};

/// Argmin over the recorded medians; exact ties go to DIRECT.
inline ConvStrategy fastest(double direct_seconds, double unroll_seconds) {
  return unroll_seconds < direct_seconds ? ConvStrategy::Unroll : ConvStrategy::Direct;
}

/// Runs f `warmup` times unmeasured, then `reps` times on the monotonic
/// clock, and returns the median duration in seconds. The measured samples
/// are appended to `samples` when given.
///
/// With a finite `give_up_after`, every call (warmup included) is timed and
/// the loop stops at the first one slower than that bound; the return value
/// is then that call's duration and `gave_up` is set.
template <typename F>
double benchmark_op(F&& f, std::size_t warmup, std::size_t reps, std::vector<double>* samples = nullptr,
                    double give_up_after = std::numeric_limits<double>::infinity(), bool* gave_up = nullptr) {
  if (reps < 1) throw ArgumentError("benchmark_op needs at least one measured repetition");
  if (gave_up) *gave_up = false;
  auto timed = [&] {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  for (std::size_t i = 0; i < warmup; ++i) {
    const double t = timed();
    if (t > give_up_after) {
      if (gave_up) *gave_up = true;
      return t;
    }
  }
  std::vector<double> times;
  times.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    times.push_back(timed());
    if (times.back() > give_up_after) {
      if (gave_up) *gave_up = true;
      return times.back();
    }
  }
  if (samples) samples->insert(samples->end(), times.begin(), times.end());
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  return times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

/// Signature -> tuned strategy map. Lookups take a shared lock, inserts an
/// exclusive one.
class TuneCache {
 public:
  static constexpr int kVersion = 1;

  TuneCache() = default;
  TuneCache(const TuneCache& other) : records_(other.snapshot()) {}
  TuneCache& operator=(const TuneCache& other) {
    auto copy = other.snapshot();
    std::unique_lock lock(mutex_);
    records_ = std::move(copy);
    return *this;
  }

  std::optional<TuneRecord> find(const LayerSignature& sig) const {
    std::shared_lock lock(mutex_);
    auto it = records_.find(sig);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  void store(const LayerSignature& sig, TuneRecord rec) {
    std::unique_lock lock(mutex_);
    records_[sig] = std::move(rec);
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
  }

  void clear() {
    std::unique_lock lock(mutex_);
    records_.clear();
  }

  std::map<LayerSignature, TuneRecord> snapshot() const {
    std::shared_lock lock(mutex_);
    return records_;
  }

  /// One line per signature:
  ///   version=1 N=.. C=.. H=.. W=.. Cout=.. k=.. s=.. p=.. direct=<s> unroll=<s> choice=UNROLL
  void save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp);
      if (!out) throw IoError("cannot write tune cache " + tmp);
      out << "# hpcnn convolution tune cache\n";
      out.precision(9);
      for (const auto& [sig, rec] : snapshot()) {
        out << "version=" << kVersion << ' ' << sig.str() << " direct=" << rec.direct_seconds
            << " unroll=" << rec.unroll_seconds << " choice=" << to_string(rec.choice);
        if (rec.fallback) out << " fallback=1";
        if (rec.pruned) out << " pruned=1";
        out << '\n';
      }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move tune cache into " + path);
  }

  /// Reads a cache file. Records stamped with another version are dropped,
  /// malformed lines raise CorruptionError, a missing file yields an empty cache.
  static TuneCache load(const std::string& path) {
    TuneCache cache;
    std::ifstream in(path);
    if (!in) return cache;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::map<std::string, std::string> kv;
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
          throw CorruptionError("tune cache " + path + ":" + std::to_string(line_no) + ": bad token '" + tok + "'");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
      }
      try {
        if (std::stoi(kv.at("version")) != kVersion) continue;
        LayerSignature sig{std::stoul(kv.at("N")),    std::stoul(kv.at("C")), std::stoul(kv.at("H")),
                           std::stoul(kv.at("W")),    std::stoul(kv.at("Cout")), std::stoul(kv.at("k")),
                           std::stoul(kv.at("s")),    std::stoul(kv.at("p"))};
        TuneRecord rec;
        rec.direct_seconds = std::stod(kv.at("direct"));
        rec.unroll_seconds = std::stod(kv.at("unroll"));
        rec.choice = parse_strategy(kv.at("choice"));
        rec.fallback = kv.count("fallback") && kv["fallback"] == "1";
        rec.pruned = kv.count("pruned") && kv["pruned"] == "1";
        cache.store(sig, rec);
      } catch (const std::out_of_range&) {
        throw CorruptionError("tune cache " + path + ":" + std::to_string(line_no) + ": missing field");
      } catch (const std::invalid_argument&) {
        throw CorruptionError("tune cache " + path + ":" + std::to_string(line_no) + ": unparsable value");
      } catch (const ArgumentError&) {
        throw CorruptionError("tune cache " + path + ":" + std::to_string(line_no) + ": unknown strategy");
      }
    }
    return cache;
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<LayerSignature, TuneRecord> records_;
};

/// Times one forward + backward pass of `strategy` on random data shaped
/// like `sig`, in scalar type T.
template <typename T>
double measure_strategy(const LayerSignature& sig, ConvStrategy strategy, std::size_t warmup, std::size_t reps,
                        double give_up_after = std::numeric_limits<double>::infinity(), bool* gave_up = nullptr) {
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  auto fill = [&](Tensor<T>& t) {
    for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  };
  auto params = ConvParams<T>::make(sig.c_in, sig.c_out, sig.k, sig.s, sig.p, false);
  fill(params.weight);
  Tensor<T> x(Shape{sig.n, sig.c_in, sig.h, sig.w});
  fill(x);
  const auto out = params.output_shape(Shape4::of(x.shape()));
  Tensor<T> g(out.shape());
  fill(g);
  return benchmark_op(
      [&] {
        auto y = conv2d_forward(x, params, strategy);
        auto grads = conv2d_backward(x, params, strategy, g);
        (void)y;
        (void)grads;
      },
      warmup, reps, nullptr, give_up_after, gave_up);
}

/// Per-signature kernel selection backed by a TuneCache.
///
/// With autotuning off every query answers UNROLL without touching the
/// cache. Otherwise a miss benchmarks both strategies (`measurements()`
/// counts these runs) and stores the faster one; a hit returns the stored
/// choice. A failed measurement records DIRECT with a note.
///
/// UNROLL is timed first. DIRECT is abandoned as soon as one of its runs
/// exceeds tune_prune_factor times the UNROLL median: a gap that wide cannot
/// be timing noise, and full reps of a kernel that loses by 10-50x would
/// dominate the cost of tuning.
class Autotuner {
 public:
  TuneCache& cache() { return cache_; }
  const TuneCache& cache() const { return cache_; }

  std::size_t measurements() const { return measurements_.load(); }
  double tuning_seconds() const {
    std::lock_guard lock(mutex_);
    return tuning_seconds_;
  }

  template <typename T>
  ConvStrategy select(const LayerSignature& sig, const PerfConfig& cfg) {
    if (!cfg.autotune) return ConvStrategy::Unroll;
    if (auto hit = cache_.find(sig)) return hit->choice;
    std::lock_guard lock(mutex_);
    if (auto hit = cache_.find(sig)) return hit->choice;
    const auto t0 = std::chrono::steady_clock::now();
    TuneRecord rec;
    try {
      rec.unroll_seconds = measure_strategy<T>(sig, ConvStrategy::Unroll, cfg.tune_warmup, cfg.tune_reps);
      measurements_.fetch_add(1);
      const double bound = cfg.tune_prune_factor > 0 ? cfg.tune_prune_factor * rec.unroll_seconds
                                                     : std::numeric_limits<double>::infinity();
      bool abandoned = false;
      rec.direct_seconds =
          measure_strategy<T>(sig, ConvStrategy::Direct, cfg.tune_warmup, cfg.tune_reps, bound, &abandoned);
      measurements_.fetch_add(1);
      rec.choice = fastest(rec.direct_seconds, rec.unroll_seconds);
      rec.pruned = abandoned;
    } catch (const std::exception& e) {
      rec = TuneRecord{ConvStrategy::Direct, 0.0, 0.0, true, e.what()};
    }
    tuning_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    cache_.store(sig, rec);
    return rec.choice;
  }

 private:
  TuneCache cache_;
  std::atomic<std::size_t> measurements_{0};
  mutable std::mutex mutex_;
  double tuning_seconds_ = 0.0;
};

/// Process-wide tuner used by convolution layers.
inline Autotuner& tuner() {
  static Autotuner instance;
  return instance;
}

/// Strategy for `sig` under the current process configuration.
template <typename T>
ConvStrategy autotune_select(const LayerSignature& sig, Autotuner& t = tuner()) {
  return t.select<T>(sig, config());
}

}  // namespace hpcnn::perf

#endif  // HPCNN_PERF_AUTOTUNE_HPP
