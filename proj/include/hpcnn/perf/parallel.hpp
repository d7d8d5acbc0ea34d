#ifndef HPCNN_PERF_PARALLEL_HPP
#define HPCNN_PERF_PARALLEL_HPP

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "hpcnn/core/error.hpp"

namespace hpcnn::perf {

/// Runtime knobs for the worker pool and the convolution autotuner.
struct PerfConfig {
  std::size_t num_threads = 4;
  bool autotune = false;
  bool deterministic = true;
  std::size_t tune_warmup = 2;
  std::size_t tune_reps = 5;
  // A candidate run slower than this multiple of the incumbent's median ends
  // its measurement early; 0 always measures in full.
  double tune_prune_factor = 4.0;

  void validate() const {
    if (num_threads < 1) throw ArgumentError("num_threads must be >= 1");
    if (tune_warmup < 1 || tune_reps < 1) throw ArgumentError("autotune repetition counts must be >= 1");
    if (!(tune_prune_factor == 0.0 || tune_prune_factor > 1.0))
      throw ArgumentError("tune_prune_factor must be 0 (off) or greater than 1");
  }
};

/// Half-open index range handed to one worker.
struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Even static split of [0, n) into `parts` contiguous ranges; the first
/// n % parts ranges take one extra element. Empty ranges are kept so the
/// result always has exactly `parts` entries.
inline std::vector<Range> partition(std::size_t n, std::size_t parts) {
  if (parts == 0) throw ArgumentError("partition into zero parts");
  std::vector<Range> out(parts);
  const std::size_t base = n / parts, extra = n % parts;
  std::size_t at = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    out[p] = {at, at + len};
    at += len;
  }
  return out;
}

namespace detail {
inline thread_local bool inside_worker = false;
}

/// Fixed-size pool of `num_threads` workers: the calling thread plus
/// num_threads - 1 background threads. Jobs are synchronous: `run` returns
/// after every chunk finished, rethrowing the error of the lowest failing
/// chunk. Calls issued from inside a running job execute inline.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t num_threads) : size_(num_threads) {
    if (num_threads < 1) throw ArgumentError("thread pool needs at least one thread");
    for (std::size_t w = 1; w < num_threads; ++w) threads_.emplace_back([this, w] { worker_loop(w); });
  }

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  std::size_t size() const noexcept { return size_; }

  /// Calls chunk(w) once for every w in [0, size()).
  void run(const std::function<void(std::size_t)>& chunk) {
    if (size_ == 1 || detail::inside_worker) {
      for (std::size_t w = 0; w < size_; ++w) chunk(w);
      return;
    }
    std::lock_guard job_lock(job_mutex_);
    errors_.assign(size_, nullptr);
    {
      std::lock_guard lock(mutex_);
      job_ = &chunk;
      pending_ = size_ - 1;
      ++generation_;
    }
    wake_.notify_all();
    execute(0);
    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
    lock.unlock();
    for (auto& e : errors_)
      if (e) std::rethrow_exception(e);
  }

 private:
  void execute(std::size_t w) {
    detail::inside_worker = true;
    try {
      (*job_)(w);
    } catch (...) {
      errors_[w] = std::current_exception();
    }
    detail::inside_worker = false;
  }

  void worker_loop(std::size_t w) {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
        if (stopping_) return;
        seen = generation_;
      }
      execute(w);
      {
        std::lock_guard lock(mutex_);
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  std::size_t size_;
  std::vector<std::thread> threads_;
  std::mutex job_mutex_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::vector<std::exception_ptr> errors_;
  std::size_t pending_ = 0;
  std::size_t generation_ = 0;
  bool stopping_ = false;
};

namespace detail {
struct Runtime {
  PerfConfig config{1, false, true, 2, 5};
  std::unique_ptr<ThreadPool> pool = std::make_unique<ThreadPool>(1);
};
inline Runtime& runtime() {
  static Runtime rt;
  return rt;
}
}  // namespace detail

/// Replaces the process-wide pool with one of exactly cfg.num_threads workers.
inline ThreadPool& configure_pool(const PerfConfig& cfg) {
  cfg.validate();
  auto& rt = detail::runtime();
  if (!rt.pool || rt.pool->size() != cfg.num_threads) {
    rt.pool.reset();
    rt.pool = std::make_unique<ThreadPool>(cfg.num_threads);
  }
  rt.config = cfg;
  return *rt.pool;
}

inline ThreadPool& pool() { return *detail::runtime().pool; }
inline const PerfConfig& config() { return detail::runtime().config; }

/// Runs body(range) over an even split of [0, n) across the pool. Bodies
/// must write disjoint outputs. Empty n is a no-op.
template <typename Body>
void parallel_for_ranges(std::size_t n, Body&& body) {
  if (n == 0) return;
  auto& p = pool();
  const std::size_t parts = std::min(p.size(), n);
  if (parts == 1 || detail::inside_worker) {
    body(Range{0, n});
    return;
  }
  const auto ranges = partition(n, parts);
  p.run([&](std::size_t w) {
    if (w < ranges.size() && ranges[w].size() > 0) body(ranges[w]);
  });
}

/// Element-wise variant: body(i) for every i in [0, n).
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  parallel_for_ranges(n, [&](Range r) {
    for (std::size_t i = r.begin; i < r.end; ++i) body(i);
  });
}

/// Number of hardware threads the OS reports (0 when unknown).
inline unsigned hardware_threads() { return std::thread::hardware_concurrency(); }

}  // namespace hpcnn::perf

#endif  // HPCNN_PERF_PARALLEL_HPP
