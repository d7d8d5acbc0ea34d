#ifndef HPCNN_METRICS_TIMER_HPP
#define HPCNN_METRICS_TIMER_HPP

#include <chrono>
#include <optional>
#include <string>
#include <vector>


namespace hpcnn::metrics {

/// Monotonic wall clock.
class Stopwatch {
 public:
  using clock = std::chrono::steady_clock;
  Stopwatch() : start_(clock::now()) {}
  void restart() { start_ = clock::now(); }
  double seconds() const { return std::chrono::duration<double>(clock::now() - start_).count(); }

 private:
  clock::time_point start_;
};

struct TimedSection {
  std::string name;
  std::size_t depth = 0;
  std::optional<std::size_t> parent;
  double seconds = 0.0;
  bool open = true;
};

/// Records named, possibly nested sections in the order they start.
///
///   SectionTimer t;
///   { auto epoch = t.section("epoch"); { auto s = t.section("train"); ... } }
class SectionTimer {
 public:
  class Scope {
   public:
    Scope(SectionTimer& t, std::size_t id) : timer_(&t), id_(id) {}
    Scope(Scope&& o) noexcept : timer_(o.timer_), id_(o.id_), watch_(o.watch_) { o.timer_ = nullptr; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
    Scope& operator=(Scope&&) = delete;
    ~Scope() { stop(); }

    /// Closes the section early; returns its duration.
    double stop() {
      if (!timer_) return last_;
      last_ = watch_.seconds();
      timer_->close(id_, last_);
      timer_ = nullptr;
      return last_;
    }

   private:
    SectionTimer* timer_;
    std::size_t id_;
    Stopwatch watch_;
    double last_ = 0.0;
  };

  Scope section(std::string name) {
    TimedSection s;
    s.name = std::move(name);
    s.depth = stack_.size();
    if (!stack_.empty()) s.parent = stack_.back();
    sections_.push_back(std::move(s));
    stack_.push_back(sections_.size() - 1);
    return Scope(*this, sections_.size() - 1);
  }

  const std::vector<TimedSection>& sections() const { return sections_; }

  /// Sum over every closed section called `name`.
  double seconds(const std::string& name) const {
    double t = 0.0;
    for (const auto& s : sections_)
      if (s.name == name && !s.open) t += s.seconds;
    return t;
  }

  /// Sum over the closed direct children of section `id`.
  double children_seconds(std::size_t id) const {
    double t = 0.0;
    for (const auto& s : sections_)
      if (s.parent == id && !s.open) t += s.seconds;
    return t;
  }

 private:
  void close(std::size_t id, double seconds) {
    // Normally the innermost open section; an early stop() may close an outer one.
    std::erase(stack_, id);
    sections_[id].seconds = seconds;
    sections_[id].open = false;
  }

  std::vector<TimedSection> sections_;
  std::vector<std::size_t> stack_;
};

}  // namespace hpcnn::metrics

#endif  // HPCNN_METRICS_TIMER_HPP
