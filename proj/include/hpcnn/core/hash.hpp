#ifndef HPCNN_CORE_HASH_HPP
#define HPCNN_CORE_HASH_HPP

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

namespace hpcnn {

/// 64-bit FNV-1a, incremental.
class Fnv1a {
 public:
  Fnv1a& update(std::span<const std::uint8_t> bytes) {
    for (auto b : bytes) h_ = (h_ ^ b) * 1099511628211ull;
    return *this;
  }
  Fnv1a& update(std::string_view s) {
    return update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 14695981039346656037ull;
};

inline std::uint64_t fnv1a64(std::string_view s) { return Fnv1a().update(s).value(); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace hpcnn

#endif  // HPCNN_CORE_HASH_HPP
