#ifndef HPCNN_CORE_RANDOM_HPP
#define HPCNN_CORE_RANDOM_HPP

#include <cstdint>
#include <initializer_list>

namespace hpcnn {

/// SplitMix64 finalizer; a good bijective scrambler for seed derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and any number of
/// coordinates (epoch, item index, purpose tag ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(seed);
  for (auto c : coords) h = splitmix64(h ^ splitmix64(c + 0x632BE59BD9B4E019ull));
  return h;
}

}  // namespace hpcnn

#endif  // HPCNN_CORE_RANDOM_HPP
