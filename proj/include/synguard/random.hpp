#pragma once

#include <cstdint>
#include <random>

namespace synguard {

inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `stream` of work item `index` under a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream = 0) {
  return mix_seed(mix_seed(master ^ index) + stream);
}

/// mt19937_64 with distribution code pinned here, so streams are identical
/// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n); n > 0. Lemire's multiply with rejection.
  std::uint64_t below(std::uint64_t n) {
    for (;;) {
      const std::uint64_t x = engine_();
      const unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
      const auto low = static_cast<std::uint64_t>(m);
      if (low >= n || low >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
    }
  }
  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) std::iter_swap(first + (i - 1), first + below(i));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace synguard
