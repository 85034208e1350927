#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tem {

/// Seeded RNG with self-contained uniform mappings, so that a (seed, config)
/// pair reproduces bit-identical streams independent of the standard
/// library's distribution implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
  }

  /// k distinct indices from [0, n), by partial Fisher-Yates.
  std::vector<std::size_t> distinct_indices(std::size_t k, std::size_t n) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k && i < n; ++i) {
      std::size_t j = i + index(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace tem
