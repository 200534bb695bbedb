#pragma once

// Seeded randomness with a fully specified output sequence.
//
// std::mt19937_64 is pinned by the standard, but the distributions and
// std::shuffle are not, so every derived quantity here is computed by hand:
//
//   uniform_below(n): draw x from the engine, reject while x < (2^64 - n) % n,
//                     return x % n.
//   shuffle(v):       Fisher-Yates, i = size-1 down to 1, j = uniform_below(i+1),
//                     swap(v[i], v[j]).
//   normal():         Box-Muller on two uniform_unit() draws, cosine branch only.
//   uniform_unit():   (x >> 11) * 2^-53, in [0, 1).
//
// Anything seeded through this header is bit-reproducible across platforms.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace xnet {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    std::uint64_t x = engine_();
    while (x < threshold) x = engine_();
    return x % n;
  }

  double uniform_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    double u1 = uniform_unit();
    while (u1 <= 0.0) u1 = uniform_unit();
    const double u2 = uniform_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::span<T> values) {
    if (values.size() < 2) return;
    for (std::size_t i = values.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(uniform_below(i + 1));
      std::swap(values[i], values[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    shuffle(std::span<T>(values));
  }

  std::vector<std::uint32_t> permutation(std::uint32_t n) {
    std::vector<std::uint32_t> p(n);
    std::iota(p.begin(), p.end(), 0u);
    shuffle(p);
    return p;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace xnet
