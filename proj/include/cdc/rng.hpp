#pragma once

#include <cstdint>
#include <random>

namespace cdc {

// Deterministic RNG wrapper. All uniform mappings are written out explicitly
// so streams are reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

  std::uint32_t next_u32() { return gen_(); }

  // Strictly inside (0, 1).
  double unit() { return (static_cast<double>(gen_()) + 0.5) * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Index in [0, n), n >= 1.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

 private:
  std::mt19937 gen_;
};

// Emits quantization noise eps, uniform and strictly inside (-0.5, 0.5).
// Not shareable across threads; copy to fork a replayable stream.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : rng_(seed) {}

  double next() { return rng_.unit() - 0.5; }

 private:
  Rng rng_;
};

// In-place Fisher-Yates shuffle driven by an explicit Rng.
template <class Vec>
void shuffle_indices(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.index(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace cdc
