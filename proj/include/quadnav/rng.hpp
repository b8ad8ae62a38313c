#pragma once

#include <cstdint>
#include <cmath>

namespace quadnav {

// Deterministic RNG used everywhere instead of <random> distributions:
// std::normal_distribution and friends are implementation-defined, which
// would break the bit-exact reproducibility contract (checkpoints, resume,
// worker-side perturbation regeneration).

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Order-sensitive: v is mixed before folding so that small-integer inputs
// (seeds, iteration counters, direction ids) cannot collide by summation.
inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  h ^= mix64(v + 0x9e3779b97f4a7c15ULL) + (h << 12) + (h >> 4);
  return mix64(h + 0x9e3779b97f4a7c15ULL);
}

// splitmix64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  // Standard normal via Box-Muller; caches the second sample.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace quadnav
