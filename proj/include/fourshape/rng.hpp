#pragma once

#include <cstdint>
#include <random>

namespace fourshape {

// mt19937_64 behind a portable uniform mapping. std::uniform_real_distribution
// is implementation-defined, and seeded runs must replay bit-identically.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
  std::mt19937_64 engine_;
};

}  // namespace fourshape
