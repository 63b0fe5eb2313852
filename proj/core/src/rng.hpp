#pragma once

#include <cstdint>
#include <random>

namespace speccompact::detail {

// Uniform doubles from the top 53 bits of mt19937_64, so draws are identical
// across standard-library implementations.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  double symmetric(double half_width) { return uniform(-half_width, half_width); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace speccompact::detail
