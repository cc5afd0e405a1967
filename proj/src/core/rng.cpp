#include "concord/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace concord {

double Rng::normal() {
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::exponential() { return -std::log(1.0 - uniform()); }

uint64_t Rng::below(uint64_t bound) {
  // Lemire-style rejection keeps the draw unbiased.
  if (bound <= 1) return 0;
  uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace concord
