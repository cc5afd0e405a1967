#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace concord {

// 64-bit FNV-1a; used to turn derivation labels into seed material.
constexpr uint64_t fnv1a(std::string_view text) noexcept {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

constexpr uint64_t splitmix64(uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for a labeled sub-stream. All randomness in an invocation is
// fanned out from one root seed through this function, so results do not
// depend on the order in which parallel work is scheduled.
constexpr uint64_t derive_seed(uint64_t parent, std::string_view label) noexcept {
  return splitmix64(parent ^ splitmix64(fnv1a(label)));
}

constexpr uint64_t derive_seed(uint64_t parent, std::string_view label,
                               uint64_t index) noexcept {
  return splitmix64(derive_seed(parent, label) + splitmix64(index + 1));
}

// Seeded generator with a fully specified sampling algorithm:
//   uniform(): top 53 bits of one mt19937_64 draw, scaled to [0, 1)
//   normal():  Box-Muller on two uniforms, u1 mapped to (0, 1], cosine branch
//              only (no cached second value)
// The library's distributions are implementation-defined, so they are not used.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal();

  // Exponential(1) draw, used for Dirichlet(1) weights.
  double exponential();

  // Uniform integer in [0, bound).
  uint64_t below(uint64_t bound);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace concord

namespace concord {

// Fisher-Yates with Rng::below, portable across standard libraries.
template <class RandomIt>
void shuffle(RandomIt first, RandomIt last, Rng& rng) {
  auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    auto j = static_cast<decltype(i)>(rng.below(static_cast<uint64_t>(i) + 1));
    using std::swap;
    swap(first[i], first[j]);
  }
}

}  // namespace concord
