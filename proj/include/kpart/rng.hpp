#pragma once
// Deterministic PRNG with a declared seed-splitting rule. std::mt19937 plus
// the distribution classes are not bit-stable across standard libraries, so
// batch outputs that must be byte-identical use this instead.

#include <cstdint>

namespace kpart {

/// splitmix64; passes through the full 64-bit state space.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, n) via 128-bit multiply; n > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  bool coin() { return (next() & 1) != 0; }

 private:
  std::uint64_t state_;
};

/// Child seed for parallel run i of a batch rooted at `root`.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  Rng r(root ^ (0x5851f42d4c957f2dull * (index + 1)));
  return r.next();
}

}  // namespace kpart
