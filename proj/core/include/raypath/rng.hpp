#pragma once

#include <cstdint>
#include <random>

namespace raypath {

// splitmix64 mix step; used both as a stream-derivation hash and to expand
// seeds into engine state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s = h ^ (b + 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

// Deterministic RNG wrapper. All variate generation is hand-rolled from the
// raw 64-bit stream so results do not depend on standard-library
// distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n), n > 0
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Independent substream; derivation is order-free (pure hash of ids).
  Rng derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t h = hash_combine(hash_combine(hash_combine(seed_tag_, a), b), c);
    Rng r(h);
    r.seed_tag_ = h;
    return r;
  }

  static Rng seeded(std::uint64_t seed) {
    std::uint64_t s = seed;
    std::uint64_t h = splitmix64(s);
    Rng r(h);
    r.seed_tag_ = h;
    return r;
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_tag_ = 0;
};

}  // namespace raypath
