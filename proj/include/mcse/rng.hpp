#pragma once

#include <cmath>
#include <cstdint>

#include "mcse/common.hpp"

namespace mcse {

// splitmix64-seeded xoshiro256** generator. We roll our own instead of using
// <random> distributions because libstdc++'s normal/uniform outputs are
// implementation-defined and every artifact here must be reproducible from a
// seed alone.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      w = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_int(uint64_t n) {
    MCSE_CHECK(n > 0, ContractError, "uniform_int: n must be positive");
    return next_u64() % n;
  }

  // standard normal via Box-Muller (spare cached)
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  // derive an independent stream, e.g. per (epoch, item)
  Rng fork(uint64_t salt) const {
    return Rng(s_[0] ^ (salt * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

template <typename Container>
void shuffle(Container& c, Rng& rng) {
  for (size_t i = c.size(); i > 1; --i) {
    const size_t j = size_t(rng.uniform_int(i));
    std::swap(c[i - 1], c[j]);
  }
}

}  // namespace mcse
