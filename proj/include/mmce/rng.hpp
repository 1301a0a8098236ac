#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>

namespace mmce {

// Deterministic random stream. Everything is built on splitmix64 so that a
// given seed produces the identical sequence on every platform and compiler;
// std::normal_distribution and friends do not give that guarantee.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; no spare caching so the draw count per
  // call is fixed and streams stay reproducible under refactoring.
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // CN(0, 1): E|z|^2 = 1.
  std::complex<double> cgaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Independent substream keyed by tags; used to give each Monte-Carlo trial
  // its own schedule-independent stream.
  Rng derive(std::initializer_list<uint64_t> tags) const {
    uint64_t s = state_ ^ 0xa0761d6478bd642fULL;
    for (uint64_t t : tags) {
      s ^= t + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
      Rng mix(s);
      s = mix.next_u64();
    }
    return Rng(s);
  }

 private:
  uint64_t state_;
};

}  // namespace mmce
