#pragma once

// Deterministic random streams.  Distributions are implemented directly on
// top of the engine output so a given seed produces the same draws on every
// platform and standard library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace saev {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : eng_(detail::splitmix64(seed)),
        fork_base_(detail::splitmix64(seed ^ 0xa5a5a5a5a5a5a5a5ull)) {}

  std::uint64_t raw() { return eng_(); }

  // independent substream, stable in (seed, id) and unaffected by how many
  // draws the parent has made
  Rng fork(std::uint64_t id) const {
    return Rng(fork_base_ ^ detail::splitmix64(id));
  }

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // polar method, second deviate cached
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  double truncated_normal(double mean, double sigma, double lo, double hi) {
    if (sigma <= 0.0) return std::clamp(mean, lo, hi);
    for (int i = 0; i < 256; ++i) {
      const double d = mean + sigma * normal();
      if (d >= lo && d <= hi) return d;
    }
    return std::clamp(mean, lo, hi);
  }

  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 30.0) {
      const double limit = std::exp(-lambda);
      int k = 0;
      double p = 1.0;
      do {
        ++k;
        p *= uniform();
      } while (p > limit);
      return k - 1;
    }
    // split large rates; recursion depth is log2(lambda/30)
    const double half = lambda / 2.0;
    return poisson(half) + poisson(lambda - half);
  }

 private:
  std::mt19937_64 eng_;
  std::uint64_t fork_base_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace saev
