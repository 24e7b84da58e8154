#ifndef PTL_RNG_HPP
#define PTL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

// Counter-style splitmix64 generator. All randomness in the toolkit flows
// through this so results are bit-reproducible across compilers and standard
// libraries (std:: distributions are implementation-defined).

namespace ptl {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a decorrelated child seed from (seed, a, b).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0) {
  std::uint64_t s = seed;
  splitmix64(s);
  s ^= 0xa0761d6478bd642fULL * (a + 1);
  splitmix64(s);
  s ^= 0xe7037ed1a0b428dbULL * (b + 1);
  return splitmix64(s);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0xdeadbeefcafef00dULL) {
    // burn-in decorrelates small adjacent seeds
    splitmix64(state_);
    splitmix64(state_);
  }

  // Independent stream keyed by (seed, tags...); selection order of the
  // consumers cannot perturb each other's draws.
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = seed;
    splitmix64(s);
    s ^= 0x632be59bd9b4e019ULL * (a + 1);
    splitmix64(s);
    s ^= 0x9e6c63d0876a9a47ULL * (b + 1);
    return Rng(s);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // modulo bias is negligible for desk-scale n, but reject anyway
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // standard normal via Box-Muller (deterministic, no cached spare)
  double gaussian() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

private:
  std::uint64_t state_;
};

} // namespace ptl

#endif
