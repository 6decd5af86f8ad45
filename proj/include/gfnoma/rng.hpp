#ifndef GFNOMA_RNG_HPP
#define GFNOMA_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace gfnoma {

namespace detail {

// SplitMix64 finalizer, used to derive well-separated engine seeds from
// (master seed, stream, index) tuples.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic per-trial random stream. Every (master seed, stream, index)
// tuple yields an independent substream, so trials can run on any number of
// workers and still reproduce bit-identically. Gaussian variates use
// Box-Muller on top of the engine's 64-bit output; nothing here depends on
// library-specific distribution internals.
class TrialRng {
 public:
  explicit TrialRng(std::uint64_t master_seed, std::uint64_t stream = 0,
                    std::uint64_t index = 0)
      : engine_(detail::splitmix64(
            detail::splitmix64(master_seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1))) ^
            (index + 0x6a09e667f3bcc909ULL))) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_int(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % bound;
  }

  // Standard real Gaussian, Box-Muller with pair caching.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  // Circularly-symmetric complex Gaussian with the given total variance.
  std::complex<double> cnormal(double variance) {
    const double scale = std::sqrt(variance * 0.5);
    const double re = normal();
    const double im = normal();
    return {scale * re, scale * im};
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace gfnoma

#endif  // GFNOMA_RNG_HPP
