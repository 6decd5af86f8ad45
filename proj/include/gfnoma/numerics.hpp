#ifndef GFNOMA_NUMERICS_HPP
#define GFNOMA_NUMERICS_HPP

#include <cmath>
#include <complex>
#include <cstdint>

namespace gfnoma {

// Counters for numerical guard events. Guards clamp and count; they never
// abort a run.
struct NumericsCounters {
  std::uint64_t variance_clamps = 0;
  std::uint64_t gamma_clamps = 0;
  std::uint64_t lambda_clamps = 0;
  std::uint64_t belief_underflows = 0;
  std::uint64_t degenerate_splits = 0;
  std::uint64_t ratio_fallbacks = 0;

  NumericsCounters& operator+=(const NumericsCounters& o) {
    variance_clamps += o.variance_clamps;
    gamma_clamps += o.gamma_clamps;
    lambda_clamps += o.lambda_clamps;
    belief_underflows += o.belief_underflows;
    degenerate_splits += o.degenerate_splits;
    ratio_fallbacks += o.ratio_fallbacks;
    return *this;
  }

  std::uint64_t total() const {
    return variance_clamps + gamma_clamps + lambda_clamps + belief_underflows +
           degenerate_splits + ratio_fallbacks;
  }
};

inline double clamp_variance(double v, double floor_value, NumericsCounters& counters) {
  if (!(v >= floor_value)) {  // catches NaN as well
    ++counters.variance_clamps;
    return floor_value;
  }
  return v;
}

// log of the complex Gaussian density CN(x; mean, variance).
inline double log_cnormal(std::complex<double> x, std::complex<double> mean,
                          double variance) {
  return -std::log(M_PI * variance) - std::norm(x - mean) / variance;
}

}  // namespace gfnoma

#endif  // GFNOMA_NUMERICS_HPP
