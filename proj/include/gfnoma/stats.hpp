#ifndef GFNOMA_STATS_HPP
#define GFNOMA_STATS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace gfnoma {

// Wilson score interval for a binomial proportion. z is the two-sided
// normal quantile (1.6449 for 90%, 1.96 for 95%).
inline std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t total,
                                                 double z) {
  if (total == 0) return {0.0, 1.0};
  const double n = static_cast<double>(total);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = p + z2 / (2.0 * n);
  const double margin = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, (centre - margin) / denom), std::min(1.0, (centre + margin) / denom)};
}

// One-sided paired comparison on per-trial counts: returns the t statistic
// for mean(a - b) > 0. Trials are the independent unit, which absorbs the
// within-trial correlation of bit errors.
inline double paired_t_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  if (n < 2 || b.size() != n) return 0.0;
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);
  if (var <= 0.0) return mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return mean / std::sqrt(var / static_cast<double>(n));
}

// One-sided two-sample (Welch) t statistic for mean(a) > mean(b).
inline double welch_t_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  auto moments = [](const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair<double, double>{mean, ss / static_cast<double>(x.size() - 1)};
  };
  if (a.size() < 2 || b.size() < 2) return 0.0;
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double se2 = va / static_cast<double>(a.size()) + vb / static_cast<double>(b.size());
  if (se2 <= 0.0) return ma > mb ? std::numeric_limits<double>::infinity() : 0.0;
  return (ma - mb) / std::sqrt(se2);
}

inline constexpr double kNormal90TwoSided = 1.6448536269514722;
inline constexpr double kNormal95TwoSided = 1.959963984540054;
inline constexpr double kNormal95OneSided = 1.6448536269514722;

}  // namespace gfnoma

#endif  // GFNOMA_STATS_HPP
