#ifndef GFNOMA_SBL_DETECTOR_HPP
#define GFNOMA_SBL_DETECTOR_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gfnoma/numerics.hpp"
#include "gfnoma/spreading.hpp"

namespace gfnoma {

using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

enum class ThresholdRule { kLargestGap, kFixedValue, kTwoClusterMeans };

struct ThresholdPolicy {
  ThresholdRule rule = ThresholdRule::kLargestGap;
  double fixed_value = 0.0;  // used by kFixedValue
};

// Estimated active index set together with the precision scores it was cut
// from. indices == {u : gamma_scores[u] < threshold} always holds.
struct SupportEstimate {
  std::vector<int> indices;  // sorted ascending
  RVector gamma_scores;      // size U; empty when support is given externally
  double threshold = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;
};

struct SblConfig {
  int max_iterations = 50;
  double gamma_tolerance = 1e-4;  // on max_u relative gamma change
  double gamma_max = 1e11;
  double lambda_max = 1e12;
  double variance_floor = 1e-12;
  double gamma_equal_tolerance = 1e-6;  // degenerate-split detection
  bool use_both_slots = true;  // estimate jointly over (t-1, t); false: slot t only
  double damping = 0.0;        // on backward z messages, 0 disables
  double lambda_init = 10.0;
  bool estimate_lambda = true;  // false: keep lambda_init (known noise precision)
  ThresholdPolicy policy{};
};

struct SblIterationRecord {
  int iteration = 0;
  double max_rel_gamma_change = 0.0;
  double lambda_mean = 0.0;
};

struct SblDiagnostics {
  std::vector<SblIterationRecord> trace;
  int iterations_used = 0;
  NumericsCounters numerics;
};

namespace detail {
inline CMatrix to_complex(const RMatrix& m) { return m.cast<std::complex<double>>(); }
}  // namespace detail

// Message-passing state for active-device detection. Slot 0 holds the t-1
// interval and slot 1 the t interval; in single-slot mode only slot 0 exists
// and carries the t interval. All stored variances stay at or above the floor.
struct SblState {
  std::vector<CMatrix> y;            // per slot, L x N observations
  std::vector<CMatrix> fwd_mean_x;   // U x N
  std::vector<RMatrix> fwd_var_x;    // U x N
  std::vector<CMatrix> mean_x;       // U x N beliefs
  std::vector<RMatrix> var_x;        // U x N
  std::vector<CMatrix> back_mean_z;  // L x N aggregates
  std::vector<RMatrix> back_var_z;   // L x N
  std::vector<CMatrix> mean_z;       // L x N beliefs
  std::vector<RMatrix> var_z;        // L x N
  RVector gamma;                     // U
  RVector lambda;                    // N
  double epsilon = 0.0;
  int iteration = 0;
  NumericsCounters numerics;

  int slots() const { return static_cast<int>(y.size()); }
  int chips() const { return static_cast<int>(y[0].rows()); }
  int antennas() const { return static_cast<int>(y[0].cols()); }
  int devices() const { return static_cast<int>(fwd_mean_x[0].rows()); }
};

inline SblState make_sbl_state(const CMatrix& y_prev, const CMatrix& y_curr,
                               const SpreadingMatrix& spreading, const SblConfig& config) {
  if (y_prev.rows() != spreading.chips() || y_curr.rows() != spreading.chips() ||
      y_prev.cols() != y_curr.cols())
    throw std::invalid_argument("make_sbl_state: observation dimensions inconsistent");
  SblState st;
  if (config.use_both_slots) {
    st.y = {y_prev, y_curr};
  } else {
    st.y = {y_curr};
  }
  const int slots = st.slots();
  const int chips = spreading.chips();
  const int devices = spreading.devices();
  const int antennas = static_cast<int>(y_curr.cols());
  st.fwd_mean_x.assign(slots, CMatrix::Zero(devices, antennas));
  st.fwd_var_x.assign(slots, RMatrix::Ones(devices, antennas));
  st.mean_x.assign(slots, CMatrix::Zero(devices, antennas));
  st.var_x.assign(slots, RMatrix::Ones(devices, antennas));
  st.back_mean_z.assign(slots, CMatrix::Zero(chips, antennas));
  st.back_var_z.assign(slots, RMatrix::Ones(chips, antennas));
  st.mean_z.assign(slots, CMatrix::Zero(chips, antennas));
  st.var_z.assign(slots, RMatrix::Ones(chips, antennas));
  st.gamma = RVector::Ones(devices);
  st.lambda = RVector::Constant(antennas, config.lambda_init);
  st.epsilon = 0.0;
  return st;
}

// Forward messages into the x variables: data-side Gaussian combined across
// chips, re-centred on the previous belief mean.
inline void sbl_forward_x(SblState& st, const CMatrix& p, const RMatrix& p_abs2,
                          const SblConfig& config) {
  const RVector inv_lambda = st.lambda.cwiseInverse();
  for (int s = 0; s < st.slots(); ++s) {
    RMatrix denom = st.back_var_z[s];
    denom.rowwise() += inv_lambda.transpose();
    const RMatrix denom_inv = denom.cwiseInverse();
    RMatrix fwd_var = (p_abs2.transpose() * denom_inv).cwiseInverse();
    for (int n = 0; n < fwd_var.cols(); ++n)
      for (int u = 0; u < fwd_var.rows(); ++u)
        fwd_var(u, n) = clamp_variance(fwd_var(u, n), config.variance_floor, st.numerics);
    const CMatrix residual =
        (st.y[s] - st.back_mean_z[s]).cwiseProduct(detail::to_complex(denom_inv));
    st.fwd_mean_x[s] =
        (p.adjoint() * residual).cwiseProduct(detail::to_complex(fwd_var)) + st.mean_x[s];
    st.fwd_var_x[s] = std::move(fwd_var);
  }
}

// Belief of x under the Gaussian prior with per-device precision gamma.
inline void sbl_belief_x(SblState& st, const SblConfig& config) {
  for (int s = 0; s < st.slots(); ++s) {
    RMatrix shrink = st.fwd_var_x[s];
    shrink.array().colwise() *= st.gamma.array();
    shrink.array() += 1.0;  // 1 + gamma_u * fwd_var
    st.mean_x[s] = st.fwd_mean_x[s].cwiseQuotient(detail::to_complex(shrink));
    RMatrix var = st.fwd_var_x[s].cwiseQuotient(shrink);
    for (int n = 0; n < var.cols(); ++n)
      for (int u = 0; u < var.rows(); ++u)
        var(u, n) = clamp_variance(var(u, n), config.variance_floor, st.numerics);
    st.var_x[s] = std::move(var);
  }
}

// Backward messages into the z variables, with the correction term that uses
// the previous-iteration aggregates.
inline void sbl_backward_z(SblState& st, const CMatrix& p, const RMatrix& p_abs2,
                           const SblConfig& config) {
  const RVector inv_lambda = st.lambda.cwiseInverse();
  for (int s = 0; s < st.slots(); ++s) {
    const CMatrix mz_prev = st.back_mean_z[s];
    const RMatrix vz_prev = st.back_var_z[s];
    RMatrix vz = p_abs2 * st.var_x[s];
    RMatrix denom_prev = vz_prev;
    denom_prev.rowwise() += inv_lambda.transpose();
    CMatrix correction = (st.y[s] - mz_prev)
                             .cwiseQuotient(detail::to_complex(denom_prev))
                             .cwiseProduct(detail::to_complex(vz));
    CMatrix mz = p * st.mean_x[s] - correction;
    if (config.damping > 0.0) {
      mz = (1.0 - config.damping) * mz + config.damping * mz_prev;
      vz = (1.0 - config.damping) * vz + config.damping * vz_prev;
    }
    for (int n = 0; n < vz.cols(); ++n)
      for (int l = 0; l < vz.rows(); ++l)
        vz(l, n) = clamp_variance(vz(l, n), config.variance_floor, st.numerics);
    st.back_mean_z[s] = std::move(mz);
    st.back_var_z[s] = std::move(vz);
  }
}

// z beliefs followed by the noise-precision estimate. The denominator sums
// the residual power over every slot held by the state.
inline void sbl_belief_z_and_lambda(SblState& st, const SblConfig& config) {
  const int antennas = st.antennas();
  RVector residual_sum = RVector::Zero(antennas);
  for (int s = 0; s < st.slots(); ++s) {
    RMatrix vz_bel = st.back_var_z[s].cwiseInverse();
    vz_bel.rowwise() += st.lambda.transpose();
    vz_bel = vz_bel.cwiseInverse();
    CMatrix scaled_y = st.y[s];
    for (int n = 0; n < antennas; ++n) scaled_y.col(n) *= st.lambda[n];
    st.mean_z[s] = (scaled_y + st.back_mean_z[s].cwiseQuotient(
                                   detail::to_complex(st.back_var_z[s])))
                       .cwiseProduct(detail::to_complex(vz_bel));
    st.var_z[s] = std::move(vz_bel);
    residual_sum +=
        ((st.mean_z[s] - st.y[s]).cwiseAbs2() + st.var_z[s]).colwise().sum().transpose();
  }
  if (!config.estimate_lambda) return;
  const double chips_eff = static_cast<double>(st.chips() * st.slots());
  for (int n = 0; n < antennas; ++n) {
    if (residual_sum[n] <= chips_eff / config.lambda_max) {
      st.lambda[n] = config.lambda_max;
      ++st.numerics.lambda_clamps;
    } else {
      st.lambda[n] = chips_eff / residual_sum[n];
    }
  }
}

// Precision update for the hierarchical prior, eta fixed at zero.
inline void sbl_update_gamma(SblState& st, const SblConfig& config) {
  const double n_eff = static_cast<double>(st.antennas() * st.slots());
  RVector power = RVector::Zero(st.devices());
  for (int s = 0; s < st.slots(); ++s)
    power += (st.mean_x[s].cwiseAbs2() + st.var_x[s]).rowwise().sum();
  for (int u = 0; u < st.devices(); ++u) {
    double g = (st.epsilon + n_eff) / power[u];  // eta = 0
    if (!(g > 0.0) || g > config.gamma_max) {
      g = config.gamma_max;
      ++st.numerics.gamma_clamps;
    }
    st.gamma[u] = g;
  }
}

// Automatic shape update; zero when all precisions coincide.
inline void sbl_update_epsilon(SblState& st) {
  const double mean_gamma = st.gamma.mean();
  const double mean_log = st.gamma.array().log().mean();
  const double radicand = std::log(mean_gamma) - mean_log;
  st.epsilon = 0.5 * std::sqrt(std::max(0.0, radicand));
}

inline SupportEstimate threshold_support(const RVector& gamma, const ThresholdPolicy& policy,
                                         double equal_tolerance, NumericsCounters& counters,
                                         double gamma_ceiling = 1e11) {
  const int devices = static_cast<int>(gamma.size());
  SupportEstimate est;
  est.gamma_scores = gamma;

  if (policy.rule == ThresholdRule::kFixedValue) {
    est.threshold = policy.fixed_value;
  } else if (devices == 1) {
    // no gap to split; active unless the precision sits at the ceiling
    est.threshold = gamma_ceiling;
  } else {
    std::vector<double> sorted(devices);
    for (int u = 0; u < devices; ++u) sorted[u] = std::log(gamma[u]);
    std::sort(sorted.begin(), sorted.end());
    if (sorted.back() - sorted.front() < equal_tolerance) {
      est.degenerate = true;
      ++counters.degenerate_splits;
      est.threshold = gamma.minCoeff();  // strict comparison yields an empty set
      return est;
    }
    if (policy.rule == ThresholdRule::kLargestGap) {
      int cut = 0;
      double best_gap = -1.0;
      for (int i = 0; i + 1 < devices; ++i) {
        const double gap = sorted[i + 1] - sorted[i];
        if (gap > best_gap) {
          best_gap = gap;
          cut = i;
        }
      }
      est.threshold = std::exp(0.5 * (sorted[cut] + sorted[cut + 1]));
    } else {  // kTwoClusterMeans
      double th = 0.0;
      for (double v : sorted) th += v;
      th /= devices;
      for (int pass = 0; pass < 100; ++pass) {
        double lo = 0.0, hi = 0.0;
        int nlo = 0, nhi = 0;
        for (double v : sorted) {
          if (v < th) {
            lo += v;
            ++nlo;
          } else {
            hi += v;
            ++nhi;
          }
        }
        if (nlo == 0 || nhi == 0) break;
        const double next = 0.5 * (lo / nlo + hi / nhi);
        if (std::abs(next - th) < 1e-12) break;
        th = next;
      }
      est.threshold = std::exp(th);
    }
  }

  for (int u = 0; u < devices; ++u)
    if (gamma[u] < est.threshold) est.indices.push_back(u);
  return est;
}

struct ActiveDetectionResult {
  SupportEstimate support;
  SblDiagnostics diagnostics;
  RVector lambda;  // final noise-precision estimates, for warm starts
};

// Full active-device detection pass: the message schedule runs until the
// precision vector settles or the iteration cap is hit, then the support is
// cut from the learned precisions.
inline ActiveDetectionResult run_active_detection(const CMatrix& y_prev, const CMatrix& y_curr,
                                                  const SpreadingMatrix& spreading,
                                                  const SblConfig& config = {}) {
  SblState st = make_sbl_state(y_prev, y_curr, spreading, config);
  const CMatrix& p = spreading.entries;
  const RMatrix p_abs2 = p.cwiseAbs2();

  ActiveDetectionResult result;
  RVector gamma_prev = st.gamma;
  for (int it = 1; it <= config.max_iterations; ++it) {
    st.iteration = it;
    sbl_forward_x(st, p, p_abs2, config);
    sbl_belief_x(st, config);
    sbl_backward_z(st, p, p_abs2, config);
    sbl_update_gamma(st, config);
    sbl_update_epsilon(st);
    sbl_belief_z_and_lambda(st, config);

    const double change =
        ((st.gamma - gamma_prev).cwiseAbs().cwiseQuotient(gamma_prev)).maxCoeff();
    result.diagnostics.trace.push_back({it, change, st.lambda.mean()});
    result.diagnostics.iterations_used = it;
    gamma_prev = st.gamma;
    if (change < config.gamma_tolerance) break;
  }

  result.support = threshold_support(st.gamma, config.policy, config.gamma_equal_tolerance,
                                     st.numerics, config.gamma_max);
  result.diagnostics.numerics = st.numerics;
  result.lambda = st.lambda;
  return result;
}

}  // namespace gfnoma

#endif  // GFNOMA_SBL_DETECTOR_HPP
