#ifndef GFNOMA_NONCOH_DETECTOR_HPP
#define GFNOMA_NONCOH_DETECTOR_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "gfnoma/dpsk.hpp"
#include "gfnoma/numerics.hpp"
#include "gfnoma/sbl_detector.hpp"
#include "gfnoma/spreading.hpp"

namespace gfnoma {

struct DataConfig {
  int max_iterations = 10;
  double beta_tolerance = 1e-9;  // on max absolute belief change
  double lambda_max = 1e12;
  double variance_floor = 1e-12;
  bool raw_moment_variance = false;  // keep the raw second moment as variance
  bool lambda_both_slots = true;        // false: slot-t residuals only
  double lambda_init = 10.0;
  RVector lambda_warm;  // per-antenna warm start; overrides lambda_init when sized
  bool estimate_lambda = true;  // false: keep the initial value (known noise precision)
};

// Posterior over the demodulation alphabet and the hard decision for one
// retained device. Ties in the argmax go to the lowest constellation index.
struct SymbolDecision {
  RVector beta;       // size Q
  int psi_index = 0;  // argmax of beta
  std::vector<int> bits;
};

struct DataIterationRecord {
  int iteration = 0;
  double max_beta_change = 0.0;
  double lambda_mean = 0.0;
};

struct DataDiagnostics {
  std::vector<DataIterationRecord> trace;
  int iterations_used = 0;
  NumericsCounters numerics;
};

// Message-passing state for data detection on the reduced model. Slot 0 is
// the t-1 interval, slot 1 the t interval. Categorical quantities live in
// the log domain until normalization.
struct DataState {
  std::vector<CMatrix> y;            // 2 slots, L x N
  std::vector<CMatrix> fwd_mean;     // K x N extrinsics toward the constraint
  std::vector<RMatrix> fwd_var;      // K x N
  std::vector<CMatrix> proj_mean;    // K x N projected beliefs
  std::vector<RMatrix> proj_var;     // K x N
  std::vector<CMatrix> back_mean_z;  // L x N
  std::vector<RMatrix> back_var_z;   // L x N
  std::vector<CMatrix> mean_z;       // L x N beliefs
  std::vector<RMatrix> var_z;        // L x N
  RVector lambda;                    // N

  std::vector<RMatrix> log_pdf;         // per q, K x N antenna factors
  RMatrix log_beta_unnorm;              // K x Q
  RMatrix beta;                         // K x Q, rows sum to 1
  RMatrix rho;                          // K x Q, rows sum to 1
  std::vector<CMatrix> comp_mean_curr;  // per q, K x N
  std::vector<RMatrix> comp_var_curr;
  std::vector<CMatrix> comp_mean_prev;  // per q, slot t-1 components
  std::vector<RMatrix> comp_var_prev;

  int iteration = 0;
  NumericsCounters numerics;

  int slots() const { return 2; }
  int chips() const { return static_cast<int>(y[0].rows()); }
  int antennas() const { return static_cast<int>(y[0].cols()); }
  int retained() const { return static_cast<int>(fwd_mean[0].rows()); }
};

inline DataState make_data_state(const CMatrix& y_prev, const CMatrix& y_curr,
                                 const CMatrix& p_bar, const DpskAlphabet& alphabet,
                                 const DataConfig& config) {
  if (y_prev.rows() != p_bar.rows() || y_curr.rows() != p_bar.rows() ||
      y_prev.cols() != y_curr.cols())
    throw std::invalid_argument("make_data_state: observation dimensions inconsistent");
  DataState st;
  st.y = {y_prev, y_curr};
  const int chips = static_cast<int>(p_bar.rows());
  const int retained = static_cast<int>(p_bar.cols());
  const int antennas = static_cast<int>(y_curr.cols());
  const int order = alphabet.order();
  st.fwd_mean.assign(2, CMatrix::Zero(retained, antennas));
  st.fwd_var.assign(2, RMatrix::Ones(retained, antennas));
  st.proj_mean.assign(2, CMatrix::Zero(retained, antennas));
  st.proj_var.assign(2, RMatrix::Ones(retained, antennas));
  st.back_mean_z.assign(2, CMatrix::Zero(chips, antennas));
  st.back_var_z.assign(2, RMatrix::Ones(chips, antennas));
  st.mean_z.assign(2, CMatrix::Zero(chips, antennas));
  st.var_z.assign(2, RMatrix::Ones(chips, antennas));
  if (config.lambda_warm.size() == antennas) {
    st.lambda = config.lambda_warm;
  } else {
    st.lambda = RVector::Constant(antennas, config.lambda_init);
  }
  st.log_pdf.assign(order, RMatrix::Zero(retained, antennas));
  st.log_beta_unnorm = RMatrix::Zero(retained, order);
  st.beta = RMatrix::Constant(retained, order, 1.0 / order);
  st.rho = st.beta;
  st.comp_mean_curr.assign(order, CMatrix::Zero(retained, antennas));
  st.comp_var_curr.assign(order, RMatrix::Ones(retained, antennas));
  st.comp_mean_prev.assign(order, CMatrix::Zero(retained, antennas));
  st.comp_var_prev.assign(order, RMatrix::Ones(retained, antennas));
  return st;
}

// Same functional form as the active-detection forward step, over the
// retained columns, re-centred on the projected belief means.
inline void forward_xbar(DataState& st, const CMatrix& p_bar, const RMatrix& p_bar_abs2,
                         const DataConfig& config) {
  const RVector inv_lambda = st.lambda.cwiseInverse();
  for (int s = 0; s < 2; ++s) {
    RMatrix denom = st.back_var_z[s];
    denom.rowwise() += inv_lambda.transpose();
    const RMatrix denom_inv = denom.cwiseInverse();
    RMatrix fwd_var = (p_bar_abs2.transpose() * denom_inv).cwiseInverse();
    for (int n = 0; n < fwd_var.cols(); ++n)
      for (int k = 0; k < fwd_var.rows(); ++k)
        fwd_var(k, n) = clamp_variance(fwd_var(k, n), config.variance_floor, st.numerics);
    const CMatrix residual =
        (st.y[s] - st.back_mean_z[s]).cwiseProduct(detail::to_complex(denom_inv));
    st.fwd_mean[s] =
        (p_bar.adjoint() * residual).cwiseProduct(detail::to_complex(fwd_var)) + st.proj_mean[s];
    st.fwd_var[s] = std::move(fwd_var);
  }
}

// Per-antenna log factors of the differential constraint: the density of the
// slot-t extrinsic mean given the candidate symbol applied to the slot-(t-1)
// extrinsic.
inline void compute_antenna_factors(DataState& st, const DpskAlphabet& alphabet) {
  const int retained = st.retained();
  const int antennas = st.antennas();
  for (int q = 0; q < alphabet.order(); ++q) {
    const std::complex<double> point = alphabet.point(q);
    const double mod2 = std::norm(point);
    RMatrix& lp = st.log_pdf[q];
    for (int n = 0; n < antennas; ++n)
      for (int k = 0; k < retained; ++k) {
        const double var = st.fwd_var[1](k, n) + mod2 * st.fwd_var[0](k, n);
        lp(k, n) = log_cnormal(st.fwd_mean[1](k, n), point * st.fwd_mean[0](k, n), var);
      }
  }
}

namespace detail {

// Max-subtracted normalization of log weights into probabilities.
// All-underflow rows fall back to uniform.
inline Eigen::RowVectorXd softmax_row(const RVector& log_w, NumericsCounters& counters) {
  const int n = static_cast<int>(log_w.size());
  Eigen::RowVectorXd out(n);
  const double top = log_w.maxCoeff();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = std::isfinite(top) ? std::exp(log_w[i] - top) : 0.0;
    out[i] = e;
    sum += e;
  }
  if (!(sum > 0.0)) {
    ++counters.belief_underflows;
    out.setConstant(1.0 / n);
    return out;
  }
  return out / sum;
}

}  // namespace detail

// Symbol beliefs: product of the antenna factors under the uniform prior.
inline void symbol_belief_beta(DataState& st, const DpskAlphabet& alphabet) {
  const int order = alphabet.order();
  for (int q = 0; q < order; ++q) st.log_beta_unnorm.col(q) = st.log_pdf[q].rowwise().sum();
  for (int k = 0; k < st.retained(); ++k)
    st.beta.row(k) = detail::softmax_row(st.log_beta_unnorm.row(k).transpose(), st.numerics);
}

// Extrinsic symbol weights for one antenna: the total log factor minus the
// antenna's own contribution. With a single antenna the empty product is
// uniform.
inline RMatrix extrinsic_alpha(const DataState& st, int antenna, const DpskAlphabet& alphabet,
                               NumericsCounters& counters) {
  const int order = alphabet.order();
  RMatrix alpha(st.retained(), order);
  RVector logs(order);
  for (int k = 0; k < st.retained(); ++k) {
    for (int q = 0; q < order; ++q)
      logs[q] = st.log_beta_unnorm(k, q) - st.log_pdf[q](k, antenna);
    alpha.row(k) = detail::softmax_row(logs, counters);
  }
  return alpha;
}

// Mixture weights of the constraint-side belief components. With the
// antenna-matched extrinsic weights, alpha times the antenna's own factor
// restores the full product, so the weights reduce to the beta logs plus the
// squared-modulus factor and are shared across antennas.
inline void mixture_rho(DataState& st, const DpskAlphabet& alphabet) {
  const int order = alphabet.order();
  RVector logs(order);
  for (int k = 0; k < st.retained(); ++k) {
    for (int q = 0; q < order; ++q)
      logs[q] = st.log_beta_unnorm(k, q) + std::log(std::norm(alphabet.point(q)));
    st.rho.row(k) = detail::softmax_row(logs, st.numerics);
  }
}

// Gaussian component moments of the beliefs on both slots, one component per
// candidate symbol.
inline void component_moments(DataState& st, const DpskAlphabet& alphabet,
                              const DataConfig& config) {
  const int retained = st.retained();
  const int antennas = st.antennas();
  for (int q = 0; q < alphabet.order(); ++q) {
    const std::complex<double> point = alphabet.point(q);
    const double mod2 = std::norm(point);
    for (int n = 0; n < antennas; ++n)
      for (int k = 0; k < retained; ++k) {
        const double fv_curr = st.fwd_var[1](k, n);
        const double fv_prev = st.fwd_var[0](k, n);
        const std::complex<double> fm_curr = st.fwd_mean[1](k, n);
        const std::complex<double> fm_prev = st.fwd_mean[0](k, n);

        const double v_curr = 1.0 / (1.0 / fv_curr + 1.0 / (mod2 * fv_prev));
        st.comp_var_curr[q](k, n) = std::max(v_curr, config.variance_floor);
        st.comp_mean_curr[q](k, n) =
            v_curr * (fm_curr / fv_curr + point * fm_prev / (mod2 * fv_prev));

        const double v_prev = 1.0 / (mod2 / fv_curr + 1.0 / fv_prev);
        st.comp_var_prev[q](k, n) = std::max(v_prev, config.variance_floor);
        st.comp_mean_prev[q](k, n) =
            v_prev * (std::conj(point) * fm_curr / fv_curr + fm_prev / fv_prev);
      }
  }
}

// Moment matching of the per-symbol mixture to a single Gaussian. The
// default stores the central variance; the literal variant keeps the raw
// second moment.
inline void gaussian_project(DataState& st, const DpskAlphabet& alphabet,
                             const DataConfig& config) {
  const int retained = st.retained();
  const int antennas = st.antennas();
  const int order = alphabet.order();
  for (int s = 0; s < 2; ++s) {
    const auto& comp_mean = (s == 1) ? st.comp_mean_curr : st.comp_mean_prev;
    const auto& comp_var = (s == 1) ? st.comp_var_curr : st.comp_var_prev;
    for (int n = 0; n < antennas; ++n)
      for (int k = 0; k < retained; ++k) {
        std::complex<double> mean = 0.0;
        double second = 0.0;
        for (int q = 0; q < order; ++q) {
          const double w = st.rho(k, q);
          const std::complex<double> mq = comp_mean[q](k, n);
          mean += w * mq;
          second += w * (std::norm(mq) + comp_var[q](k, n));
        }
        const double var = config.raw_moment_variance ? second : second - std::norm(mean);
        st.proj_mean[s](k, n) = mean;
        st.proj_var[s](k, n) = clamp_variance(var, config.variance_floor, st.numerics);
      }
  }
}

// Backward z messages from the projected beliefs, with the same
// previous-iteration correction as in active detection.
inline void backward_z_pair(DataState& st, const CMatrix& p_bar, const RMatrix& p_bar_abs2,
                            const DataConfig& config) {
  const RVector inv_lambda = st.lambda.cwiseInverse();
  for (int s = 0; s < 2; ++s) {
    const CMatrix mz_prev = st.back_mean_z[s];
    const RMatrix vz_prev = st.back_var_z[s];
    RMatrix vz = p_bar_abs2 * st.proj_var[s];
    RMatrix denom_prev = vz_prev;
    denom_prev.rowwise() += inv_lambda.transpose();
    const CMatrix correction = (st.y[s] - mz_prev)
                                   .cwiseQuotient(detail::to_complex(denom_prev))
                                   .cwiseProduct(detail::to_complex(vz));
    st.back_mean_z[s] = p_bar * st.proj_mean[s] - correction;
    for (int n = 0; n < vz.cols(); ++n)
      for (int l = 0; l < vz.rows(); ++l)
        vz(l, n) = clamp_variance(vz(l, n), config.variance_floor, st.numerics);
    st.back_var_z[s] = std::move(vz);
  }
}

inline void belief_z_pair(DataState& st) {
  for (int s = 0; s < 2; ++s) {
    RMatrix vz_bel = st.back_var_z[s].cwiseInverse();
    vz_bel.rowwise() += st.lambda.transpose();
    vz_bel = vz_bel.cwiseInverse();
    CMatrix scaled_y = st.y[s];
    for (int n = 0; n < st.antennas(); ++n) scaled_y.col(n) *= st.lambda[n];
    st.mean_z[s] =
        (scaled_y + st.back_mean_z[s].cwiseQuotient(detail::to_complex(st.back_var_z[s])))
            .cwiseProduct(detail::to_complex(vz_bel));
    st.var_z[s] = std::move(vz_bel);
  }
}

// Noise-precision estimate over both received matrices; the single-slot
// variant uses only the t interval.
inline void update_lambda_pair(DataState& st, const DataConfig& config) {
  if (!config.estimate_lambda) return;
  const int antennas = st.antennas();
  RVector residual_sum = RVector::Zero(antennas);
  int slots_used = 0;
  for (int s = 0; s < 2; ++s) {
    if (!config.lambda_both_slots && s == 0) continue;
    residual_sum +=
        ((st.mean_z[s] - st.y[s]).cwiseAbs2() + st.var_z[s]).colwise().sum().transpose();
    ++slots_used;
  }
  const double chips_eff = static_cast<double>(st.chips() * slots_used);
  for (int n = 0; n < antennas; ++n) {
    if (residual_sum[n] <= chips_eff / config.lambda_max) {
      st.lambda[n] = config.lambda_max;
      ++st.numerics.lambda_clamps;
    } else {
      st.lambda[n] = chips_eff / residual_sum[n];
    }
  }
}

inline SymbolDecision hard_decide(const Eigen::RowVectorXd& beta_row,
                                  const DpskAlphabet& alphabet) {
  SymbolDecision decision;
  decision.beta = beta_row.transpose();
  int best = 0;
  for (int q = 1; q < beta_row.size(); ++q)
    if (beta_row[q] > beta_row[best]) best = q;  // strict: ties keep the lowest index
  decision.psi_index = best;
  decision.bits = dpsk_bits_for_indices({best}, alphabet);
  return decision;
}

struct DataDetectionResult {
  std::vector<SymbolDecision> decisions;  // one per retained column of p_bar
  DataDiagnostics diagnostics;
  RMatrix beta;  // K x Q final beliefs
};

// Non-coherent multi-device data detection on the reduced model. An empty
// support is a valid input and yields an empty decision set.
inline DataDetectionResult run_data_detection(const CMatrix& y_prev, const CMatrix& y_curr,
                                              const CMatrix& p_bar,
                                              const DpskAlphabet& alphabet,
                                              const DataConfig& config = {}) {
  DataDetectionResult result;
  if (p_bar.cols() == 0) return result;

  DataState st = make_data_state(y_prev, y_curr, p_bar, alphabet, config);
  const RMatrix p_bar_abs2 = p_bar.cwiseAbs2();

  RMatrix beta_prev = st.beta;
  for (int it = 1; it <= config.max_iterations; ++it) {
    st.iteration = it;
    forward_xbar(st, p_bar, p_bar_abs2, config);
    compute_antenna_factors(st, alphabet);
    symbol_belief_beta(st, alphabet);
    mixture_rho(st, alphabet);
    component_moments(st, alphabet, config);
    gaussian_project(st, alphabet, config);
    backward_z_pair(st, p_bar, p_bar_abs2, config);
    belief_z_pair(st);
    update_lambda_pair(st, config);

    const double change = (st.beta - beta_prev).cwiseAbs().maxCoeff();
    result.diagnostics.trace.push_back({it, change, st.lambda.mean()});
    result.diagnostics.iterations_used = it;
    beta_prev = st.beta;
    if (change < config.beta_tolerance) break;
  }

  result.beta = st.beta;
  result.decisions.reserve(st.retained());
  for (int k = 0; k < st.retained(); ++k)
    result.decisions.push_back(hard_decide(st.beta.row(k), alphabet));
  result.diagnostics.numerics = st.numerics;
  return result;
}

}  // namespace gfnoma

#endif  // GFNOMA_NONCOH_DETECTOR_HPP
