#ifndef GFNOMA_BASELINES_HPP
#define GFNOMA_BASELINES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "gfnoma/channel.hpp"
#include "gfnoma/dpsk.hpp"
#include "gfnoma/noncoh_detector.hpp"
#include "gfnoma/numerics.hpp"
#include "gfnoma/sbl_detector.hpp"

namespace gfnoma {

struct BaselineConfig {
  double noise_variance = 0.0;    // regularization source, true value in simulation
  double channel_variance = 1.0;  // prior variance of the retained entries
};

// Regularized linear MMSE estimate of the retained rows, columns handled
// independently: (Pbar^H Pbar + (noise/prior) I)^-1 Pbar^H Y. A zero noise
// variance degrades to the pseudo-inverse.
inline CMatrix lmmse_xbar(const CMatrix& y, const CMatrix& p_bar, double noise_variance,
                          double channel_variance = 1.0) {
  const Eigen::Index retained = p_bar.cols();
  if (retained == 0) return CMatrix(0, y.cols());
  if (noise_variance <= 0.0)
    return p_bar.completeOrthogonalDecomposition().solve(y);
  CMatrix gram = p_bar.adjoint() * p_bar;
  gram.diagonal().array() += noise_variance / channel_variance;
  return gram.ldlt().solve(p_bar.adjoint() * y);
}

// Conventional two-step demodulation: LMMSE-estimate both slots, average the
// per-antenna ratios, snap to the nearest demodulation symbol. Antennas with
// an exactly zero slot-(t-1) estimate are excluded from the average; if none
// remain the decision falls back to the first constellation point and the
// fallback is counted.
inline std::vector<SymbolDecision> conventional_detect(const CMatrix& y_prev,
                                                       const CMatrix& y_curr,
                                                       const CMatrix& p_bar,
                                                       const DpskAlphabet& alphabet,
                                                       const BaselineConfig& config,
                                                       NumericsCounters* counters = nullptr) {
  const int retained = static_cast<int>(p_bar.cols());
  std::vector<SymbolDecision> decisions;
  if (retained == 0) return decisions;

  const CMatrix x_prev = lmmse_xbar(y_prev, p_bar, config.noise_variance, config.channel_variance);
  const CMatrix x_curr = lmmse_xbar(y_curr, p_bar, config.noise_variance, config.channel_variance);
  const int antennas = static_cast<int>(y_curr.cols());

  decisions.reserve(retained);
  for (int k = 0; k < retained; ++k) {
    std::complex<double> accum = 0.0;
    int used = 0;
    for (int n = 0; n < antennas; ++n) {
      const std::complex<double> denom = x_prev(k, n);
      if (denom == std::complex<double>(0.0, 0.0)) continue;
      accum += x_curr(k, n) / denom;
      ++used;
    }
    SymbolDecision decision;
    if (used == 0) {
      decision.psi_index = 0;
      if (counters) ++counters->ratio_fallbacks;
    } else {
      decision.psi_index = alphabet.nearest_index(accum / static_cast<double>(used));
    }
    decision.beta = RVector::Zero(alphabet.order());
    decision.beta[decision.psi_index] = 1.0;
    decision.bits = dpsk_bits_for_indices({decision.psi_index}, alphabet);
    decisions.push_back(std::move(decision));
  }
  return decisions;
}

// Benchmark support with the true activity pattern.
inline SupportEstimate oracle_support(const ActivityPattern& truth) {
  SupportEstimate est;
  est.indices = truth.active_set;
  return est;
}

}  // namespace gfnoma

#endif  // GFNOMA_BASELINES_HPP
