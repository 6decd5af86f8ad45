#ifndef GFNOMA_TESTS_PER_EDGE_SBL_HPP
#define GFNOMA_TESTS_PER_EDGE_SBL_HPP

// Test-only oracle: active-device detection with exact per-edge messages,
// i.e. every chip-to-device edge carries its own extrinsic Gaussian and the
// combination across chips is the exact product. The production detector
// approximates these recursions with aggregate quantities; this oracle is
// the reference it is checked against. Deliberately written with plain
// loops, independent of the implementation path it validates.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "gfnoma/spreading.hpp"

namespace gfnoma::test_oracle {

struct PerEdgeConfig {
  int iterations = 300;
  double gamma_max = 1e11;
  double lambda_max = 1e12;
  double variance_floor = 1e-12;
  bool use_both_slots = true;
  double lambda_init = 10.0;
  bool estimate_lambda = true;
};

struct PerEdgeState {
  // beliefs, per slot
  std::vector<Eigen::MatrixXcd> mean_x;  // U x N
  std::vector<Eigen::MatrixXd> var_x;    // U x N
  Eigen::VectorXd gamma;                 // U
  Eigen::VectorXd lambda;                // N
  double epsilon = 0.0;
};

inline PerEdgeState run_per_edge_sbl(const Eigen::MatrixXcd& y_prev,
                                     const Eigen::MatrixXcd& y_curr,
                                     const Eigen::MatrixXcd& p, const PerEdgeConfig& config) {
  const int chips = static_cast<int>(p.rows());
  const int devices = static_cast<int>(p.cols());
  const int antennas = static_cast<int>(y_curr.cols());
  std::vector<const Eigen::MatrixXcd*> ys;
  if (config.use_both_slots) ys = {&y_prev, &y_curr};
  else ys = {&y_curr};
  const int slots = static_cast<int>(ys.size());

  using EdgeC = std::vector<Eigen::MatrixXcd>;  // [l](u, n)
  using EdgeR = std::vector<Eigen::MatrixXd>;

  PerEdgeState st;
  st.gamma = Eigen::VectorXd::Ones(devices);
  st.lambda = Eigen::VectorXd::Constant(antennas, config.lambda_init);
  st.mean_x.assign(slots, Eigen::MatrixXcd::Zero(devices, antennas));
  st.var_x.assign(slots, Eigen::MatrixXd::Ones(devices, antennas));

  // edge messages from x to the mixing constraints; aggregates start at
  // mean 0, variance 1 like the production initialization
  std::vector<EdgeC> edge_back_m(slots, EdgeC(chips, Eigen::MatrixXcd::Zero(devices, antennas)));
  std::vector<EdgeR> edge_back_v(
      slots, EdgeR(chips, Eigen::MatrixXd::Constant(devices, antennas,
                                                    static_cast<double>(chips) / devices)));

  std::vector<Eigen::MatrixXcd> mean_z_bel(slots, Eigen::MatrixXcd::Zero(chips, antennas));
  std::vector<Eigen::MatrixXd> var_z_bel(slots, Eigen::MatrixXd::Zero(chips, antennas));

  const double floor_v = config.variance_floor;
  for (int it = 0; it < config.iterations; ++it) {
    std::vector<Eigen::MatrixXcd> back_mean_z(slots);
    std::vector<Eigen::MatrixXd> back_var_z(slots);
    for (int s = 0; s < slots; ++s) {
      const Eigen::MatrixXcd& y = *ys[s];

      // aggregates over edges
      Eigen::MatrixXcd agg_m = Eigen::MatrixXcd::Zero(chips, antennas);
      Eigen::MatrixXd agg_v = Eigen::MatrixXd::Zero(chips, antennas);
      for (int l = 0; l < chips; ++l)
        for (int n = 0; n < antennas; ++n)
          for (int u = 0; u < devices; ++u) {
            agg_m(l, n) += p(l, u) * edge_back_m[s][l](u, n);
            agg_v(l, n) += std::norm(p(l, u)) * edge_back_v[s][l](u, n);
          }

      // exact per-edge forward, then the exact product across chips
      EdgeC fwd_m(chips, Eigen::MatrixXcd::Zero(devices, antennas));
      EdgeR fwd_v(chips, Eigen::MatrixXd::Zero(devices, antennas));
      for (int l = 0; l < chips; ++l)
        for (int n = 0; n < antennas; ++n)
          for (int u = 0; u < devices; ++u) {
            const double p2 = std::norm(p(l, u));
            double v = (1.0 / st.lambda[n] + agg_v(l, n) - p2 * edge_back_v[s][l](u, n)) / p2;
            if (!(v >= floor_v)) v = floor_v;
            fwd_v[l](u, n) = v;
            fwd_m[l](u, n) =
                (y(l, n) - agg_m(l, n) + p(l, u) * edge_back_m[s][l](u, n)) / p(l, u);
          }

      Eigen::MatrixXd fwd_var(devices, antennas);
      Eigen::MatrixXcd fwd_mean(devices, antennas);
      for (int n = 0; n < antennas; ++n)
        for (int u = 0; u < devices; ++u) {
          double prec = 0.0;
          std::complex<double> weighted = 0.0;
          for (int l = 0; l < chips; ++l) {
            prec += 1.0 / fwd_v[l](u, n);
            weighted += fwd_m[l](u, n) / fwd_v[l](u, n);
          }
          fwd_var(u, n) = 1.0 / prec;
          fwd_mean(u, n) = weighted / prec;
        }

      // beliefs under the gamma prior
      for (int n = 0; n < antennas; ++n)
        for (int u = 0; u < devices; ++u) {
          const double shrink = 1.0 + st.gamma[u] * fwd_var(u, n);
          st.mean_x[s](u, n) = fwd_mean(u, n) / shrink;
          st.var_x[s](u, n) = std::max(fwd_var(u, n) / shrink, floor_v);
        }

      // exact per-edge backward (belief minus the edge's own forward)
      for (int l = 0; l < chips; ++l)
        for (int n = 0; n < antennas; ++n)
          for (int u = 0; u < devices; ++u) {
            const double inv = 1.0 / st.var_x[s](u, n) - 1.0 / fwd_v[l](u, n);
            double v = inv > 0.0 ? 1.0 / inv : 1.0 / floor_v;
            if (!(v >= floor_v)) v = floor_v;
            edge_back_v[s][l](u, n) = v;
            edge_back_m[s][l](u, n) =
                v * (st.mean_x[s](u, n) / st.var_x[s](u, n) - fwd_m[l](u, n) / fwd_v[l](u, n));
          }

      back_mean_z[s] = Eigen::MatrixXcd::Zero(chips, antennas);
      back_var_z[s] = Eigen::MatrixXd::Zero(chips, antennas);
      for (int l = 0; l < chips; ++l)
        for (int n = 0; n < antennas; ++n)
          for (int u = 0; u < devices; ++u) {
            back_mean_z[s](l, n) += p(l, u) * edge_back_m[s][l](u, n);
            back_var_z[s](l, n) += std::norm(p(l, u)) * edge_back_v[s][l](u, n);
          }
    }

    // gamma and epsilon over the beliefs of all slots
    Eigen::VectorXd power = Eigen::VectorXd::Zero(devices);
    for (int s = 0; s < slots; ++s)
      power += (st.mean_x[s].cwiseAbs2() + st.var_x[s]).rowwise().sum();
    const double n_eff = static_cast<double>(antennas * slots);
    for (int u = 0; u < devices; ++u) {
      double g = (st.epsilon + n_eff) / power[u];
      if (!(g > 0.0) || g > config.gamma_max) g = config.gamma_max;
      st.gamma[u] = g;
    }
    const double mean_gamma = st.gamma.mean();
    const double mean_log = st.gamma.array().log().mean();
    st.epsilon = 0.5 * std::sqrt(std::max(0.0, std::log(mean_gamma) - mean_log));

    // z beliefs and the noise precision
    Eigen::VectorXd residual = Eigen::VectorXd::Zero(antennas);
    for (int s = 0; s < slots; ++s) {
      const Eigen::MatrixXcd& y = *ys[s];
      for (int l = 0; l < chips; ++l)
        for (int n = 0; n < antennas; ++n) {
          const double vz = 1.0 / (st.lambda[n] + 1.0 / back_var_z[s](l, n));
          const std::complex<double> mz =
              vz * (y(l, n) * st.lambda[n] + back_mean_z[s](l, n) / back_var_z[s](l, n));
          var_z_bel[s](l, n) = vz;
          mean_z_bel[s](l, n) = mz;
          residual[n] += std::norm(mz - y(l, n)) + vz;
        }
    }
    if (config.estimate_lambda) {
      const double chips_eff = static_cast<double>(chips * slots);
      for (int n = 0; n < antennas; ++n) {
        const double lam = chips_eff / residual[n];
        st.lambda[n] = (!(lam > 0.0) || lam > config.lambda_max) ? config.lambda_max : lam;
      }
    }
  }
  return st;
}

}  // namespace gfnoma::test_oracle

#endif  // GFNOMA_TESTS_PER_EDGE_SBL_HPP
