// Acceptance suite: end-to-end checks of the simulator and detectors at
// desk scale. Each criterion prints one [PASS]/[FAIL] line with its key
// measurements; the exit code is the number of failed criteria.
//
// Usage: acceptance [criterion ...]   (no arguments runs all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gfnoma/harness.hpp"
#include "gfnoma/stats.hpp"
#include "oracles/grid_posterior.hpp"
#include "oracles/per_edge_sbl.hpp"

using namespace gfnoma;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1
// Noiseless exactness: sigma_w^2 <= 1e-10, U=20, K=2, L=13, N=8, M=4,
// 100 seeded trials, zero misses, false alarms and bit errors.
Outcome criterion_noiseless() {
  RunConfig config;
  config.users = 20;
  config.antennas = {8};
  config.spread_lengths = {13};
  config.active_count = 2;
  config.mod_order = 4;
  config.snr_db = {100.0};  // sigma_w^2 = 1e-10
  config.trials = 100;
  config.seed = 101;
  config.detectors = {DetectorKind::kBpmf};
  const auto records = sweep(config);
  const MetricsRecord& rec = records[0];
  Outcome out;
  out.pass = rec.miss_count == 0 && rec.false_count == 0 && rec.bit_errors == 0;
  std::ostringstream ss;
  ss << "miss=" << rec.miss_count << " false=" << rec.false_count
     << " bit_errors=" << rec.bit_errors << " over " << rec.trials << " trials";
  out.detail = ss.str();
  return out;
}

// ---------------------------------------------------------------- criterion 2
// Detection trends at 8 dB: (L=13,N=100) beats (L=11,N=100) and (L=13,N=50)
// in both miss and false rate, with non-overlapping 90% Wilson intervals;
// 300 trials, escalated to 1000 when intervals overlap.
struct DetectionPoint {
  std::uint64_t miss = 0, false_alarm = 0, active = 0, inactive = 0;
};

DetectionPoint measure_detection(int spread, int antennas, int trials, std::uint64_t seed) {
  RunConfig config;
  config.users = 100;
  config.antennas = {antennas};
  config.spread_lengths = {spread};
  config.active_fraction = 0.1;
  config.snr_db = {8.0};
  config.trials = trials;
  config.seed = seed;
  config.detectors = {DetectorKind::kBpmf};
  const auto records = sweep(config);
  return {records[0].miss_count, records[0].false_count, records[0].active_total,
          records[0].inactive_total};
}

Outcome criterion_detection_trends() {
  Outcome out;
  std::ostringstream ss;
  for (int trials : {300, 1000}) {
    const DetectionPoint best = measure_detection(13, 100, trials, 201);
    const DetectionPoint longer = measure_detection(11, 100, trials, 202);
    const DetectionPoint fewer = measure_detection(13, 50, trials, 203);

    bool ordered = true, disjoint = true;
    auto compare = [&](std::uint64_t a_num, std::uint64_t a_den, std::uint64_t b_num,
                       std::uint64_t b_den) {
      const double rate_a = static_cast<double>(a_num) / a_den;
      const double rate_b = static_cast<double>(b_num) / b_den;
      ordered = ordered && rate_a < rate_b;
      const auto ia = wilson_interval(a_num, a_den, kNormal90TwoSided);
      const auto ib = wilson_interval(b_num, b_den, kNormal90TwoSided);
      disjoint = disjoint && ia.second < ib.first;
    };
    compare(best.miss, best.active, longer.miss, longer.active);
    compare(best.miss, best.active, fewer.miss, fewer.active);
    compare(best.false_alarm, best.inactive, longer.false_alarm, longer.inactive);
    compare(best.false_alarm, best.inactive, fewer.false_alarm, fewer.inactive);

    ss << "[" << trials << " trials] miss(13,100)=" << fmt(1.0 * best.miss / best.active)
       << " miss(11,100)=" << fmt(1.0 * longer.miss / longer.active)
       << " miss(13,50)=" << fmt(1.0 * fewer.miss / fewer.active)
       << " false(13,100)=" << fmt(1.0 * best.false_alarm / best.inactive)
       << " false(11,100)=" << fmt(1.0 * longer.false_alarm / longer.inactive)
       << " false(13,50)=" << fmt(1.0 * fewer.false_alarm / fewer.inactive)
       << (ordered ? "" : " [ordering violated]")
       << (disjoint ? "" : " [intervals overlap]") << "  ";
    if (ordered && disjoint) {
      out.pass = true;
      break;
    }
  }
  out.detail = ss.str();
  return out;
}

// ---------------------------------------------------------------- criterion 3
// BER ordering on L=11, N=100 with paired inputs: oracle <= proposed <=
// conventional at every sweep point where the proposed BER is inside
// [1e-3, 3e-2], conventional vs proposed separated at 95% confidence, and
// the proposed-vs-oracle SNR gap at BER 1e-3 at most 3 dB.
double interpolate_snr_at_ber(const std::vector<std::pair<double, double>>& curve,
                              double target) {
  // curve: (snr, ber) with snr ascending, ber falling along the sweep
  const double log_target = std::log10(target);
  for (size_t i = 0; i + 1 < curve.size(); ++i) {
    const double b0 = curve[i].second;
    const double b1 = curve[i + 1].second;
    if (b0 >= target && b1 <= target) {
      if (b1 <= 0.0)  // crossed into an exact zero: take the right edge
        return curve[i + 1].first;
      const double l0 = std::log10(b0);
      const double l1 = std::log10(b1);
      if (l0 == l1) return curve[i].first;
      return curve[i].first +
             (curve[i + 1].first - curve[i].first) * (l0 - log_target) / (l0 - l1);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

Outcome criterion_ber_ordering() {
  RunConfig config;
  config.users = 100;
  config.antennas = {100};
  config.spread_lengths = {11};
  config.active_fraction = 0.1;
  config.snr_db = {-1, 0, 1, 2, 3, 4, 5, 6, 7, 8};
  config.trials = 1000;
  config.seed = 301;
  config.detectors = {DetectorKind::kBpmf, DetectorKind::kConventional,
                      DetectorKind::kOracleAided};

  std::vector<std::pair<double, double>> proposed_curve, oracle_curve, proposed_cond_curve;
  bool ordered = true, separated = true;
  int in_band_points = 0;
  std::ostringstream ss;
  for (const GridPoint& point : make_grid(config)) {
    const PointResult pr = run_point(config, point);
    const double ber_prop = pr.records[0].ber();
    const double ber_conv = pr.records[1].ber();
    const double ber_oracle = pr.records[2].ber();
    proposed_curve.push_back({point.snr_db, ber_prop});
    proposed_cond_curve.push_back({point.snr_db, pr.records[0].ber_detected()});
    oracle_curve.push_back({point.snr_db, ber_oracle});

    const bool in_band = ber_prop >= 1e-3 && ber_prop <= 3e-2;
    if (!in_band) continue;
    ++in_band_points;
    ordered = ordered && ber_oracle <= ber_prop && ber_prop <= ber_conv;
    std::vector<double> conv_errors, prop_errors;
    for (const TrialResult& trial : pr.trials) {
      prop_errors.push_back(static_cast<double>(trial.per_detector[0].bit_errors));
      conv_errors.push_back(static_cast<double>(trial.per_detector[1].bit_errors));
    }
    const double t = paired_t_statistic(conv_errors, prop_errors);
    separated = separated && t > kNormal95OneSided;
    ss << "snr=" << point.snr_db << ": oracle=" << fmt(ber_oracle) << " <= prop="
       << fmt(ber_prop) << " <= conv=" << fmt(ber_conv) << " (t=" << fmt(t) << ")  ";
  }

  const double snr_prop = interpolate_snr_at_ber(proposed_curve, 1e-3);
  const double snr_oracle = interpolate_snr_at_ber(oracle_curve, 1e-3);
  const double snr_prop_cond = interpolate_snr_at_ber(proposed_cond_curve, 1e-3);
  const double gap = snr_prop - snr_oracle;
  ss << "| snr@1e-3: prop=" << fmt(snr_prop) << " oracle=" << fmt(snr_oracle)
     << " gap=" << fmt(gap) << " dB (support-conditioned prop=" << fmt(snr_prop_cond)
     << ", gap=" << fmt(snr_prop_cond - snr_oracle) << " dB)";

  Outcome out;
  out.pass = in_band_points >= 1 && ordered && separated && std::isfinite(gap) && gap <= 3.0;
  out.detail = ss.str();
  return out;
}

// ---------------------------------------------------------------- criterion 4
// Spreading-length effect: BER(L=13) < BER(L=11) at a fixed mid-range SNR
// (0 dB, the centre of the detection waterfall under the declared SNR
// convention), N=100, separated at 95% confidence.
Outcome criterion_spreading_length() {
  RunConfig config;
  config.users = 100;
  config.antennas = {100};
  config.active_fraction = 0.1;
  config.snr_db = {0.0};
  config.trials = 1500;
  config.seed = 401;
  config.detectors = {DetectorKind::kBpmf};

  auto errors_for = [&](int spread) {
    RunConfig c = config;
    c.spread_lengths = {spread};
    const auto grid = make_grid(c);
    const PointResult pr = run_point(c, grid[0]);
    std::vector<double> errors;
    for (const TrialResult& trial : pr.trials)
      errors.push_back(static_cast<double>(trial.per_detector[0].bit_errors));
    return std::pair{errors, pr.records[0].ber()};
  };
  const auto [errors_13, ber_13] = errors_for(13);
  const auto [errors_11, ber_11] = errors_for(11);
  const double t = welch_t_statistic(errors_11, errors_13);

  Outcome out;
  out.pass = ber_13 < ber_11 && t > kNormal95OneSided;
  out.detail = "ber(L=13)=" + fmt(ber_13) + " ber(L=11)=" + fmt(ber_11) + " t=" + fmt(t) +
               " at 0 dB, N=100";
  return out;
}

// ---------------------------------------------------------------- criterion 5
// Exact per-edge messages vs the implemented aggregate approximations on
// U=8, L=13, N=4: relative deviation of converged m_x and v_x below 1%.
Outcome criterion_per_edge_equivalence() {
  const auto spreading = build_spreading_matrix(13, 8);
  DpskAlphabet alphabet(4);
  TrialRng rng(501);
  const auto activity = draw_activity(8, 2, rng);
  const auto channel = draw_channel(8, 4, rng);
  std::vector<SymbolFrame> frames;
  for (int u = 0; u < 8; ++u)
    frames.push_back(differential_encode({static_cast<int>(rng.uniform_int(4))}, 0, alphabet));
  const auto pair =
      synthesize_pair(spreading, channel, activity, frames, 1, alphabet, 0.1, rng);

  SblConfig config;
  config.max_iterations = 300;
  config.gamma_tolerance = 0.0;
  SblState st = make_sbl_state(pair.y_prev, pair.y_curr, spreading, config);
  const RMatrix p_abs2 = spreading.entries.cwiseAbs2();
  for (int it = 0; it < config.max_iterations; ++it) {
    sbl_forward_x(st, spreading.entries, p_abs2, config);
    sbl_belief_x(st, config);
    sbl_backward_z(st, spreading.entries, p_abs2, config);
    sbl_update_gamma(st, config);
    sbl_update_epsilon(st);
    sbl_belief_z_and_lambda(st, config);
  }
  test_oracle::PerEdgeConfig oracle_config;
  oracle_config.iterations = 300;
  const auto oracle = test_oracle::run_per_edge_sbl(pair.y_prev, pair.y_curr, spreading.entries,
                                                    oracle_config);
  double mean_dev = 0.0, var_dev = 0.0, var_abs = 0.0;
  for (int s = 0; s < 2; ++s) {
    mean_dev = std::max(mean_dev,
                        (st.mean_x[s] - oracle.mean_x[s]).norm() / oracle.mean_x[s].norm());
    var_dev =
        std::max(var_dev, (st.var_x[s] - oracle.var_x[s]).norm() / oracle.var_x[s].norm());
    var_abs = std::max(var_abs, (st.var_x[s] - oracle.var_x[s]).cwiseAbs().maxCoeff());
  }
  Outcome out;
  out.pass = mean_dev < 0.01 && var_dev < 0.01;
  out.detail = "rel dev m_x=" + fmt(mean_dev) + " v_x=" + fmt(var_dev) +
               " (max abs v_x dev=" + fmt(var_abs) + ")";
  return out;
}

// ---------------------------------------------------------------- criterion 6
// Tiny-instance posterior: beliefs from data detection vs the grid-
// marginalized exact posterior with known noise precision; K=1, N <= 2,
// L=13, 20 seeded draws at 10 dB, total variation below 0.05.
Outcome criterion_posterior_oracle() {
  DpskAlphabet alphabet(4);
  const auto spreading = build_spreading_matrix(13, 3);
  const double noise_variance = snr_to_noise_variance(10.0);
  double worst_tv = 0.0;
  int draws = 0;
  for (int antennas : {1, 2}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      TrialRng rng(600 + 50 * antennas + seed);
      ActivityPattern activity;
      activity.indicator = {0, 1, 0};
      activity.active_set = {1};
      const auto channel = draw_channel(3, antennas, rng);
      std::vector<SymbolFrame> frames;
      for (int u = 0; u < 3; ++u)
        frames.push_back(
            differential_encode({static_cast<int>(rng.uniform_int(4))}, 0, alphabet));
      const auto pair = synthesize_pair(spreading, channel, activity, frames, 1, alphabet,
                                        noise_variance, rng);
      const CMatrix p_bar = restrict_columns(spreading.entries, {1});

      DataConfig config;
      config.estimate_lambda = false;  // the property is stated at known lambda
      config.lambda_init = 1.0 / noise_variance;
      const auto result = run_data_detection(pair.y_prev, pair.y_curr, p_bar, alphabet, config);
      const auto exact = test_oracle::exact_symbol_posterior(
          pair.y_prev, pair.y_curr, p_bar.col(0), alphabet, 1.0 / noise_variance);
      worst_tv =
          std::max(worst_tv, test_oracle::total_variation(result.beta.row(0).transpose(), exact));
      ++draws;
    }
  }
  Outcome out;
  out.pass = worst_tv < 0.05;
  out.detail = "max total variation " + fmt(worst_tv) + " over " + std::to_string(draws) +
               " draws (N=1 and N=2)";
  return out;
}

// ---------------------------------------------------------------- criterion 7
// Estimator sanity: belief/weight normalization each iteration, projection
// mean exactness, pair noise-precision concentration, epsilon at equality.
Outcome criterion_estimator_sanity() {
  DpskAlphabet alphabet(4);
  Outcome out;
  std::ostringstream ss;
  bool ok = true;

  // normalization across iterations of seeded noisy runs
  double worst_norm = 0.0;
  for (std::uint64_t seed = 701; seed < 704; ++seed) {
    const auto spreading = build_spreading_matrix(13, 16);
    TrialRng rng(seed);
    const auto activity = draw_activity(16, 4, rng);
    const auto channel = draw_channel(16, 8, rng);
    std::vector<SymbolFrame> frames;
    for (int u = 0; u < 16; ++u)
      frames.push_back(differential_encode({static_cast<int>(rng.uniform_int(4))}, 0, alphabet));
    const auto pair = synthesize_pair(spreading, channel, activity, frames, 1, alphabet,
                                      snr_to_noise_variance(3.0), rng);
    const CMatrix p_bar = restrict_columns(spreading.entries, activity.active_set);
    DataConfig config;
    DataState st = make_data_state(pair.y_prev, pair.y_curr, p_bar, alphabet, config);
    const RMatrix p_abs2 = p_bar.cwiseAbs2();
    for (int it = 0; it < 10; ++it) {
      forward_xbar(st, p_bar, p_abs2, config);
      compute_antenna_factors(st, alphabet);
      symbol_belief_beta(st, alphabet);
      mixture_rho(st, alphabet);
      component_moments(st, alphabet, config);
      gaussian_project(st, alphabet, config);
      backward_z_pair(st, p_bar, p_abs2, config);
      belief_z_pair(st);
      update_lambda_pair(st, config);
      for (int k = 0; k < st.retained(); ++k) {
        worst_norm = std::max(worst_norm, std::abs(st.beta.row(k).sum() - 1.0));
        worst_norm = std::max(worst_norm, std::abs(st.rho.row(k).sum() - 1.0));
        if (st.beta.row(k).minCoeff() < 0.0 || st.rho.row(k).minCoeff() < 0.0) ok = false;
      }
    }
  }
  ok = ok && worst_norm <= 1e-9;
  ss << "norm dev=" << fmt(worst_norm);

  // projection mean exactness on random mixtures
  double worst_mean = 0.0;
  {
    TrialRng rng(705);
    DataConfig config;
    const CMatrix y = CMatrix::Zero(1, 1);
    CMatrix p_bar = CMatrix::Ones(1, 1);
    for (int rep = 0; rep < 100; ++rep) {
      DataState st = make_data_state(y, y, p_bar, alphabet, config);
      st.fwd_mean[1](0, 0) = rng.cnormal(1.0);
      st.fwd_mean[0](0, 0) = rng.cnormal(1.0);
      st.fwd_var[1](0, 0) = 0.1 + rng.uniform();
      st.fwd_var[0](0, 0) = 0.1 + rng.uniform();
      compute_antenna_factors(st, alphabet);
      symbol_belief_beta(st, alphabet);
      mixture_rho(st, alphabet);
      component_moments(st, alphabet, config);
      gaussian_project(st, alphabet, config);
      std::complex<double> mixture = 0.0;
      for (int q = 0; q < 4; ++q) mixture += st.rho(0, q) * st.comp_mean_curr[q](0, 0);
      worst_mean = std::max(worst_mean, std::abs(st.proj_mean[1](0, 0) - mixture));
    }
  }
  ok = ok && worst_mean <= 1e-12;
  ss << " projection mean dev=" << fmt(worst_mean);

  // noise precision concentration on a true-noise feed, both slots
  {
    TrialRng rng(706);
    const int chips = 13, antennas = 100;
    CMatrix z0(chips, antennas), z1(chips, antennas), y0(chips, antennas), y1(chips, antennas);
    for (int l = 0; l < chips; ++l)
      for (int n = 0; n < antennas; ++n) {
        z0(l, n) = rng.cnormal(1.0);
        z1(l, n) = rng.cnormal(1.0);
        y0(l, n) = z0(l, n) + rng.cnormal(1.0);
        y1(l, n) = z1(l, n) + rng.cnormal(1.0);
      }
    DataConfig config;
    CMatrix p_bar = build_spreading_matrix(chips, 2).entries;
    DataState st = make_data_state(y0, y1, p_bar, alphabet, config);
    st.mean_z[0] = z0;
    st.mean_z[1] = z1;
    st.var_z[0].setZero();
    st.var_z[1].setZero();
    update_lambda_pair(st, config);
    std::vector<double> lambdas(st.lambda.data(), st.lambda.data() + antennas);
    std::nth_element(lambdas.begin(), lambdas.begin() + antennas / 2, lambdas.end());
    const double median = lambdas[antennas / 2];
    ok = ok && median > 0.89 && median < 1.12;
    ss << " lambda median=" << fmt(median);
  }

  // epsilon vanishes on constant gamma
  {
    const auto spreading = build_spreading_matrix(13, 6);
    SblConfig config;
    SblState st = make_sbl_state(CMatrix::Zero(13, 1), CMatrix::Zero(13, 1), spreading, config);
    st.gamma.setConstant(42.0);
    sbl_update_epsilon(st);
    ok = ok && st.epsilon == 0.0;
    ss << " epsilon(const)=" << fmt(st.epsilon);
  }

  out.pass = ok;
  out.detail = ss.str();
  return out;
}

// ---------------------------------------------------------------- criterion 8
// Determinism: the criterion-2 workload run twice with one seed produces
// byte-identical CSV output apart from the wall-time column.
Outcome criterion_determinism() {
  RunConfig config;
  config.users = 100;
  config.antennas = {100, 50};
  config.spread_lengths = {13, 11};
  config.active_fraction = 0.1;
  config.snr_db = {8.0};
  config.trials = 300;
  config.seed = 801;
  config.detectors = {DetectorKind::kBpmf};

  const auto dir = std::filesystem::temp_directory_path();
  const std::string path_a = (dir / "gfnoma_acc_det_a.csv").string();
  const std::string path_b = (dir / "gfnoma_acc_det_b.csv").string();
  emit_csv(sweep(config), path_a);
  emit_csv(sweep(config), path_b);

  auto strip_seconds = [](const std::string& path) {
    std::string stripped;
    for (const auto& row : read_csv(path)) {
      for (size_t i = 0; i + 1 < row.size(); ++i) {
        stripped += row[i];
        stripped += ',';
      }
      stripped += '\n';
    }
    return stripped;
  };
  const std::string a = strip_seconds(path_a);
  const std::string b = strip_seconds(path_b);
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);

  Outcome out;
  out.pass = !a.empty() && a == b;
  out.detail = out.pass ? "two 4-point sweeps byte-identical (seconds column excluded)"
                        : "sweep outputs differ";
  return out;
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "noiseless exactness", criterion_noiseless},
    {2, "detection trend reproduction", criterion_detection_trends},
    {3, "BER ordering and oracle gap", criterion_ber_ordering},
    {4, "spreading-length effect", criterion_spreading_length},
    {5, "per-edge oracle equivalence", criterion_per_edge_equivalence},
    {6, "tiny-instance posterior oracle", criterion_posterior_oracle},
    {7, "estimator sanity", criterion_estimator_sanity},
    {8, "determinism", criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& criterion : kCriteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), criterion.number) == selected.end())
      continue;
    const auto start = std::chrono::steady_clock::now();
    const Outcome outcome = criterion.run();
    std::printf("[%s] criterion %d: %s — %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL",
                criterion.number, criterion.name, outcome.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures;
}
