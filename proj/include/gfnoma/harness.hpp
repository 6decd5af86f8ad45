#ifndef GFNOMA_HARNESS_HPP
#define GFNOMA_HARNESS_HPP

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gfnoma/baselines.hpp"
#include "gfnoma/channel.hpp"
#include "gfnoma/dpsk.hpp"
#include "gfnoma/noncoh_detector.hpp"
#include "gfnoma/rng.hpp"
#include "gfnoma/sbl_detector.hpp"
#include "gfnoma/spreading.hpp"

namespace gfnoma {

enum class DetectorKind { kBpmf, kConventional, kOracleAided };

inline std::string detector_name(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kBpmf: return "bpmf";
    case DetectorKind::kConventional: return "conventional";
    case DetectorKind::kOracleAided: return "oracle-aided";
  }
  return "unknown";
}

inline DetectorKind parse_detector(const std::string& name) {
  if (name == "bpmf") return DetectorKind::kBpmf;
  if (name == "conventional") return DetectorKind::kConventional;
  if (name == "oracle-aided") return DetectorKind::kOracleAided;
  throw std::invalid_argument("unknown detector: " + name);
}

struct RunConfig {
  int users = 100;
  std::vector<int> antennas = {100};
  std::vector<int> spread_lengths = {13};
  double active_fraction = 0.1;
  int active_count = -1;  // overrides the fraction when >= 0
  int mod_order = 4;
  std::vector<double> snr_db = {8.0};
  int trials = 100;
  std::uint64_t seed = 1;
  std::vector<DetectorKind> detectors = {DetectorKind::kBpmf};
  SblConfig sbl{};
  DataConfig data{};
  double channel_prior_variance = 1.0;
  bool lmmse_uses_sbl_lambda = false;   // baseline regularization from the SBL estimate
  bool data_warm_start_lambda = false;  // start data detection from the SBL lambda
  int threads = 0;                      // 0: hardware concurrency
  std::string output_path;
  std::string diagnostics_dir;

  int active_count_for(int users_in) const {
    return active_count >= 0 ? active_count
                             : static_cast<int>(std::floor(active_fraction * users_in));
  }

  void validate() const {
    if (users < 1) throw std::invalid_argument("config: users must be >= 1");
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (snr_db.empty()) throw std::invalid_argument("config: SNR list must be nonempty");
    if (antennas.empty() || spread_lengths.empty())
      throw std::invalid_argument("config: antenna and spreading-length lists must be nonempty");
    if (detectors.empty()) throw std::invalid_argument("config: detector list must be nonempty");
    if (mod_order < 2 || (mod_order & (mod_order - 1)) != 0)
      throw std::invalid_argument("config: modulation order must be a power of two");
    const int k = active_count_for(users);
    if (k < 0 || k > users) throw std::invalid_argument("config: active count out of [0, U]");
  }
};

struct GridPoint {
  int spread_length = 0;
  int antennas = 0;
  double snr_db = 0.0;
  int active_count = 0;
  int index = 0;  // position in the sweep grid, keys the seed substream
};

// Raw per-trial counts for one detector.
struct TrialOutcome {
  std::uint64_t miss = 0;
  std::uint64_t false_alarm = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  std::uint64_t bit_errors_detected = 0;
  std::uint64_t bits_detected = 0;
  NumericsCounters events;
};

struct TrialResult {
  int k_true = 0;
  std::vector<TrialOutcome> per_detector;  // aligned with RunConfig::detectors
};

struct MetricsRecord {
  GridPoint point;
  DetectorKind detector = DetectorKind::kBpmf;
  int users = 0;
  std::uint64_t trials = 0;
  std::uint64_t miss_count = 0;
  std::uint64_t false_count = 0;
  std::uint64_t active_total = 0;
  std::uint64_t inactive_total = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  std::uint64_t bit_errors_detected = 0;
  std::uint64_t bits_detected = 0;
  double seconds = 0.0;
  NumericsCounters events;

  double miss_rate() const {
    return active_total ? static_cast<double>(miss_count) / active_total
                        : std::numeric_limits<double>::quiet_NaN();
  }
  double false_rate() const {
    return inactive_total ? static_cast<double>(false_count) / inactive_total
                          : std::numeric_limits<double>::quiet_NaN();
  }
  double ber() const {
    return bits ? static_cast<double>(bit_errors) / bits
                : std::numeric_limits<double>::quiet_NaN();
  }
  double ber_detected() const {
    return bits_detected ? static_cast<double>(bit_errors_detected) / bits_detected
                         : std::numeric_limits<double>::quiet_NaN();
  }
};

namespace detail {

inline int bit_difference(int word_a, int word_b) {
  int x = word_a ^ word_b;
  int count = 0;
  while (x) {
    count += x & 1;
    x >>= 1;
  }
  return count;
}

// Score one detector's support + decisions against the truth. Missed active
// devices contribute every bit as an error; the detected-only tally skips
// them so schemes sharing a support can be compared on symbol quality alone.
inline TrialOutcome score_trial(const ReceivedPair& pair, const std::vector<int>& support,
                                const std::vector<SymbolDecision>& decisions,
                                const DpskAlphabet& alphabet) {
  TrialOutcome out;
  const int bps = alphabet.bits_per_symbol();
  std::vector<int> position(pair.activity.devices(), -1);
  for (size_t i = 0; i < support.size(); ++i) position[support[i]] = static_cast<int>(i);

  for (int u = 0; u < pair.activity.devices(); ++u) {
    const bool truly_active = pair.activity.indicator[u] != 0;
    const bool detected = position[u] >= 0;
    if (truly_active && !detected) ++out.miss;
    if (!truly_active && detected) ++out.false_alarm;
    if (!truly_active) continue;
    out.bits += bps;
    if (!detected) {
      out.bit_errors += bps;
      continue;
    }
    const int decided_word = alphabet.word_for_index(decisions[position[u]].psi_index);
    const int true_word = alphabet.word_for_index(pair.data_index[u]);
    const int errs = bit_difference(decided_word, true_word);
    out.bit_errors += errs;
    out.bits_detected += bps;
    out.bit_errors_detected += errs;
  }
  return out;
}

}  // namespace detail

// One full pipeline pass, deterministic in (seed, grid index, trial index).
// All selected detectors see the same synthesized pair.
inline TrialResult run_trial(const RunConfig& config, const GridPoint& point,
                             const SpreadingMatrix& spreading, int trial_index) {
  TrialRng rng(config.seed, static_cast<std::uint64_t>(point.index),
               static_cast<std::uint64_t>(trial_index));
  const DpskAlphabet alphabet(config.mod_order);
  const int users = config.users;

  const ActivityPattern activity = draw_activity(users, point.active_count, rng);
  const ChannelRealization channel = draw_channel(users, point.antennas, rng);
  std::vector<SymbolFrame> frames;
  frames.reserve(users);
  for (int u = 0; u < users; ++u) {
    const int psi = static_cast<int>(rng.uniform_int(alphabet.order()));
    frames.push_back(differential_encode({psi}, 0, alphabet));
  }
  const double noise_variance = snr_to_noise_variance(point.snr_db);
  const ReceivedPair pair = synthesize_pair(spreading, channel, activity, frames, 1, alphabet,
                                            noise_variance, rng);

  bool need_sbl = false;
  for (DetectorKind kind : config.detectors)
    if (kind != DetectorKind::kOracleAided) need_sbl = true;

  ActiveDetectionResult sbl_result;
  if (need_sbl)
    sbl_result = run_active_detection(pair.y_prev, pair.y_curr, spreading, config.sbl);

  TrialResult result;
  result.k_true = activity.active_count();
  result.per_detector.reserve(config.detectors.size());

  for (DetectorKind kind : config.detectors) {
    TrialOutcome outcome;
    if (kind == DetectorKind::kBpmf || kind == DetectorKind::kOracleAided) {
      const std::vector<int>& support = (kind == DetectorKind::kBpmf)
                                            ? sbl_result.support.indices
                                            : pair.activity.active_set;
      const CMatrix p_bar = restrict_columns(spreading.entries, support);
      DataConfig data_config = config.data;
      if (config.data_warm_start_lambda && kind == DetectorKind::kBpmf && need_sbl)
        data_config.lambda_warm = sbl_result.lambda;
      const DataDetectionResult detection =
          run_data_detection(pair.y_prev, pair.y_curr, p_bar, alphabet, data_config);
      outcome = detail::score_trial(pair, support, detection.decisions, alphabet);
      outcome.events += detection.diagnostics.numerics;
      if (kind == DetectorKind::kBpmf) outcome.events += sbl_result.diagnostics.numerics;
    } else {
      const std::vector<int>& support = sbl_result.support.indices;
      const CMatrix p_bar = restrict_columns(spreading.entries, support);
      BaselineConfig baseline;
      baseline.channel_variance = config.channel_prior_variance;
      baseline.noise_variance = config.lmmse_uses_sbl_lambda
                                    ? 1.0 / sbl_result.lambda.mean()
                                    : noise_variance;
      NumericsCounters baseline_events;
      const auto decisions =
          conventional_detect(pair.y_prev, pair.y_curr, p_bar, alphabet, baseline,
                              &baseline_events);
      outcome = detail::score_trial(pair, support, decisions, alphabet);
      outcome.events += baseline_events;
      outcome.events += sbl_result.diagnostics.numerics;
    }
    result.per_detector.push_back(std::move(outcome));
  }
  return result;
}

struct PointResult {
  GridPoint point;
  std::vector<TrialResult> trials;          // indexed by trial
  std::vector<MetricsRecord> records;       // one per detector
};

inline std::vector<MetricsRecord> compute_metrics(const RunConfig& config, const GridPoint& point,
                                                  const std::vector<TrialResult>& trials,
                                                  double seconds) {
  std::vector<MetricsRecord> records(config.detectors.size());
  for (size_t d = 0; d < config.detectors.size(); ++d) {
    MetricsRecord& rec = records[d];
    rec.point = point;
    rec.detector = config.detectors[d];
    rec.users = config.users;
    rec.trials = trials.size();
    rec.seconds = seconds;
    for (const TrialResult& trial : trials) {
      const TrialOutcome& o = trial.per_detector[d];
      rec.miss_count += o.miss;
      rec.false_count += o.false_alarm;
      rec.active_total += static_cast<std::uint64_t>(trial.k_true);
      rec.inactive_total += static_cast<std::uint64_t>(config.users - trial.k_true);
      rec.bit_errors += o.bit_errors;
      rec.bits += o.bits;
      rec.bit_errors_detected += o.bit_errors_detected;
      rec.bits_detected += o.bits_detected;
      rec.events += o.events;
    }
  }
  return records;
}

// All trials of one grid point, dispatched to a worker pool and reduced in
// trial order.
inline PointResult run_point(const RunConfig& config, const GridPoint& point) {
  const auto start = std::chrono::steady_clock::now();
  const SpreadingMatrix spreading = build_spreading_matrix(point.spread_length, config.users);

  PointResult result;
  result.point = point;
  result.trials.resize(config.trials);

  int thread_count = config.threads > 0
                         ? config.threads
                         : static_cast<int>(std::thread::hardware_concurrency());
  if (thread_count < 1) thread_count = 1;
  thread_count = std::min(thread_count, config.trials);

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int index = next.fetch_add(1);
      if (index >= config.trials) break;
      result.trials[index] = run_trial(config, point, spreading, index);
    }
  };
  if (thread_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.records = compute_metrics(config, point, result.trials, seconds);
  return result;
}

inline std::vector<GridPoint> make_grid(const RunConfig& config) {
  std::vector<GridPoint> grid;
  int index = 0;
  for (int length : config.spread_lengths)
    for (int n : config.antennas)
      for (double snr : config.snr_db)
        grid.push_back({length, n, snr, config.active_count_for(config.users), index++});
  return grid;
}

namespace detail {

inline std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// Captures the first trial of a grid point with full per-iteration traces.
inline void emit_point_diagnostics(const RunConfig& config, const GridPoint& point,
                                   const SpreadingMatrix& spreading, const std::string& dir);

}  // namespace detail

// Cartesian sweep over (L, N, SNR); trial substreams are disjoint across
// grid points.
inline std::vector<MetricsRecord> sweep(const RunConfig& config) {
  config.validate();
  std::vector<MetricsRecord> records;
  for (const GridPoint& point : make_grid(config)) {
    PointResult point_result = run_point(config, point);
    for (MetricsRecord& rec : point_result.records) records.push_back(std::move(rec));
    if (!config.diagnostics_dir.empty()) {
      const SpreadingMatrix spreading =
          build_spreading_matrix(point.spread_length, config.users);
      detail::emit_point_diagnostics(config, point, spreading, config.diagnostics_dir);
    }
  }
  return records;
}

inline void emit_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_csv: cannot open " + path);
  out << "snr_db,L,N,U,K,detector,miss_rate,false_rate,ber,ber_cond,trials,bits,seconds\n";
  for (const MetricsRecord& rec : records) {
    out << detail::format_double(rec.point.snr_db) << ',' << rec.point.spread_length << ','
        << rec.point.antennas << ',' << rec.users << ',' << rec.point.active_count << ','
        << detector_name(rec.detector) << ',' << detail::format_double(rec.miss_rate()) << ','
        << detail::format_double(rec.false_rate()) << ',' << detail::format_double(rec.ber())
        << ',' << detail::format_double(rec.ber_detected()) << ',' << rec.trials << ','
        << rec.bits << ',' << detail::format_double(rec.seconds) << '\n';
  }
  if (!out) throw std::runtime_error("emit_csv: write failed for " + path);
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

namespace detail {

inline void emit_point_diagnostics(const RunConfig& config, const GridPoint& point,
                                   const SpreadingMatrix& spreading, const std::string& dir) {
  std::filesystem::create_directories(dir);
  TrialRng rng(config.seed, static_cast<std::uint64_t>(point.index), 0);
  const DpskAlphabet alphabet(config.mod_order);
  const ActivityPattern activity = draw_activity(config.users, point.active_count, rng);
  const ChannelRealization channel = draw_channel(config.users, point.antennas, rng);
  std::vector<SymbolFrame> frames;
  for (int u = 0; u < config.users; ++u) {
    const int psi = static_cast<int>(rng.uniform_int(alphabet.order()));
    frames.push_back(differential_encode({psi}, 0, alphabet));
  }
  const ReceivedPair pair =
      synthesize_pair(spreading, channel, activity, frames, 1, alphabet,
                      snr_to_noise_variance(point.snr_db), rng);

  const ActiveDetectionResult sbl_result =
      run_active_detection(pair.y_prev, pair.y_curr, spreading, config.sbl);
  const CMatrix p_bar = restrict_columns(spreading.entries, sbl_result.support.indices);
  const DataDetectionResult data_result =
      run_data_detection(pair.y_prev, pair.y_curr, p_bar, alphabet, config.data);

  std::ostringstream name;
  name << dir << "/trace_L" << point.spread_length << "_N" << point.antennas << "_snr"
       << format_double(point.snr_db) << "_trial0.csv";
  std::ofstream out(name.str(), std::ios::binary);
  if (!out) throw std::runtime_error("diagnostics: cannot open " + name.str());
  out << "stage,iteration,max_change,lambda_mean\n";
  for (const auto& rec : sbl_result.diagnostics.trace)
    out << "active," << rec.iteration << ',' << format_double(rec.max_rel_gamma_change) << ','
        << format_double(rec.lambda_mean) << '\n';
  for (const auto& rec : data_result.diagnostics.trace)
    out << "data," << rec.iteration << ',' << format_double(rec.max_beta_change) << ','
        << format_double(rec.lambda_mean) << '\n';
}

}  // namespace detail

}  // namespace gfnoma

#endif  // GFNOMA_HARNESS_HPP
