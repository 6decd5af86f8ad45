#ifndef GFNOMA_CHANNEL_HPP
#define GFNOMA_CHANNEL_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gfnoma/dpsk.hpp"
#include "gfnoma/rng.hpp"
#include "gfnoma/spreading.hpp"

namespace gfnoma {

struct ActivityPattern {
  std::vector<int> indicator;   // size U, 0/1
  std::vector<int> active_set;  // sorted indices with indicator == 1

  int devices() const { return static_cast<int>(indicator.size()); }
  int active_count() const { return static_cast<int>(active_set.size()); }
};

// Exactly K distinct devices active, chosen uniformly.
inline ActivityPattern draw_activity(int devices, int active_count, TrialRng& rng) {
  if (active_count < 0 || active_count > devices)
    throw std::invalid_argument("draw_activity: need 0 <= K <= U");
  std::vector<int> pool(devices);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < active_count; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(devices - i));
    std::swap(pool[i], pool[j]);
  }
  ActivityPattern pattern;
  pattern.indicator.assign(devices, 0);
  pattern.active_set.assign(pool.begin(), pool.begin() + active_count);
  std::sort(pattern.active_set.begin(), pattern.active_set.end());
  for (int u : pattern.active_set) pattern.indicator[u] = 1;
  return pattern;
}

// i.i.d. unit-variance circularly-symmetric coefficients, one row per device,
// one column per receive antenna. Held fixed across the two symbol intervals
// of a pair.
struct ChannelRealization {
  CMatrix coefficients;  // U x N

  int devices() const { return static_cast<int>(coefficients.rows()); }
  int antennas() const { return static_cast<int>(coefficients.cols()); }
};

inline ChannelRealization draw_channel(int devices, int antennas, TrialRng& rng) {
  if (devices < 1 || antennas < 1)
    throw std::invalid_argument("draw_channel: need U, N >= 1");
  ChannelRealization ch;
  ch.coefficients.resize(devices, antennas);
  for (int u = 0; u < devices; ++u)
    for (int n = 0; n < antennas; ++n) ch.coefficients(u, n) = rng.cnormal(1.0);
  return ch;
}

// SNR convention: unit-energy spreading columns, unit-variance channels and
// unit-modulus symbols make the received per-device per-antenna symbol energy
// equal to 1, so SNR = 1 / sigma_w^2 with sigma_w^2 the per-chip complex
// noise variance.
inline double snr_to_noise_variance(double snr_db) {
  return std::pow(10.0, -snr_db / 10.0);
}

// Two consecutive received matrices plus the ground truth that produced them.
struct ReceivedPair {
  CMatrix y_prev;  // L x N, symbol interval t-1
  CMatrix y_curr;  // L x N, symbol interval t
  double noise_variance = 0.0;

  // truth for scoring
  ActivityPattern activity;
  ChannelRealization channel;
  std::vector<int> symbol_prev;  // per-device constellation index at t-1
  std::vector<int> symbol_curr;  // per-device constellation index at t
  std::vector<int> data_index;   // per-device ratio index psi^(t)
};

// Y^(tau) = P * X^(tau) + W^(tau) with X^(tau) column n = H_n * sbar^(tau)
// and sbar_u^(tau) = A_u * s_{u,tau}. The channel is shared by both slots.
inline ReceivedPair synthesize_pair(const SpreadingMatrix& spreading,
                                    const ChannelRealization& channel,
                                    const ActivityPattern& activity,
                                    const std::vector<SymbolFrame>& frames, int slot,
                                    const DpskAlphabet& alphabet, double noise_variance,
                                    TrialRng& rng) {
  const int chips = spreading.chips();
  const int devices = spreading.devices();
  const int antennas = channel.antennas();
  if (channel.devices() != devices || activity.devices() != devices ||
      static_cast<int>(frames.size()) != devices)
    throw std::invalid_argument("synthesize_pair: dimension mismatch");
  if (slot < 1)
    throw std::invalid_argument("synthesize_pair: need slot >= 1 for a (t-1, t) pair");
  for (int u : activity.active_set)
    if (frames[u].frame_length() <= slot)
      throw std::invalid_argument("synthesize_pair: frame too short for requested slot");

  ReceivedPair pair;
  pair.noise_variance = noise_variance;
  pair.activity = activity;
  pair.channel = channel;
  pair.symbol_prev.assign(devices, 0);
  pair.symbol_curr.assign(devices, 0);
  pair.data_index.assign(devices, 0);

  CMatrix x_prev = CMatrix::Zero(devices, antennas);
  CMatrix x_curr = CMatrix::Zero(devices, antennas);
  for (int u = 0; u < devices; ++u) {
    if (frames[u].frame_length() > slot) {
      pair.symbol_prev[u] = frames[u].encoded_indices[slot - 1];
      pair.symbol_curr[u] = frames[u].encoded_indices[slot];
      pair.data_index[u] = frames[u].data_indices[slot - 1];
    }
    if (!activity.indicator[u]) continue;
    const auto s_prev = alphabet.point(pair.symbol_prev[u]);
    const auto s_curr = alphabet.point(pair.symbol_curr[u]);
    x_prev.row(u) = channel.coefficients.row(u) * s_prev;
    x_curr.row(u) = channel.coefficients.row(u) * s_curr;
  }

  pair.y_prev = spreading.entries * x_prev;
  pair.y_curr = spreading.entries * x_curr;
  for (int n = 0; n < antennas; ++n)
    for (int l = 0; l < chips; ++l) pair.y_prev(l, n) += rng.cnormal(noise_variance);
  for (int n = 0; n < antennas; ++n)
    for (int l = 0; l < chips; ++l) pair.y_curr(l, n) += rng.cnormal(noise_variance);
  return pair;
}

}  // namespace gfnoma

#endif  // GFNOMA_CHANNEL_HPP
