#ifndef GFNOMA_SPREADING_HPP
#define GFNOMA_SPREADING_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gfnoma {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// One (root, cyclic shift) pair per device column.
using SpreadingPlan = std::vector<std::pair<int, int>>;

// Unit-energy constant-modulus code matrix, one column per device.
struct SpreadingMatrix {
  CMatrix entries;     // L x U
  SpreadingPlan plan;  // size U

  int chips() const { return static_cast<int>(entries.rows()); }
  int devices() const { return static_cast<int>(entries.cols()); }

  CVector column(int u) const { return entries.col(u); }
};

// Odd-length Zadoff-Chu sequence, cyclically shifted and scaled to unit
// energy: element n is exp(-i*pi*root*n*(n+1)/length) / sqrt(length),
// read at position (n + shift) mod length.
inline CVector zc_sequence(int root, int shift, int length) {
  if (length <= 0 || length % 2 == 0)
    throw std::invalid_argument("zc_sequence: length must be odd and positive");
  if (std::gcd(root, length) != 1)
    throw std::invalid_argument("zc_sequence: root must be coprime with length");
  if (shift < 0 || shift >= length)
    throw std::invalid_argument("zc_sequence: shift out of [0, length)");

  CVector seq(length);
  const double scale = 1.0 / std::sqrt(static_cast<double>(length));
  for (int n = 0; n < length; ++n) {
    const long long m = (n + shift) % length;
    // reduce the quadratic phase index mod 2*length before multiplying by pi
    const long long idx = (m * (m + 1)) % (2LL * length) * root % (2LL * length);
    const double phase = -M_PI * static_cast<double>(idx) / length;
    seq[n] = scale * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return seq;
}

// Deterministic plan enumeration: roots coprime with L in increasing order,
// shifts in increasing order, root-major.
inline SpreadingPlan default_spreading_plan(int chips, int devices) {
  SpreadingPlan plan;
  plan.reserve(devices);
  if (chips == 1) {
    plan.emplace_back(1, 0);  // the only length-1 sequence is the scalar 1
    return plan;
  }
  for (int root = 1; root < chips && static_cast<int>(plan.size()) < devices; ++root) {
    if (std::gcd(root, chips) != 1) continue;
    for (int shift = 0; shift < chips && static_cast<int>(plan.size()) < devices; ++shift)
      plan.emplace_back(root, shift);
  }
  return plan;
}

inline SpreadingMatrix build_spreading_matrix(int chips, int devices,
                                              const SpreadingPlan* plan = nullptr) {
  if (devices < 1) throw std::invalid_argument("build_spreading_matrix: need U >= 1");
  SpreadingPlan chosen = plan ? *plan : default_spreading_plan(chips, devices);
  if (static_cast<int>(chosen.size()) < devices)
    throw std::invalid_argument(
        "build_spreading_matrix: not enough distinct (root, shift) pairs for U devices");
  chosen.resize(devices);
  for (size_t a = 0; a < chosen.size(); ++a)
    for (size_t b = a + 1; b < chosen.size(); ++b)
      if (chosen[a] == chosen[b])
        throw std::invalid_argument("build_spreading_matrix: duplicate (root, shift) pair");

  SpreadingMatrix mat;
  mat.entries.resize(chips, devices);
  for (int u = 0; u < devices; ++u)
    mat.entries.col(u) = zc_sequence(chosen[u].first, chosen[u].second, chips);
  mat.plan = std::move(chosen);
  return mat;
}

// Column restriction of P to an index set (the detected or true support).
inline CMatrix restrict_columns(const CMatrix& p, const std::vector<int>& indices) {
  CMatrix out(p.rows(), static_cast<Eigen::Index>(indices.size()));
  for (size_t i = 0; i < indices.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = p.col(indices[i]);
  return out;
}

}  // namespace gfnoma

#endif  // GFNOMA_SPREADING_HPP
