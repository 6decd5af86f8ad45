#ifndef GFNOMA_DPSK_HPP
#define GFNOMA_DPSK_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace gfnoma {

// M-ary DPSK constellation with Gray bit labeling. Point q sits at
// exp(i*2*pi*q/M) and carries the Gray code of q, so neighbouring points
// differ in one bit. Data symbols are drawn from the same set as the
// transmitted symbols; ratios of constellation points stay inside the set,
// which keeps differential encoding closed under index arithmetic.
class DpskAlphabet {
 public:
  explicit DpskAlphabet(int order) : order_(order) {
    if (order < 2 || (order & (order - 1)) != 0)
      throw std::invalid_argument("DpskAlphabet: order must be a power of two >= 2");
    bits_per_symbol_ = 0;
    for (int m = order; m > 1; m >>= 1) ++bits_per_symbol_;
    points_.resize(order);
    index_of_word_.resize(order);
    for (int q = 0; q < order; ++q) {
      const double phase = 2.0 * M_PI * q / order;
      points_[q] = {std::cos(phase), std::sin(phase)};
      index_of_word_[gray_code(q)] = q;
    }
  }

  int order() const { return order_; }
  int bits_per_symbol() const { return bits_per_symbol_; }
  std::complex<double> point(int index) const { return points_[index]; }
  const std::vector<std::complex<double>>& points() const { return points_; }

  // Gray label of constellation index q.
  static int gray_code(int q) { return q ^ (q >> 1); }

  int index_for_word(int word) const { return index_of_word_[word]; }
  int word_for_index(int index) const { return gray_code(index); }

  // Nearest constellation index by Euclidean distance; ties go to the
  // lowest index.
  int nearest_index(std::complex<double> x) const {
    int best = 0;
    double best_d2 = std::norm(x - points_[0]);
    for (int q = 1; q < order_; ++q) {
      const double d2 = std::norm(x - points_[q]);
      if (d2 < best_d2 - 1e-15) {
        best = q;
        best_d2 = d2;
      }
    }
    return best;
  }

 private:
  int order_;
  int bits_per_symbol_;
  std::vector<std::complex<double>> points_;
  std::vector<int> index_of_word_;
};

// Bit chunks are read MSB-first: bits (b0 b1) with M=4 form the word
// 2*b0 + b1.
inline std::vector<int> dpsk_map_bits(const std::vector<int>& bits,
                                      const DpskAlphabet& alphabet) {
  const int bps = alphabet.bits_per_symbol();
  if (bits.size() % bps != 0)
    throw std::invalid_argument("dpsk_map_bits: bit count not divisible by log2(M)");
  std::vector<int> symbols;
  symbols.reserve(bits.size() / bps);
  for (size_t i = 0; i < bits.size(); i += bps) {
    int word = 0;
    for (int b = 0; b < bps; ++b) {
      const int bit = bits[i + b];
      if (bit != 0 && bit != 1) throw std::invalid_argument("dpsk_map_bits: bits must be 0/1");
      word = (word << 1) | bit;
    }
    symbols.push_back(alphabet.index_for_word(word));
  }
  return symbols;
}

inline std::vector<int> dpsk_bits_for_indices(const std::vector<int>& symbol_indices,
                                              const DpskAlphabet& alphabet) {
  const int bps = alphabet.bits_per_symbol();
  std::vector<int> bits;
  bits.reserve(symbol_indices.size() * bps);
  for (int q : symbol_indices) {
    const int word = alphabet.word_for_index(q);
    for (int b = bps - 1; b >= 0; --b) bits.push_back((word >> b) & 1);
  }
  return bits;
}

// Inverse of dpsk_map_bits. Off-constellation inputs snap to the nearest
// point rather than failing, so hard-decision scoring never aborts.
inline std::vector<int> dpsk_hard_demap(const std::vector<std::complex<double>>& symbols,
                                        const DpskAlphabet& alphabet) {
  std::vector<int> indices;
  indices.reserve(symbols.size());
  for (const auto& s : symbols) indices.push_back(alphabet.nearest_index(s));
  return dpsk_bits_for_indices(indices, alphabet);
}

// Data symbols and differentially encoded transmit symbols of one device,
// kept as constellation indices so that s_t = psi_t * s_{t-1} holds exactly.
struct SymbolFrame {
  std::vector<int> data_indices;     // length T-1, over the demodulation set
  std::vector<int> encoded_indices;  // length T, starts at the reference

  int frame_length() const { return static_cast<int>(encoded_indices.size()); }
};

inline SymbolFrame differential_encode(const std::vector<int>& data_indices,
                                       int reference_index, const DpskAlphabet& alphabet) {
  SymbolFrame frame;
  frame.data_indices = data_indices;
  frame.encoded_indices.reserve(data_indices.size() + 1);
  int current = reference_index;
  frame.encoded_indices.push_back(current);
  for (int psi : data_indices) {
    current = (current + psi) % alphabet.order();
    frame.encoded_indices.push_back(current);
  }
  return frame;
}

// Ratio s_t / s_{t-1} as a constellation index difference.
inline std::vector<int> differential_decode_indices(const std::vector<int>& encoded_indices,
                                                    const DpskAlphabet& alphabet) {
  std::vector<int> data;
  if (encoded_indices.size() < 2) return data;
  data.reserve(encoded_indices.size() - 1);
  for (size_t t = 1; t < encoded_indices.size(); ++t) {
    int diff = encoded_indices[t] - encoded_indices[t - 1];
    diff %= alphabet.order();
    if (diff < 0) diff += alphabet.order();
    data.push_back(diff);
  }
  return data;
}

}  // namespace gfnoma

#endif  // GFNOMA_DPSK_HPP
