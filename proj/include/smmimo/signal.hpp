#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace smmimo {

using cplx = std::complex<double>;

/// A QAM/PSK symbol alphabet on the unnormalized integer grid.
/// Point order equals bit-label order: points[label] is the symbol whose
/// Gray-coded bit pattern is `label`, so a symbol's index doubles as its bits.
struct Alphabet {
  std::vector<cplx> points;
  int bits_per_symbol = 0;     // log2(points.size()), exact
  double average_energy = 0;   // E_s = mean |s|^2
  std::string name;            // e.g. "4-QAM", "BPSK"

  int size() const { return static_cast<int>(points.size()); }
};

/// Gray-mapped alphabet for order in {2, 4, 8, 16, 64}.
/// 4-QAM enumerates as {+1+j, +1-j, -1+j, -1-j}; BPSK as {+1, -1};
/// 16-/64-QAM are square grids on {±1,±3,...}; 8-QAM is rectangular,
/// I in {±1,±3} x Q in {±1}. Throws ConfigError on unsupported order.
Alphabet qam_alphabet(int order);

/// Per-user spatial-modulation signal set: all length-n_t vectors with exactly
/// one nonzero entry drawn from the alphabet. Vector i activates antenna
/// i / |A| with symbol i % |A| (antenna-major enumeration), so for n_t = 1 the
/// set degenerates to the alphabet itself.
struct SmSignalSet {
  int n_t = 1;
  Alphabet alphabet;
  int index_bits = 0;    // floor(log2 n_t): bits carried by the antenna choice
  int bits_per_use = 0;  // index_bits + alphabet.bits_per_symbol

  int size() const { return n_t * alphabet.size(); }
  int antenna(int idx) const { return idx / alphabet.size(); }
  int symbol_index(int idx) const { return idx % alphabet.size(); }
  cplx symbol(int idx) const { return alphabet.points[symbol_index(idx)]; }
  /// Materialize vector idx as a dense length-n_t column.
  std::vector<cplx> dense(int idx) const;
};

SmSignalSet build_sm_signal_set(int n_t, const Alphabet& alphabet);

/// One transmit vector for a K-user frame: per user, the index of the chosen
/// signal-set element (antenna-major). Antenna/symbol split recoverable via
/// SmSignalSet::antenna / symbol_index.
using TransmitVector = std::vector<int>;

/// Bits are carried MSB-first in a word of set.bits_per_use bits: the leading
/// index_bits select the antenna in natural binary, the trailing
/// bits_per_symbol select the symbol via the alphabet's Gray labels.
int map_bits(std::uint32_t word, const SmSignalSet& set);

/// Exact inverse of map_bits. Throws ContractViolation if the vector's antenna
/// is outside the bit-addressable range (possible when n_t is not a power of
/// two: those vectors exist in the set but carry no bit pattern).
std::uint32_t demap(int vector_index, const SmSignalSet& set);

inline int hamming_distance(std::uint32_t a, std::uint32_t b) {
  return __builtin_popcount(a ^ b);
}

}  // namespace smmimo
