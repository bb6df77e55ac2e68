#include "smmimo/signal.hpp"

#include <cmath>

#include "smmimo/errors.hpp"

namespace smmimo {
namespace {

// Position of a binary-reflected Gray label within the Gray sequence.
std::uint32_t gray_to_binary(std::uint32_t g) {
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) g ^= g >> shift;
  return g;
}

// PAM level for an n-bit Gray label: the Gray sequence walks the levels
// +(2^n - 1), +(2^n - 3), ..., -(2^n - 1) so adjacent levels differ in one bit.
double pam_level(std::uint32_t label, int bits) {
  const double top = static_cast<double>((1u << bits) - 1);
  return top - 2.0 * static_cast<double>(gray_to_binary(label));
}

Alphabet make_grid(int i_bits, int q_bits, std::string name) {
  Alphabet a;
  a.bits_per_symbol = i_bits + q_bits;
  a.name = std::move(name);
  const int n = 1 << a.bits_per_symbol;
  a.points.reserve(n);
  double energy = 0;
  for (int label = 0; label < n; ++label) {
    const std::uint32_t i_label = static_cast<std::uint32_t>(label) >> q_bits;
    const std::uint32_t q_label = static_cast<std::uint32_t>(label) & ((1u << q_bits) - 1u);
    const double i = pam_level(i_label, i_bits);
    const double q = q_bits > 0 ? pam_level(q_label, q_bits) : 0.0;
    a.points.emplace_back(i, q);
    energy += i * i + q * q;
  }
  a.average_energy = energy / n;
  return a;
}

}  // namespace

Alphabet qam_alphabet(int order) {
  switch (order) {
    case 2:
      return make_grid(1, 0, "BPSK");
    case 4:
      return make_grid(1, 1, "4-QAM");
    case 8:
      return make_grid(2, 1, "8-QAM");
    case 16:
      return make_grid(2, 2, "16-QAM");
    case 64:
      return make_grid(3, 3, "64-QAM");
    default:
      throw ConfigError("unsupported modulation order " + std::to_string(order) +
                        " (supported: 2, 4, 8, 16, 64)");
  }
}

std::vector<cplx> SmSignalSet::dense(int idx) const {
  std::vector<cplx> v(static_cast<std::size_t>(n_t), cplx{0.0, 0.0});
  v[static_cast<std::size_t>(antenna(idx))] = symbol(idx);
  return v;
}

SmSignalSet build_sm_signal_set(int n_t, const Alphabet& alphabet) {
  if (n_t < 1) throw ConfigError("n_t must be >= 1, got " + std::to_string(n_t));
  SmSignalSet set;
  set.n_t = n_t;
  set.alphabet = alphabet;
  set.index_bits = 0;
  while ((2 << set.index_bits) <= n_t) ++set.index_bits;  // floor(log2 n_t)
  set.bits_per_use = set.index_bits + alphabet.bits_per_symbol;
  return set;
}

int map_bits(std::uint32_t word, const SmSignalSet& set) {
  if (word >> set.bits_per_use)
    throw ContractViolation("bit word exceeds bits_per_use = " + std::to_string(set.bits_per_use));
  const std::uint32_t antenna = word >> set.alphabet.bits_per_symbol;
  const std::uint32_t symbol = word & ((1u << set.alphabet.bits_per_symbol) - 1u);
  return static_cast<int>(antenna) * set.alphabet.size() + static_cast<int>(symbol);
}

std::uint32_t demap(int vector_index, const SmSignalSet& set) {
  if (vector_index < 0 || vector_index >= set.size())
    throw ContractViolation("signal-set index out of range: " + std::to_string(vector_index));
  const int antenna = set.antenna(vector_index);
  if (antenna >= (1 << set.index_bits))
    throw ContractViolation("vector " + std::to_string(vector_index) +
                            " uses antenna " + std::to_string(antenna + 1) +
                            ", outside the bit-addressable range");
  return (static_cast<std::uint32_t>(antenna) << set.alphabet.bits_per_symbol) |
         static_cast<std::uint32_t>(set.symbol_index(vector_index));
}

}  // namespace smmimo
