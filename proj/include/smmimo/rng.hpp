#pragma once

#include <cstdint>
#include <random>

namespace smmimo {

/// Independent random streams per (trial, purpose) so that Monte Carlo trials
/// are reproducible under any execution order or worker count.
enum class Stream : std::uint32_t { channel = 0, bits = 1, noise = 2, detector = 3 };

inline std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t curve,
                                   std::uint64_t point, std::uint64_t trial, Stream purpose) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
      static_cast<std::uint32_t>(curve),       static_cast<std::uint32_t>(point),
      static_cast<std::uint32_t>(trial),       static_cast<std::uint32_t>(trial >> 32),
      static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

}  // namespace smmimo
