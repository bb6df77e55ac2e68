#pragma once

#include <cstdint>

namespace smmimo {

/// Arithmetic-work tally for detector complexity reports.
///
/// Detectors add REAL floating-point operations (add/sub/mul/div each 1;
/// exp/log/sqrt counted as 1) using closed-form counts at kernel boundaries —
/// e.g. a complex matrix-vector product of size m x n adds 8*m*n. Reports
/// divide by 8 so the published unit is one complex multiply-accumulate
/// (4 real multiplies + 4 real adds).
struct OpCounter {
  std::uint64_t flops = 0;

  void add(std::uint64_t real_ops) { flops += real_ops; }
  /// n complex multiply-accumulates.
  void add_cmac(std::uint64_t n) { flops += 8 * n; }
  double units() const { return static_cast<double>(flops) / 8.0; }
};

}  // namespace smmimo
