#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "smmimo/signal.hpp"

namespace smmimo {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

/// Uplink system: K single-RF-chain users with n_t antennas each, N receive
/// antennas at the base station. power_profile holds the per-user channel
/// variances sigma_k^2 (sum = K; all ones = perfect power control).
struct SystemConfig {
  int K = 1;
  int N = 1;
  SmSignalSet set;
  std::vector<double> power_profile;  // empty = all ones

  double alpha() const { return static_cast<double>(K) / N; }
  int bits_per_use() const { return set.bits_per_use; }
  /// Throws ConfigError on violated invariants (K/N >= 1, profile sum = K).
  void validate() const;
  double user_power(int k) const { return power_profile.empty() ? 1.0 : power_profile[k]; }
};

/// N x (K*n_t) matrix of i.i.d. circularly symmetric complex Gaussian gains;
/// user k's columns have per-entry variance sigma_k^2. Column (k*n_t + j) is
/// user k's antenna j.
MatrixXcd generate_channel(const SystemConfig& config, std::mt19937_64& rng);

/// Dense transmit vector with exactly K nonzeros from the per-user choices.
VectorXcd densify(const TransmitVector& x, const SmSignalSet& set);

/// y = Hx + n with n ~ CN(0, sigma^2 I), accumulated sparsely: exactly K
/// multiply-accumulates per receive antenna. If signal_power_out is non-null
/// it receives ||Hx||^2 (the noiseless power, for SNR accounting).
VectorXcd transmit(const TransmitVector& x, const SmSignalSet& set, const MatrixXcd& H,
                   double noise_variance, std::mt19937_64& rng,
                   double* signal_power_out = nullptr);

/// SNR convention used throughout: per-receive-antenna average received SNR
/// under perfect power control, E[|sum_k h_ik x_k|^2] = K*E_s, so
/// sigma^2 = K * E_s / 10^(snr_db/10).
double snr_to_noise_variance(double snr_db, const SystemConfig& config);

}  // namespace smmimo
