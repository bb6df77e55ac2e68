#include "smmimo/channel.hpp"

#include <cmath>
#include <numeric>

#include "smmimo/errors.hpp"

namespace smmimo {

void SystemConfig::validate() const {
  if (K < 1) throw ConfigError("K must be >= 1, got " + std::to_string(K));
  if (N < 1) throw ConfigError("N must be >= 1, got " + std::to_string(N));
  if (set.n_t < 1) throw ConfigError("signal set has n_t < 1");
  if (!power_profile.empty()) {
    if (static_cast<int>(power_profile.size()) != K)
      throw ConfigError("power_profile has " + std::to_string(power_profile.size()) +
                        " entries, expected K = " + std::to_string(K));
    for (double p : power_profile)
      if (!(p > 0)) throw ConfigError("power_profile entries must be positive");
    const double sum = std::accumulate(power_profile.begin(), power_profile.end(), 0.0);
    if (std::abs(sum - K) > 1e-12 * K)
      throw ConfigError("power_profile must sum to K (sum of sigma_k^2 = K); got sum = " +
                        std::to_string(sum));
  }
}

MatrixXcd generate_channel(const SystemConfig& config, std::mt19937_64& rng) {
  config.validate();
  const int n_t = config.set.n_t;
  MatrixXcd H(config.N, config.K * n_t);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < config.K; ++k) {
    const double dev = std::sqrt(config.user_power(k) / 2.0);  // per real dimension
    for (int j = 0; j < n_t; ++j)
      for (int i = 0; i < config.N; ++i)
        H(i, k * n_t + j) = cplx(dev * gauss(rng), dev * gauss(rng));
  }
  return H;
}

VectorXcd densify(const TransmitVector& x, const SmSignalSet& set) {
  const int K = static_cast<int>(x.size());
  VectorXcd v = VectorXcd::Zero(K * set.n_t);
  for (int k = 0; k < K; ++k) {
    if (x[k] < 0 || x[k] >= set.size())
      throw ContractViolation("transmit entry out of signal-set range");
    v(k * set.n_t + set.antenna(x[k])) = set.symbol(x[k]);
  }
  return v;
}

VectorXcd transmit(const TransmitVector& x, const SmSignalSet& set, const MatrixXcd& H,
                   double noise_variance, std::mt19937_64& rng, double* signal_power_out) {
  const int K = static_cast<int>(x.size());
  const int N = static_cast<int>(H.rows());
  if (H.cols() != static_cast<Eigen::Index>(K) * set.n_t)
    throw ContractViolation("channel matrix has " + std::to_string(H.cols()) +
                            " columns, expected K*n_t = " + std::to_string(K * set.n_t));
  if (noise_variance < 0) throw ContractViolation("noise variance must be >= 0");

  VectorXcd y = VectorXcd::Zero(N);
  for (int k = 0; k < K; ++k) {
    const int col = k * set.n_t + set.antenna(x[k]);
    y += set.symbol(x[k]) * H.col(col);  // one MAC per receive antenna per user
  }
  if (signal_power_out) *signal_power_out = y.squaredNorm();

  if (noise_variance > 0) {
    const double dev = std::sqrt(noise_variance / 2.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < N; ++i) y(i) += cplx(dev * gauss(rng), dev * gauss(rng));
  }
  return y;
}

double snr_to_noise_variance(double snr_db, const SystemConfig& config) {
  return config.K * config.set.alphabet.average_energy / std::pow(10.0, snr_db / 10.0);
}

}  // namespace smmimo
