#include <Eigen/Cholesky>
#include <cmath>

#include "smmimo/detect.hpp"
#include "smmimo/errors.hpp"

namespace smmimo {
namespace {

// Residual for reporting; not tallied (diagnostic, not detection work).
double dense_residual(const VectorXcd& y, const MatrixXcd& H, const SmSignalSet& set,
                      const TransmitVector& x) {
  VectorXcd r = y;
  for (int k = 0; k < static_cast<int>(x.size()); ++k)
    r -= set.symbol(x[k]) * H.col(k * set.n_t + set.antenna(x[k]));
  return r.squaredNorm();
}

}  // namespace

DetectionResult mmse_detect(const VectorXcd& y, const MatrixXcd& H, double noise_variance,
                            const SmSignalSet& set) {
  const int N = static_cast<int>(y.size());
  const int n_t = set.n_t;
  if (H.rows() != N) throw ContractViolation("y length does not match channel rows");
  if (H.cols() % n_t != 0) throw ContractViolation("channel columns not a multiple of n_t");
  const int K = static_cast<int>(H.cols()) / n_t;
  const int M = set.size();
  if (noise_variance < 0) throw ContractViolation("noise variance must be >= 0");

  OpCounter ops;
  const double es = set.alphabet.average_energy;
  DetectionResult res;

  // Filter in the N x N form: u = (H H^H + c I)^-1 y, x_tilde = H^H u.
  double c = noise_variance / es;
  const double floor = 1e-12 * K;
  if (c < floor) {
    c = floor;  // zero-forcing limit: keep the solve well-posed
    res.diag.regularized = true;
  }

  MatrixXcd A = MatrixXcd::Zero(N, N);
  A.selfadjointView<Eigen::Lower>().rankUpdate(H);
  ops.add_cmac(static_cast<std::uint64_t>(N) * (N + 1) / 2 * H.cols());  // symmetric Gram
  A.diagonal().array() += c;
  ops.add(N);

  Eigen::LLT<MatrixXcd> llt(A);
  ops.add_cmac(static_cast<std::uint64_t>(N) * N * N / 3);  // Cholesky
  if (llt.info() != Eigen::Success)
    throw NumericalError("MMSE filter factorization failed (singular normal matrix)");

  const VectorXcd u = llt.solve(y);
  ops.add_cmac(static_cast<std::uint64_t>(N) * N);  // two triangular solves
  const VectorXcd x_tilde = H.adjoint() * u;
  ops.add_cmac(static_cast<std::uint64_t>(H.cols()) * N);

  // Per user: nearest signal-set element for the n_t-long sub-vector.
  // ||sub - s_vec||^2 = ||sub||^2 - |sub_a|^2 + |sub_a - sym|^2; the common
  // ||sub||^2 term cancels in the argmin.
  res.x_hat.resize(K);
  std::vector<double> mag2(n_t);
  for (int k = 0; k < K; ++k) {
    for (int a = 0; a < n_t; ++a) mag2[a] = std::norm(x_tilde(k * n_t + a));
    double best = std::numeric_limits<double>::infinity();
    int best_s = 0;
    for (int s = 0; s < M; ++s) {
      const int a = set.antenna(s);
      const double score = std::norm(x_tilde(k * n_t + a) - set.symbol(s)) - mag2[a];
      if (score < best) {
        best = score;
        best_s = s;
      }
    }
    res.x_hat[k] = best_s;
  }
  ops.add(static_cast<std::uint64_t>(K) * (3 * n_t + 6 * M));

  res.ml_cost = dense_residual(y, H, set, res.x_hat);
  res.diag.flops = ops.flops;
  return res;
}

}  // namespace smmimo
