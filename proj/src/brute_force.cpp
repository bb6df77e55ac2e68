#include <cmath>
#include <limits>

#include "smmimo/detect.hpp"
#include "smmimo/errors.hpp"

namespace smmimo {

DetectionResult ml_brute_force(const VectorXcd& y, const MatrixXcd& H, const SmSignalSet& set,
                               std::uint64_t max_candidates) {
  const int N = static_cast<int>(y.size());
  const int n_t = set.n_t;
  if (H.rows() != N) throw ContractViolation("y length does not match channel rows");
  if (H.cols() % n_t != 0) throw ContractViolation("channel columns not a multiple of n_t");
  const int K = static_cast<int>(H.cols()) / n_t;
  const int M = set.size();

  // |S|^K candidates, overflow-safe.
  std::uint64_t count = 1;
  for (int k = 0; k < K; ++k) {
    if (count > max_candidates / M)
      throw ContractViolation("brute-force search space |S|^K = " + std::to_string(M) + "^" +
                              std::to_string(K) + " exceeds the cap of " +
                              std::to_string(max_candidates) + " candidates");
    count *= M;
  }

  OpCounter ops;
  // Scaled per-(user, entry) column contributions, as in the local-search cache.
  MatrixXcd contrib(N, K * M);
  for (int k = 0; k < K; ++k)
    for (int s = 0; s < M; ++s)
      contrib.col(k * M + s) = set.symbol(s) * H.col(k * n_t + set.antenna(s));
  ops.add(6ull * N * K * M);

  // Depth-first over users with per-level partial residuals; lexicographic
  // order (user 0 outermost), strict < keeps the first minimum on ties.
  MatrixXcd partial(N, K + 1);
  partial.col(0) = y;
  TransmitVector idx(K, 0), best_idx(K, 0);
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t subs = 0, leaves = 0;

  int level = 0;
  idx[0] = -1;  // pre-increment form
  while (level >= 0) {
    if (++idx[level] >= M) {
      --level;
      continue;
    }
    partial.col(level + 1) = partial.col(level) - contrib.col(level * M + idx[level]);
    ++subs;
    if (level + 1 == K) {
      const double cost = partial.col(K).squaredNorm();
      ++leaves;
      if (cost < best) {
        best = cost;
        best_idx = idx;
      }
    } else {
      ++level;
      idx[level] = -1;
    }
  }
  ops.add(subs * 2ull * N + leaves * 4ull * N);

  DetectionResult res;
  res.x_hat = best_idx;
  res.ml_cost = best;
  res.diag.flops = ops.flops;
  res.diag.nodes_visited = leaves;
  return res;
}

}  // namespace smmimo
