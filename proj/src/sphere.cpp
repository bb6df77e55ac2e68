#include <Eigen/QR>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "smmimo/detect.hpp"
#include "smmimo/errors.hpp"

namespace smmimo {
namespace {

constexpr int kMaxLevels = 8;  // per-axis amplitude levels (up to 64-QAM)

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(),
                      [](double a, double b) { return std::abs(a - b) < 1e-9; }),
          v.end());
  return v;
}

double dense_residual(const VectorXcd& y, const MatrixXcd& H, const TransmitVector& x,
                      const Alphabet& alphabet) {
  VectorXcd r = y;
  for (int k = 0; k < static_cast<int>(x.size()); ++k) r -= alphabet.points[x[k]] * H.col(k);
  return r.squaredNorm();
}

}  // namespace

DetectionResult sphere_decode(const VectorXcd& y, const MatrixXcd& H, const Alphabet& alphabet,
                              std::uint64_t bf_cap) {
  const int N = static_cast<int>(y.size());
  const int K = static_cast<int>(H.cols());
  if (H.rows() != N) throw ContractViolation("y length does not match channel rows");
  if (N < K) throw ContractViolation("sphere decoder requires N >= K");

  // Rectangular constellations split into independent I and Q level sets.
  std::vector<double> re_levels, im_levels;
  {
    std::vector<double> re, im;
    for (const cplx& p : alphabet.points) {
      re.push_back(p.real());
      im.push_back(p.imag());
    }
    re_levels = unique_sorted(re);
    im_levels = unique_sorted(im);
  }
  if (static_cast<int>(re_levels.size() * im_levels.size()) != alphabet.size())
    throw ContractViolation("alphabet is not I/Q-separable; sphere decoder unsupported");
  if (static_cast<int>(std::max(re_levels.size(), im_levels.size())) > kMaxLevels)
    throw ContractViolation("alphabet has too many amplitude levels");

  OpCounter ops;
  const int m = 2 * N, n = 2 * K;

  // Real-valued decomposition: dimensions 0..K-1 carry the real parts,
  // K..2K-1 the imaginary parts.
  Eigen::MatrixXd Hr(m, n);
  Hr.topLeftCorner(N, K) = H.real();
  Hr.topRightCorner(N, K) = -H.imag();
  Hr.bottomLeftCorner(N, K) = H.imag();
  Hr.bottomRightCorner(N, K) = H.real();
  Eigen::VectorXd yr(m);
  yr.head(N) = y.real();
  yr.tail(N) = y.imag();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Hr);
  Eigen::MatrixXd R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  Eigen::VectorXd yq = (qr.householderQ().adjoint() * yr).head(n);
  // Householder R: ~2mn^2 - (2/3)n^3 flops; applying Q^T to y: ~4mn - 2n^2.
  ops.add(2ull * m * n * n - 2ull * n * n * n / 3 + 4ull * m * n - 2ull * n * n);

  double diag_max = 0;
  for (int d = 0; d < n; ++d) diag_max = std::max(diag_max, std::abs(R(d, d)));
  for (int d = 0; d < n; ++d) {
    if (std::abs(R(d, d)) <= 1e-10 * diag_max) {
      // Numerically rank-deficient: exact search still possible at desk scale.
      auto res = ml_brute_force(y, H, build_sm_signal_set(1, alphabet), bf_cap);
      res.diag.flops += ops.flops;
      return res;
    }
    if (R(d, d) < 0) {  // normalize diagonal signs
      R.row(d) *= -1.0;
      yq(d) *= -1.0;
    }
  }

  // Depth-first enumeration from dimension n-1 down, candidates at each level
  // ordered by distance so the first full descent is the Babai point and the
  // radius shrinks as leaves are found.
  std::vector<const std::vector<double>*> levels(n);
  for (int d = 0; d < n; ++d) levels[d] = d < K ? &re_levels : &im_levels;

  std::vector<double> chosen(n, 0.0);       // level value per dimension
  std::vector<double> cost_above(n + 1, 0); // accumulated cost from levels > d
  std::vector<int> pick(n, 0);              // next candidate rank to try
  std::vector<std::array<double, kMaxLevels>> cand_cost(n);
  std::vector<std::array<int, kMaxLevels>> cand_order(n);
  std::vector<double> b(n, 0.0);

  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_vals(n, 0.0);
  std::uint64_t nodes = 0;

  int d = n - 1;
  bool entering = true;
  while (d < n) {
    if (entering) {
      // Partial target for this level given all choices above it.
      double acc = yq(d);
      for (int e = d + 1; e < n; ++e) acc -= R(d, e) * chosen[e];
      b[d] = acc;
      ops.add(2ull * (n - 1 - d));
      const auto& lv = *levels[d];
      const int L = static_cast<int>(lv.size());
      for (int c = 0; c < L; ++c) {
        const double r = acc - R(d, d) * lv[c];
        cand_cost[d][c] = r * r;
        cand_order[d][c] = c;
      }
      ops.add(3ull * lv.size());
      std::sort(cand_order[d].begin(), cand_order[d].begin() + L,
                [&](int a, int c) { return cand_cost[d][a] < cand_cost[d][c]; });
      pick[d] = 0;
      ++nodes;
    }
    entering = false;

    const auto& lv = *levels[d];
    const int L = static_cast<int>(lv.size());
    bool descended = false;
    while (pick[d] < L) {
      const int c = cand_order[d][pick[d]++];
      const double cost = cost_above[d + 1] + cand_cost[d][c];
      ops.add(1);
      if (cost >= best) {
        pick[d] = L;  // candidates are sorted: nothing further can qualify
        break;
      }
      chosen[d] = lv[c];
      if (d == 0) {
        best = cost;  // strictly smaller than the previous best
        best_vals = chosen;
      } else {
        cost_above[d] = cost;
        --d;
        entering = true;
        descended = true;
        break;
      }
    }
    if (!descended && !entering) ++d;  // exhausted this level, backtrack
  }

  // Map the real solution back to alphabet indices (exact level match).
  DetectionResult res;
  res.x_hat.resize(K);
  for (int k = 0; k < K; ++k) {
    const cplx target(best_vals[k], best_vals[K + k]);
    int found = -1;
    for (int s = 0; s < alphabet.size(); ++s)
      if (std::abs(alphabet.points[s] - target) < 1e-9) {
        found = s;
        break;
      }
    if (found < 0) throw NumericalError("sphere solution does not map to an alphabet point");
    res.x_hat[k] = found;
  }
  res.ml_cost = dense_residual(y, H, res.x_hat, alphabet);
  res.diag.flops = ops.flops;
  res.diag.nodes_visited = nodes;
  return res;
}

}  // namespace smmimo
