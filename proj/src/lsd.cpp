#include <limits>

#include "smmimo/detect.hpp"
#include "smmimo/errors.hpp"

namespace smmimo {

std::vector<TransmitVector> enumerate_neighbors(const TransmitVector& x, const SmSignalSet& set) {
  const int K = static_cast<int>(x.size());
  const int M = set.size();
  std::vector<TransmitVector> out;
  out.reserve(static_cast<std::size_t>(M - 1) * K);
  for (int k = 0; k < K; ++k) {
    if (x[k] < 0 || x[k] >= M) throw ContractViolation("transmit entry out of signal-set range");
    for (int s = 0; s < M; ++s) {
      if (s == x[k]) continue;
      TransmitVector w = x;
      w[k] = s;
      out.push_back(std::move(w));
    }
  }
  return out;
}

NeighborCostCache::NeighborCostCache(const VectorXcd& y, const MatrixXcd& H,
                                     const SmSignalSet& set, TransmitVector x, OpCounter* ops)
    : y_(y), set_(set), ops_(ops) {
  const int N = static_cast<int>(y.size());
  const int n_t = set.n_t;
  if (H.rows() != N) throw ContractViolation("y length does not match channel rows");
  if (H.cols() % n_t != 0) throw ContractViolation("channel columns not a multiple of n_t");
  const int K = static_cast<int>(H.cols()) / n_t;
  if (static_cast<int>(x.size()) != K) throw ContractViolation("transmit vector has wrong length");
  const int M = set.size();

  contrib_.resize(N, static_cast<Eigen::Index>(K) * M);
  for (int k = 0; k < K; ++k)
    for (int s = 0; s < M; ++s)
      contrib_.col(static_cast<Eigen::Index>(k) * M + s) =
          set.symbol(s) * H.col(k * n_t + set.antenna(s));
  if (ops_) ops_->add(6ull * N * K * M);  // complex scale per element

  reset(std::move(x));
}

void NeighborCostCache::reset(TransmitVector x) {
  const int M = set_.size();
  const int K = static_cast<int>(x.size());
  if (contrib_.cols() != static_cast<Eigen::Index>(K) * M)
    throw ContractViolation("transmit vector has wrong length");
  x_ = std::move(x);
  z_ = y_;
  for (int k = 0; k < K; ++k) z_ -= contrib_.col(static_cast<Eigen::Index>(k) * M + x_[k]);
  cost_ = z_.squaredNorm();
  if (ops_) ops_->add(2ull * K * z_.size() + 4ull * z_.size());
}

double NeighborCostCache::neighbor_cost(int k, int s) const {
  const int M = set_.size();
  const double c = (z_ + contrib_.col(static_cast<Eigen::Index>(k) * M + x_[k]) -
                    contrib_.col(static_cast<Eigen::Index>(k) * M + s))
                       .squaredNorm();
  if (ops_) ops_->add(8ull * z_.size());  // two complex adds + |.|^2 per entry
  return c;
}

void NeighborCostCache::apply(int k, int s) {
  const int M = set_.size();
  z_ += contrib_.col(static_cast<Eigen::Index>(k) * M + x_[k]) -
        contrib_.col(static_cast<Eigen::Index>(k) * M + s);
  x_[k] = s;
  cost_ = z_.squaredNorm();
  if (ops_) ops_->add(8ull * z_.size());
}

DetectionResult lsd_sm_detect(const VectorXcd& y, const MatrixXcd& H, const SmSignalSet& set,
                              const std::vector<TransmitVector>& initials) {
  if (initials.empty()) throw ContractViolation("local search needs at least one initial vector");
  const int M = set.size();

  OpCounter ops;
  DetectionResult res;
  double best_cost = std::numeric_limits<double>::infinity();
  TransmitVector best_x;
  int total_steps = 0;

  NeighborCostCache cache(y, H, set, initials[0], &ops);
  for (std::size_t j = 0; j < initials.size(); ++j) {
    if (j > 0) cache.reset(initials[j]);
    const int K = static_cast<int>(cache.current().size());
    std::vector<double> seq{cache.cost()};
    for (;;) {
      // Best strictly-improving neighbor; enumeration order (user-major,
      // then signal-set index) breaks ties toward the earliest candidate.
      double best_c = cache.cost();
      int move_k = -1, move_s = -1;
      for (int k = 0; k < K; ++k) {
        const int cur = cache.current()[k];
        for (int s = 0; s < M; ++s) {
          if (s == cur) continue;
          const double c = cache.neighbor_cost(k, s);
          if (c < best_c) {
            best_c = c;
            move_k = k;
            move_s = s;
          }
        }
      }
      if (move_k < 0) break;  // local minimum
      cache.apply(move_k, move_s);
      seq.push_back(cache.cost());
      ++total_steps;
    }
    if (cache.cost() < best_cost) {  // strict: ties keep the earlier restart
      best_cost = cache.cost();
      best_x = cache.current();
    }
    res.diag.restart_costs.push_back(std::move(seq));
  }

  res.x_hat = std::move(best_x);
  res.ml_cost = best_cost;
  res.diag.restarts_used = static_cast<int>(initials.size());
  res.diag.iterations = total_steps;
  res.diag.flops = ops.flops;
  return res;
}

DetectionResult hybrid_detect(const VectorXcd& y, const MatrixXcd& H, const SmSignalSet& set,
                              double noise_variance, const MpdOptions& opt) {
  MpdDetector mpd(set, opt);
  DetectionResult stage1 = mpd.detect(y, H, noise_variance);
  DetectionResult res = lsd_sm_detect(y, H, set, {stage1.x_hat});
  res.posteriors = std::move(stage1.posteriors);
  res.diag.iterations += stage1.diag.iterations;
  res.diag.converged = stage1.diag.converged;
  res.diag.variance_clamps = stage1.diag.variance_clamps;
  res.diag.max_message_sum_error = stage1.diag.max_message_sum_error;
  res.diag.min_variance_margin = stage1.diag.min_variance_margin;
  res.diag.flops += stage1.diag.flops;
  return res;
}

}  // namespace smmimo
