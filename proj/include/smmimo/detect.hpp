#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "smmimo/channel.hpp"
#include "smmimo/opcount.hpp"
#include "smmimo/signal.hpp"

namespace smmimo {

struct DetectDiagnostics {
  int iterations = 0;        // message-passing iterations run, or descent steps taken
  int restarts_used = 0;     // local-search restarts executed
  bool converged = false;    // message passing exited early on the change threshold
  bool regularized = false;  // linear filter needed the small-diagonal floor
  std::uint64_t flops = 0;   // real floating-point ops (see OpCounter for the unit)
  std::uint64_t nodes_visited = 0;          // tree-search nodes (sphere / brute force)
  int variance_clamps = 0;                  // interference variances clamped to the noise floor
  double max_message_sum_error = 0.0;       // max |sum_s p_ki(s) - 1| seen
  // Smallest sigma2_ik - sigma2 actually used; negative would mean an
  // unclamped below-noise-floor variance escaped (must never happen).
  double min_variance_margin = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> restart_costs;  // cost sequence per restart (local search)
};

struct DetectionResult {
  TransmitVector x_hat;                          // per-user signal-set indices
  double ml_cost = 0.0;                          // ||y - H x_hat||^2
  std::vector<std::vector<double>> posteriors;   // K x |S|, filled by message passing
  DetectDiagnostics diag;
};

/// Linear MMSE estimate followed by per-user projection onto the signal set.
/// The filter is applied in its N x N form, u = (H H^H + c I)^-1 y,
/// x_tilde = H^H u with c = sigma^2 / E_s (identical to the Gram form by the
/// push-through identity). c is floored at 1e-12 * K so the noiseless limit
/// degrades to zero forcing instead of a singular solve; diag.regularized
/// records when the floor engaged. Ties in the projection break to the lowest
/// signal-set index.
DetectionResult mmse_detect(const VectorXcd& y, const MatrixXcd& H, double noise_variance,
                            const SmSignalSet& set);

/// Exact ML by exhaustive enumeration over all |S|^K candidates in
/// lexicographic order (user 0 outermost); ties keep the first minimum.
/// Refuses (ContractViolation) if |S|^K exceeds max_candidates.
DetectionResult ml_brute_force(const VectorXcd& y, const MatrixXcd& H, const SmSignalSet& set,
                               std::uint64_t max_candidates = std::uint64_t{1} << 24);

/// Exact ML for conventional MIMO (n_t = 1) via real-valued decomposition,
/// QR, and depth-first enumeration with best-first symbol ordering and radius
/// shrinking (the first leaf is the Babai point). Requires N >= K; falls back
/// to brute force (under the cap) when R is numerically rank-deficient.
DetectionResult sphere_decode(const VectorXcd& y, const MatrixXcd& H, const Alphabet& alphabet,
                              std::uint64_t bf_cap = std::uint64_t{1} << 24);

/// All vectors differing from x in exactly one user's signal-set entry,
/// enumerated user-major then signal-set order; size (|S|-1) * K.
std::vector<TransmitVector> enumerate_neighbors(const TransmitVector& x, const SmSignalSet& set);

/// Incremental ML-cost evaluation for single-entry moves: precomputes the
/// scaled-column set J (|A|*K*n_t vectors) and maintains the residual
/// z = y - Hx so each candidate move costs O(N).
class NeighborCostCache {
 public:
  NeighborCostCache(const VectorXcd& y, const MatrixXcd& H, const SmSignalSet& set,
                    TransmitVector x, OpCounter* ops = nullptr);

  /// Re-point the cache at a new current vector (reuses J; rebuilds z).
  void reset(TransmitVector x);

  double cost() const { return cost_; }
  const TransmitVector& current() const { return x_; }
  const VectorXcd& residual() const { return z_; }
  int j_set_size() const { return static_cast<int>(contrib_.cols()); }

  /// Cost of the neighbor with user k moved to signal-set entry s; O(N),
  /// does not mutate the cache.
  double neighbor_cost(int k, int s) const;

  /// Commit the move and update z and cost consistently.
  void apply(int k, int s);

 private:
  const VectorXcd& y_;
  const SmSignalSet& set_;
  MatrixXcd contrib_;  // column k*|S|+s = alphabet symbol of s times the matching H column
  TransmitVector x_;
  VectorXcd z_;
  double cost_ = 0.0;
  mutable OpCounter* ops_ = nullptr;
};

/// Local search over the single-entry neighborhood: from each initial vector,
/// repeatedly move to the cheapest neighbor while it is strictly cheaper,
/// then stop; the best local minimum across restarts wins. Neighbor ties
/// break to the earliest (user-major, signal-set order) candidate.
DetectionResult lsd_sm_detect(const VectorXcd& y, const MatrixXcd& H, const SmSignalSet& set,
                              const std::vector<TransmitVector>& initials);

struct MpdOptions {
  int iterations = 20;     // hard cap on message-passing iterations
  double damping = 0.4;    // convex weight on the previous message
  double conv_tol = 1e-6;  // early exit when max total-variation change drops below; 0 disables
};

/// Gaussian-approximate message passing on the fully connected bipartite
/// graph of K users and N observations. Per iteration: per-edge interference
/// moments, totals, extrinsic means/variances by subtracting the own term
/// (variances clamped at the noise floor), log-domain per-user posteriors,
/// per-edge extrinsic messages, then damped probability-domain update.
/// The stepwise API exposes the message state for verification.
class MpdDetector {
 public:
  explicit MpdDetector(const SmSignalSet& set, MpdOptions opt = {});

  DetectionResult detect(const VectorXcd& y, const MatrixXcd& H, double noise_variance);

  void init(const VectorXcd& y, const MatrixXcd& H, double noise_variance);
  /// One iteration; returns the max total-variation message change.
  double iterate();
  /// Hard decision (posterior argmax, lowest index on ties) + diagnostics.
  DetectionResult finalize();

  int users() const { return K_; }
  int observations() const { return N_; }
  /// Message p_ki over signal-set entries (current iterate).
  std::vector<double> message(int k, int i) const;
  /// Extrinsic interference mean mu_ik of the latest iteration.
  cplx extrinsic_mean(int i, int k) const { return mu_ext_[static_cast<std::size_t>(k) * N_ + i]; }
  /// Extrinsic variance sigma^2_ik (after the noise-floor clamp).
  double extrinsic_variance(int i, int k) const {
    return var_ext_[static_cast<std::size_t>(k) * N_ + i];
  }
  /// Per-user posterior over signal-set entries (latest iteration).
  const std::vector<double>& posterior(int k) const { return post_[k]; }
  int iterations_run() const { return iter_; }
  const DetectDiagnostics& diagnostics() const { return diag_; }

 private:
  SmSignalSet set_;
  MpdOptions opt_;
  int K_ = 0, N_ = 0, M_ = 0;
  double noise_var_ = 0.0;
  VectorXcd y_;
  // Per user k: N x M tables, column-major over observations.
  std::vector<Eigen::MatrixXcd> G_;   // symbol-scaled channel entries
  std::vector<Eigen::MatrixXd> G2_;   // |G|^2
  std::vector<Eigen::MatrixXd> p_;    // messages p_ki(s): (M x N) per user
  std::vector<Eigen::MatrixXd> p_new_;
  std::vector<Eigen::MatrixXd> term_;  // per-edge log-likelihood terms (M x N)
  std::vector<cplx> mu_edge_;          // per-edge interference mean contributions
  std::vector<double> nu_edge_;
  std::vector<cplx> mu_ext_;   // extrinsic means mu_ik, k-major
  std::vector<double> var_ext_;
  std::vector<std::vector<double>> post_;  // per-user posteriors (normalized)
  std::vector<double> logpost_;            // per-user unnormalized log posteriors
  Eigen::VectorXcd mu_tot_;                // per-observation moment totals
  Eigen::VectorXd var_tot_;
  int iter_ = 0;
  DetectDiagnostics diag_;
};

/// Convenience wrapper matching the one-shot detector interface.
DetectionResult mpd_sm_detect(const VectorXcd& y, const MatrixXcd& H, const SmSignalSet& set,
                              double noise_variance, const MpdOptions& opt = {});

/// Message passing followed by local search seeded with its hard decision;
/// no matrix inversion anywhere on this path.
DetectionResult hybrid_detect(const VectorXcd& y, const MatrixXcd& H, const SmSignalSet& set,
                              double noise_variance, const MpdOptions& opt = {});

}  // namespace smmimo
