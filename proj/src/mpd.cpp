#include <cmath>
#include <limits>

#include "smmimo/detect.hpp"
#include "smmimo/errors.hpp"

namespace smmimo {
namespace {

// Log-domain entries this far below the per-edge maximum exponentiate to
// ~1e-13 of the leading term; they are flushed to exact zero instead of
// calling exp(). No measurable effect on decisions or BER.
constexpr double kExpCutoff = -30.0;
// Divisor guard for the exactly-noiseless case (sigma^2 = 0 and fully
// converged interference estimates).
constexpr double kVarFloor = 1e-300;

}  // namespace

MpdDetector::MpdDetector(const SmSignalSet& set, MpdOptions opt) : set_(set), opt_(opt) {
  if (opt_.iterations < 1) throw ContractViolation("message passing needs iterations >= 1");
  if (!(opt_.damping > 0.0) || opt_.damping > 1.0)
    throw ContractViolation("damping factor must lie in (0, 1]");
  if (opt_.conv_tol < 0.0) throw ContractViolation("convergence tolerance must be >= 0");
}

void MpdDetector::init(const VectorXcd& y, const MatrixXcd& H, double noise_variance) {
  N_ = static_cast<int>(y.size());
  M_ = set_.size();
  const int n_t = set_.n_t;
  if (H.rows() != N_) throw ContractViolation("y length does not match channel rows");
  if (H.cols() % n_t != 0) throw ContractViolation("channel columns not a multiple of n_t");
  K_ = static_cast<int>(H.cols()) / n_t;
  if (noise_variance < 0) throw ContractViolation("noise variance must be >= 0");
  noise_var_ = noise_variance;
  y_ = y;

  G_.resize(K_);
  G2_.resize(K_);
  p_.resize(K_);
  p_new_.resize(K_);
  term_.resize(K_);
  for (int k = 0; k < K_; ++k) {
    G_[k].resize(M_, N_);
    G2_[k].resize(M_, N_);
    for (int i = 0; i < N_; ++i)
      for (int s = 0; s < M_; ++s) {
        const cplx g = set_.symbol(s) * H(i, k * n_t + set_.antenna(s));
        G_[k](s, i) = g;
        G2_[k](s, i) = std::norm(g);
      }
    p_[k] = Eigen::MatrixXd::Constant(M_, N_, 1.0 / M_);
    p_new_[k].resize(M_, N_);
    term_[k].resize(M_, N_);
  }
  const std::size_t edges = static_cast<std::size_t>(K_) * N_;
  mu_edge_.assign(edges, cplx{0, 0});
  nu_edge_.assign(edges, 0.0);
  mu_ext_.assign(edges, cplx{0, 0});
  var_ext_.assign(edges, 0.0);
  post_.assign(K_, std::vector<double>(M_, 1.0 / M_));
  logpost_.assign(static_cast<std::size_t>(K_) * M_, 0.0);
  mu_tot_.resize(N_);
  var_tot_.resize(N_);

  iter_ = 0;
  diag_ = DetectDiagnostics{};
  diag_.flops += 9ull * K_ * N_ * M_;  // symbol-scaled channel table + magnitudes
}

double MpdDetector::iterate() {
  if (K_ == 0) throw ContractViolation("iterate() before init()");
  const double delta = opt_.damping;
  const double w_new = 1.0 - delta;
  const double var_floor = std::max(noise_var_, kVarFloor);
  double max_tv = 0.0;
  std::uint64_t exps = 0;

  // Interference moments per edge under the current messages, then totals
  // per observation (sum over users; extrinsic values subtract the own term).
  for (int k = 0; k < K_; ++k) {
    const std::size_t base = static_cast<std::size_t>(k) * N_;
    for (int i = 0; i < N_; ++i) {
      const double* p = p_[k].col(i).data();
      const cplx* g = G_[k].col(i).data();
      const double* g2 = G2_[k].col(i).data();
      double re = 0, im = 0, m2 = 0;
      for (int s = 0; s < M_; ++s) {
        re += p[s] * g[s].real();
        im += p[s] * g[s].imag();
        m2 += p[s] * g2[s];
      }
      mu_edge_[base + i] = cplx(re, im);
      nu_edge_[base + i] = m2 - (re * re + im * im);
    }
  }
  mu_tot_.setZero();
  var_tot_.setZero();
  for (int k = 0; k < K_; ++k) {
    const std::size_t base = static_cast<std::size_t>(k) * N_;
    for (int i = 0; i < N_; ++i) {
      mu_tot_(i) += mu_edge_[base + i];
      var_tot_(i) += nu_edge_[base + i];
    }
  }

  // Extrinsic means/variances, per-edge Gaussian log-likelihood terms, and
  // per-user log posteriors ln p_k(s) = -sum_i [ln sigma_ik + |.|^2/(2 s2)].
  int clamps = 0;
  for (int k = 0; k < K_; ++k) {
    const std::size_t base = static_cast<std::size_t>(k) * N_;
    double* lp = &logpost_[static_cast<std::size_t>(k) * M_];
    for (int s = 0; s < M_; ++s) lp[s] = 0.0;
    for (int i = 0; i < N_; ++i) {
      const cplx mu_ik = mu_tot_(i) - mu_edge_[base + i];
      double s2 = var_tot_(i) - nu_edge_[base + i] + noise_var_;
      if (s2 < noise_var_) {
        s2 = noise_var_;  // Gaussian moments cannot fall below the noise floor
        ++clamps;
      }
      if (s2 < var_floor) s2 = var_floor;
      if (s2 - noise_var_ < diag_.min_variance_margin)
        diag_.min_variance_margin = s2 - noise_var_;
      mu_ext_[base + i] = mu_ik;
      var_ext_[base + i] = s2;
      const double inv2 = 0.5 / s2;
      const double lns = 0.5 * std::log(s2);
      const cplx d = y_(i) - mu_ik;
      double* t = term_[k].col(i).data();
      const cplx* g = G_[k].col(i).data();
      for (int s = 0; s < M_; ++s) {
        const double dre = d.real() - g[s].real();
        const double dim = d.imag() - g[s].imag();
        const double v = lns + (dre * dre + dim * dim) * inv2;
        t[s] = v;
        lp[s] -= v;
      }
    }
    // Normalized per-user posterior (argmax source and reported output), and
    // the normalizing constant folded back so lp holds the normalized
    // log-posterior for the message step below.
    double mx = lp[0];
    for (int s = 1; s < M_; ++s) mx = std::max(mx, lp[s]);
    double sum = 0;
    double* q = post_[k].data();
    for (int s = 0; s < M_; ++s) {
      const double v = lp[s] - mx;
      if (v >= kExpCutoff) {
        q[s] = std::exp(v);
        ++exps;
      } else {
        q[s] = 0.0;
      }
      sum += q[s];
    }
    const double inv = 1.0 / sum;
    for (int s = 0; s < M_; ++s) q[s] *= inv;
    const double lse = mx + std::log(sum);
    for (int s = 0; s < M_; ++s) lp[s] -= lse;
  }
  diag_.variance_clamps += clamps;

  // Per-edge messages: add observation i's own term back onto the normalized
  // log-posterior, exponentiate as-is (the absolute scale, including the
  // ln sigma_ik offset, deliberately survives), mix with the previous message
  // in the probability domain, then renormalize the mixture. Confident
  // messages therefore see less effective damping than tentative ones.
  for (int k = 0; k < K_; ++k) {
    const double* lp = &logpost_[static_cast<std::size_t>(k) * M_];
    for (int i = 0; i < N_; ++i) {
      const double* t = term_[k].col(i).data();
      const double* pold = p_[k].col(i).data();
      double* pn = p_new_[k].col(i).data();
      double mxp = -std::numeric_limits<double>::infinity();
      for (int s = 0; s < M_; ++s) {
        const double v = lp[s] + t[s];  // the posterior carries -t[s]
        pn[s] = v;
        if (v > mxp) mxp = v;
      }
      // exp() saturates near 710; above this shift the old-message share is
      // already below 1e-290 of the mixture, so capping cannot change results.
      const double shift = mxp > 690.0 ? mxp - 690.0 : 0.0;
      double sum = delta;  // old message is normalized: its mixture mass is delta
      for (int s = 0; s < M_; ++s) {
        double we = 0.0;
        if (pn[s] - mxp >= kExpCutoff) {
          we = w_new * std::exp(pn[s] - shift);
          ++exps;
        }
        pn[s] = we + delta * pold[s];
        sum += we;
      }
      const double invsum = 1.0 / sum;
      double tv = 0, psum = 0;
      for (int s = 0; s < M_; ++s) {
        const double pv = pn[s] * invsum;
        tv += std::abs(pv - pold[s]);
        psum += pv;
        pn[s] = pv;
      }
      tv *= 0.5;
      if (tv > max_tv) max_tv = tv;
      const double err = std::abs(psum - 1.0);
      if (err > diag_.max_message_sum_error) diag_.max_message_sum_error = err;
    }
  }
  p_.swap(p_new_);
  ++iter_;
  diag_.iterations = iter_;

  // Closed-form tally for the loops above; exp() calls counted as performed.
  const std::uint64_t edges = static_cast<std::uint64_t>(K_) * N_;
  diag_.flops += edges * (24ull * M_ + 19) + 6ull * K_ * M_ + 2ull * K_ + exps;
  return max_tv;
}

DetectionResult MpdDetector::finalize() {
  if (K_ == 0) throw ContractViolation("finalize() before init()");
  DetectionResult res;
  res.x_hat.resize(K_);
  for (int k = 0; k < K_; ++k) {
    const std::vector<double>& q = post_[k];
    int best = 0;
    for (int s = 1; s < M_; ++s)
      if (q[s] > q[best]) best = s;  // strict: ties keep the lowest index
    res.x_hat[k] = best;
  }
  res.posteriors = post_;
  // Residual for reporting; G already holds the symbol-scaled channel entries.
  double cost = 0;
  for (int i = 0; i < N_; ++i) {
    cplx r = y_(i);
    for (int k = 0; k < K_; ++k) r -= G_[k](res.x_hat[k], i);
    cost += std::norm(r);
  }
  res.ml_cost = cost;
  res.diag = diag_;
  return res;
}

std::vector<double> MpdDetector::message(int k, int i) const {
  const double* p = p_[k].col(i).data();
  return std::vector<double>(p, p + M_);
}

DetectionResult MpdDetector::detect(const VectorXcd& y, const MatrixXcd& H,
                                    double noise_variance) {
  init(y, H, noise_variance);
  for (int t = 0; t < opt_.iterations; ++t) {
    const double tv = iterate();
    if (opt_.conv_tol > 0 && tv < opt_.conv_tol) {
      diag_.converged = true;
      break;
    }
  }
  return finalize();
}

DetectionResult mpd_sm_detect(const VectorXcd& y, const MatrixXcd& H, const SmSignalSet& set,
                              double noise_variance, const MpdOptions& opt) {
  MpdDetector detector(set, opt);
  return detector.detect(y, H, noise_variance);
}

}  // namespace smmimo
