#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "smmimo/channel.hpp"
#include "smmimo/detect.hpp"
#include "smmimo/errors.hpp"
#include "smmimo/signal.hpp"

using namespace smmimo;

namespace {

SystemConfig make_system(int K, int N, int n_t, int order) {
  SystemConfig sys;
  sys.K = K;
  sys.N = N;
  sys.set = build_sm_signal_set(n_t, qam_alphabet(order));
  return sys;
}

struct Instance {
  MatrixXcd H;
  VectorXcd y;
  TransmitVector x;
  double sigma2 = 0;
};

Instance random_instance(const SystemConfig& sys, double snr_db, std::mt19937_64& rng) {
  Instance inst;
  inst.H = generate_channel(sys, rng);
  std::uniform_int_distribution<int> pick(0, sys.set.size() - 1);
  inst.x.resize(sys.K);
  for (int& v : inst.x) v = pick(rng);
  inst.sigma2 = snr_to_noise_variance(snr_db, sys);
  inst.y = transmit(inst.x, sys.set, inst.H, inst.sigma2, rng, nullptr);
  return inst;
}

// Symbol-scaled channel coefficient seen by observation i when user k
// transmits signal-set entry s.
cplx edge_gain(const MatrixXcd& H, const SmSignalSet& set, int i, int k, int s) {
  return set.symbol(s) * H(i, k * set.n_t + set.antenna(s));
}

}  // namespace

TEST_CASE("uniform initial messages give exactly zero interference means") {
  // Every QAM alphabet sums to zero, so averaging the signal set over any
  // antenna block cancels; the first round of interference estimates must be
  // identically zero before noise or data enter the picture.
  std::mt19937_64 rng(401);
  const SystemConfig sys = make_system(6, 16, 4, 4);
  const Instance inst = random_instance(sys, 8.0, rng);
  MpdDetector det(sys.set, MpdOptions{});
  det.init(inst.y, inst.H, inst.sigma2);
  det.iterate();
  for (int i = 0; i < sys.N; ++i)
    for (int k = 0; k < sys.K; ++k)
      CHECK(std::abs(det.extrinsic_mean(i, k)) < 1e-12);
}

TEST_CASE("extrinsic moments match the direct leave-one-out sums") {
  std::mt19937_64 rng(403);
  const SystemConfig sys = make_system(5, 12, 2, 4);
  const Instance inst = random_instance(sys, 6.0, rng);
  const int M = sys.set.size();
  MpdDetector det(sys.set, MpdOptions{});
  det.init(inst.y, inst.H, inst.sigma2);
  det.iterate();  // leave uniform messages behind
  // Capture the message state feeding the next round, then run it.
  std::vector<std::vector<std::vector<double>>> cap(sys.K);
  for (int k = 0; k < sys.K; ++k) {
    cap[k].resize(sys.N);
    for (int i = 0; i < sys.N; ++i) cap[k][i] = det.message(k, i);
  }
  det.iterate();
  for (int i = 0; i < sys.N; ++i)
    for (int k = 0; k < sys.K; ++k) {
      cplx mean{0, 0};
      double raw2 = 0;
      for (int j = 0; j < sys.K; ++j) {
        if (j == k) continue;
        cplx m{0, 0};
        double e2 = 0;
        for (int s = 0; s < M; ++s) {
          const cplx g = edge_gain(inst.H, sys.set, i, j, s);
          m += cap[j][i][s] * g;
          e2 += cap[j][i][s] * std::norm(g);
        }
        mean += m;
        raw2 += e2 - std::norm(m);
      }
      const double var = std::max(raw2 + inst.sigma2, inst.sigma2);
      CHECK(std::abs(det.extrinsic_mean(i, k) - mean) < 1e-10);
      CHECK(det.extrinsic_variance(i, k) == doctest::Approx(var).epsilon(1e-10));
    }
}

TEST_CASE("messages stay normalized and variances stay above the noise floor") {
  std::mt19937_64 rng(405);
  const SystemConfig sys = make_system(8, 24, 2, 4);
  const Instance inst = random_instance(sys, 5.0, rng);
  MpdDetector det(sys.set, MpdOptions{});
  det.init(inst.y, inst.H, inst.sigma2);
  for (int t = 0; t < 10; ++t) {
    det.iterate();
    for (int k = 0; k < sys.K; ++k)
      for (int i = 0; i < sys.N; ++i) {
        const std::vector<double> m = det.message(k, i);
        double sum = 0;
        for (double v : m) {
          CHECK(v >= 0.0);
          sum += v;
        }
        REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    for (int i = 0; i < sys.N; ++i)
      for (int k = 0; k < sys.K; ++k)
        CHECK(det.extrinsic_variance(i, k) >= inst.sigma2 - 1e-12);
  }
  CHECK(det.diagnostics().max_message_sum_error < 1e-9);
  CHECK(det.diagnostics().min_variance_margin >= 0.0);
}

TEST_CASE("posteriors are normalized and drive the hard decision") {
  std::mt19937_64 rng(407);
  const SystemConfig sys = make_system(6, 20, 2, 4);
  const Instance inst = random_instance(sys, 8.0, rng);
  const DetectionResult res = mpd_sm_detect(inst.y, inst.H, sys.set, inst.sigma2);
  REQUIRE(res.posteriors.size() == static_cast<std::size_t>(sys.K));
  for (int k = 0; k < sys.K; ++k) {
    double sum = 0;
    int best = 0;
    for (int s = 0; s < sys.set.size(); ++s) {
      sum += res.posteriors[k][s];
      if (res.posteriors[k][s] > res.posteriors[k][best]) best = s;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(res.x_hat[k] == best);
  }
}

TEST_CASE("a single user reduces to exact maximum-likelihood detection") {
  std::mt19937_64 rng(409);
  const SystemConfig sys = make_system(1, 8, 4, 4);
  int mismatch = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const Instance inst = random_instance(sys, 2.0, rng);
    const DetectionResult mpd = mpd_sm_detect(inst.y, inst.H, sys.set, inst.sigma2);
    const DetectionResult bf = ml_brute_force(inst.y, inst.H, sys.set);
    if (mpd.x_hat != bf.x_hat) ++mismatch;
  }
  // With no interference the posterior is the exact likelihood; the argmax
  // must agree with brute force on every draw.
  CHECK(mismatch == 0);
}

TEST_CASE("convergence tolerance stops iterating once messages settle") {
  std::mt19937_64 rng(411);
  const SystemConfig sys = make_system(4, 32, 2, 4);
  const Instance inst = random_instance(sys, 10.0, rng);
  MpdOptions opt;
  opt.iterations = 50;
  opt.conv_tol = 1e-6;
  const DetectionResult res = mpd_sm_detect(inst.y, inst.H, sys.set, inst.sigma2, opt);
  CHECK(res.diag.converged);
  CHECK(res.diag.iterations < 50);

  MpdOptions fixed = opt;
  fixed.conv_tol = 0.0;  // disables the early exit
  const DetectionResult full = mpd_sm_detect(inst.y, inst.H, sys.set, inst.sigma2, fixed);
  CHECK_FALSE(full.diag.converged);
  CHECK(full.diag.iterations == 50);
  // Settled messages mean the extra rounds cannot change the decision.
  CHECK(full.x_hat == res.x_hat);
}

TEST_CASE("damping choices in (0, 1] are accepted and decode at high SNR") {
  std::mt19937_64 rng(413);
  const SystemConfig sys = make_system(8, 32, 2, 4);
  for (double delta : {0.2, 0.4, 0.6}) {
    MpdOptions opt;
    opt.damping = delta;
    int bad_users = 0, total_users = 0;
    std::mt19937_64 local(rng());
    for (int rep = 0; rep < 100; ++rep) {
      const Instance inst = random_instance(sys, 11.0, local);
      const DetectionResult res = mpd_sm_detect(inst.y, inst.H, sys.set, inst.sigma2, opt);
      for (int k = 0; k < sys.K; ++k) {
        ++total_users;
        if (res.x_hat[k] != inst.x[k]) ++bad_users;
      }
    }
    INFO("damping ", delta);
    CHECK(bad_users * 50 < total_users);  // < 2% symbol errors at 11 dB, N/K = 4
  }
}

TEST_CASE("work grows linearly in observations, users, and signal-set size") {
  std::mt19937_64 rng(417);
  MpdOptions opt;
  opt.iterations = 8;
  opt.conv_tol = 0.0;  // fixed iteration count isolates the per-round cost
  const auto flops_for = [&](int K, int N, int n_t, int order) {
    const SystemConfig sys = make_system(K, N, n_t, order);
    const Instance inst = random_instance(sys, 9.0, rng);
    return mpd_sm_detect(inst.y, inst.H, sys.set, inst.sigma2, opt).diag.flops;
  };
  const double base = static_cast<double>(flops_for(4, 32, 2, 4));
  const double quad_n = static_cast<double>(flops_for(4, 128, 2, 4));
  const double quad_k = static_cast<double>(flops_for(16, 32, 2, 4));
  const double quad_m = static_cast<double>(flops_for(4, 32, 2, 16));
  const double en = std::log(quad_n / base) / std::log(4.0);
  const double ek = std::log(quad_k / base) / std::log(4.0);
  const double em = std::log(quad_m / base) / std::log(4.0);
  CHECK(en == doctest::Approx(1.0).epsilon(0.1));
  CHECK(ek == doctest::Approx(1.0).epsilon(0.1));
  CHECK(em == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("option and dimension contracts are enforced") {
  const SmSignalSet set = build_sm_signal_set(2, qam_alphabet(4));
  MpdOptions opt;
  opt.iterations = 0;
  CHECK_THROWS_AS(MpdDetector(set, opt), ContractViolation);
  opt = MpdOptions{};
  opt.damping = 0.0;
  CHECK_THROWS_AS(MpdDetector(set, opt), ContractViolation);
  opt.damping = 1.0 + 1e-9;
  CHECK_THROWS_AS(MpdDetector(set, opt), ContractViolation);
  opt.damping = 1.0;
  CHECK_NOTHROW(MpdDetector(set, opt));
  opt = MpdOptions{};
  opt.conv_tol = -1e-3;
  CHECK_THROWS_AS(MpdDetector(set, opt), ContractViolation);

  std::mt19937_64 rng(419);
  const SystemConfig sys = make_system(3, 8, 2, 4);
  const Instance inst = random_instance(sys, 6.0, rng);
  MpdDetector det(set, MpdOptions{});
  VectorXcd y_short = inst.y.head(7);
  CHECK_THROWS_AS(det.init(y_short, inst.H, inst.sigma2), ContractViolation);
  MatrixXcd H_odd = inst.H.leftCols(5);  // 5 columns is not a multiple of n_t = 2
  CHECK_THROWS_AS(det.init(inst.y, H_odd, inst.sigma2), ContractViolation);
  CHECK_THROWS_AS(det.init(inst.y, inst.H, -1.0), ContractViolation);
  MpdDetector fresh(set, MpdOptions{});
  CHECK_THROWS_AS(fresh.iterate(), ContractViolation);
}
