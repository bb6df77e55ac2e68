#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

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
};

Instance random_instance(const SystemConfig& sys, double snr_db, std::mt19937_64& rng) {
  Instance inst;
  inst.H = generate_channel(sys, rng);
  std::uniform_int_distribution<int> pick(0, sys.set.size() - 1);
  inst.x.resize(sys.K);
  for (int& v : inst.x) v = pick(rng);
  const double sigma2 = snr_to_noise_variance(snr_db, sys);
  inst.y = transmit(inst.x, sys.set, inst.H, sigma2, rng, nullptr);
  return inst;
}

double dense_cost(const VectorXcd& y, const MatrixXcd& H, const TransmitVector& x,
                  const SmSignalSet& set) {
  return (y - H * densify(x, set)).squaredNorm();
}

TransmitVector random_vector(const SmSignalSet& set, int K, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, set.size() - 1);
  TransmitVector x(K);
  for (int& v : x) v = pick(rng);
  return x;
}

}  // namespace

TEST_CASE("two-user BPSK neighborhood matches the hand enumeration") {
  // K = 2, n_t = 2, BPSK. Current vector: user 0 sends +1 on antenna 0
  // (index 0), user 1 sends -1 on antenna 1 (index 3). The six neighbors
  // change exactly one user to one of its three other signal-set entries,
  // user-major, signal-set order.
  const SmSignalSet set = build_sm_signal_set(2, qam_alphabet(2));
  REQUIRE(set.size() == 4);
  const TransmitVector x{0, 3};
  const std::vector<TransmitVector> nb = enumerate_neighbors(x, set);
  const std::vector<TransmitVector> expected{
      {1, 3}, {2, 3}, {3, 3},  // user 0 moved
      {0, 0}, {0, 1}, {0, 2},  // user 1 moved
  };
  CHECK(nb == expected);
}

TEST_CASE("neighborhood size is (|S|-1)K and excludes the center") {
  std::mt19937_64 rng(301);
  const SmSignalSet set16 = build_sm_signal_set(4, qam_alphabet(4));
  const TransmitVector x = random_vector(set16, 16, rng);
  const std::vector<TransmitVector> nb = enumerate_neighbors(x, set16);
  CHECK(nb.size() == 15u * 16u);  // 240
  for (const TransmitVector& n : nb) {
    CHECK(n != x);
    int moved = 0;
    for (std::size_t k = 0; k < n.size(); ++k)
      if (n[k] != x[k]) ++moved;
    CHECK(moved == 1);
  }
  // Distinctness.
  std::vector<TransmitVector> sorted = nb;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("cost cache sizes the scaled-column set as |A| K n_t") {
  std::mt19937_64 rng(303);
  const SystemConfig sys = make_system(5, 16, 4, 4);
  const Instance inst = random_instance(sys, 6.0, rng);
  NeighborCostCache cache(inst.y, inst.H, sys.set, inst.x);
  CHECK(cache.j_set_size() == 4 * 5 * 4);  // |A| * K * n_t = 80 columns
}

TEST_CASE("cached neighbor costs match dense recomputation") {
  std::mt19937_64 rng(305);
  for (int rep = 0; rep < 10; ++rep) {
    const SystemConfig sys = make_system(6, 24, 2, 4);
    const Instance inst = random_instance(sys, 4.0, rng);
    NeighborCostCache cache(inst.y, inst.H, sys.set, inst.x);
    CHECK(cache.cost() ==
          doctest::Approx(dense_cost(inst.y, inst.H, inst.x, sys.set)).epsilon(1e-10));
    for (int k = 0; k < sys.K; ++k)
      for (int s = 0; s < sys.set.size(); ++s) {
        TransmitVector n = inst.x;
        n[k] = s;
        const double ref = dense_cost(inst.y, inst.H, n, sys.set);
        CHECK(cache.neighbor_cost(k, s) == doctest::Approx(ref).epsilon(1e-8));
      }
  }
}

TEST_CASE("keeping the current entry reproduces the current cost") {
  std::mt19937_64 rng(307);
  const SystemConfig sys = make_system(4, 12, 2, 4);
  const Instance inst = random_instance(sys, 6.0, rng);
  NeighborCostCache cache(inst.y, inst.H, sys.set, inst.x);
  for (int k = 0; k < sys.K; ++k)
    CHECK(cache.neighbor_cost(k, inst.x[k]) == doctest::Approx(cache.cost()).epsilon(1e-10));
}

TEST_CASE("applying moves keeps the cache consistent over long walks") {
  std::mt19937_64 rng(309);
  const SystemConfig sys = make_system(5, 16, 2, 8);
  const Instance inst = random_instance(sys, 4.0, rng);
  NeighborCostCache cache(inst.y, inst.H, sys.set, inst.x);
  TransmitVector cur = inst.x;
  std::uniform_int_distribution<int> user(0, sys.K - 1);
  std::uniform_int_distribution<int> entry(0, sys.set.size() - 1);
  for (int step = 0; step < 1000; ++step) {
    const int k = user(rng);
    const int s = entry(rng);
    const double predicted = cache.neighbor_cost(k, s);
    cache.apply(k, s);
    cur[k] = s;
    const double ref = dense_cost(inst.y, inst.H, cur, sys.set);
    REQUIRE(cache.cost() == doctest::Approx(predicted).epsilon(1e-8));
    REQUIRE(cache.cost() == doctest::Approx(ref).epsilon(1e-8));
    REQUIRE(cache.current() == cur);
  }
}

TEST_CASE("a full neighborhood scan costs 8N flops per candidate") {
  std::mt19937_64 rng(311);
  const SystemConfig sys = make_system(8, 32, 2, 4);
  const Instance inst = random_instance(sys, 6.0, rng);
  OpCounter ops;
  NeighborCostCache cache(inst.y, inst.H, sys.set, inst.x, &ops);
  const std::uint64_t before = ops.flops;
  const int M = sys.set.size();
  for (int k = 0; k < sys.K; ++k)
    for (int s = 0; s < M; ++s) {
      if (s == inst.x[k]) continue;
      cache.neighbor_cost(k, s);
    }
  const std::uint64_t scanned = ops.flops - before;
  CHECK(scanned == static_cast<std::uint64_t>((M - 1) * sys.K) * 8u * 32u);
}

TEST_CASE("descent sequences strictly decrease and terminate") {
  std::mt19937_64 rng(313);
  const SystemConfig sys = make_system(8, 32, 2, 4);
  for (int rep = 0; rep < 200; ++rep) {
    const Instance inst = random_instance(sys, 2.0 + (rep % 9), rng);
    std::vector<TransmitVector> initials;
    for (int r = 0; r < 3; ++r) initials.push_back(random_vector(sys.set, sys.K, rng));
    const DetectionResult res = lsd_sm_detect(inst.y, inst.H, sys.set, initials);
    REQUIRE(res.diag.restarts_used == 3);
    REQUIRE(res.diag.restart_costs.size() == 3);
    for (const std::vector<double>& seq : res.diag.restart_costs) {
      REQUIRE(!seq.empty());
      for (std::size_t i = 1; i < seq.size(); ++i) CHECK(seq[i] < seq[i - 1]);
    }
    // The reported decision is the best across restarts.
    double best = std::numeric_limits<double>::infinity();
    for (const std::vector<double>& seq : res.diag.restart_costs)
      best = std::min(best, seq.back());
    CHECK(res.ml_cost == doctest::Approx(best).epsilon(1e-10));
  }
}

TEST_CASE("starting from the noiseless truth takes zero moves") {
  std::mt19937_64 rng(317);
  const SystemConfig sys = make_system(6, 24, 2, 4);
  Instance inst = random_instance(sys, 0.0, rng);
  inst.y = inst.H * densify(inst.x, sys.set);  // strip noise: truth has cost 0
  const DetectionResult res = lsd_sm_detect(inst.y, inst.H, sys.set, {inst.x});
  CHECK(res.x_hat == inst.x);
  REQUIRE(res.diag.restart_costs.size() == 1);
  CHECK(res.diag.restart_costs[0].size() == 1);  // initial cost only, no moves
  CHECK(res.ml_cost == doctest::Approx(0.0));
}

TEST_CASE("local search needs at least one initial vector") {
  std::mt19937_64 rng(319);
  const SystemConfig sys = make_system(4, 12, 2, 4);
  const Instance inst = random_instance(sys, 6.0, rng);
  CHECK_THROWS_AS(lsd_sm_detect(inst.y, inst.H, sys.set, {}), ContractViolation);
}

TEST_CASE("local search with MMSE + random restart is near ML at moderate SNR") {
  std::mt19937_64 rng(323);
  const SystemConfig sys = make_system(4, 16, 2, 2);  // 256 candidates: brute is exact
  int mismatches = 0;
  const int trials = 400;
  for (int rep = 0; rep < trials; ++rep) {
    const Instance inst = random_instance(sys, 6.0, rng);
    const DetectionResult mmse = mmse_detect(inst.y, inst.H,
                                             snr_to_noise_variance(6.0, sys), sys.set);
    std::vector<TransmitVector> initials{mmse.x_hat, random_vector(sys.set, sys.K, rng)};
    const DetectionResult lsd = lsd_sm_detect(inst.y, inst.H, sys.set, initials);
    const DetectionResult bf = ml_brute_force(inst.y, inst.H, sys.set);
    CHECK(lsd.ml_cost >= bf.ml_cost - 1e-9);  // search can never beat the optimum
    if (lsd.x_hat != bf.x_hat) ++mismatches;
  }
  CHECK(mismatches <= trials / 50);  // at most 2% local-minimum escapes
}

TEST_CASE("hybrid runs search from the message-passing decision") {
  std::mt19937_64 rng(329);
  const SystemConfig sys = make_system(8, 32, 4, 4);
  for (int rep = 0; rep < 30; ++rep) {
    const Instance inst = random_instance(sys, 7.0, rng);
    const double sigma2 = snr_to_noise_variance(7.0, sys);
    const DetectionResult mpd = mpd_sm_detect(inst.y, inst.H, sys.set, sigma2);
    const DetectionResult hyb = hybrid_detect(inst.y, inst.H, sys.set, sigma2);
    // Descent from the stage-1 decision can only improve the residual.
    CHECK(hyb.ml_cost <= mpd.ml_cost + 1e-9);
    CHECK(hyb.diag.flops > mpd.diag.flops);
    CHECK(hyb.diag.restarts_used == 1);
    REQUIRE(hyb.posteriors.size() == static_cast<std::size_t>(sys.K));
    CHECK(hyb.diag.iterations >= mpd.diag.iterations);
  }
}
