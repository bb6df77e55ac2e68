#include "smmimo/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "smmimo/errors.hpp"
#include "smmimo/rng.hpp"

namespace smmimo {
namespace {

constexpr int kBatch = 256;  // fixed batch size keeps results worker-count-invariant

struct TrialOut {
  std::int64_t bit_errors = 0;
  std::int64_t bits = 0;
  std::uint64_t flops = 0;
  std::int64_t iters = 0;
  double signal_power = 0;
  double max_msg_err = 0;
  double var_margin = std::numeric_limits<double>::infinity();
  std::int64_t clamps = 0;
  bool erased = false;
};

struct PointContext {
  SystemConfig system;
  DetectorSpec detector;
  double snr_db = 0;
  double sigma2 = 0;
  double x = 0;  // grid coordinate (snr_db or alpha)
  std::uint64_t master_seed = 0;
  std::uint64_t curve_idx = 0;
  std::uint64_t point_idx = 0;
};

// Per-worker scratch: the message-passing detector keeps its big tables
// between trials of the same point (dimensions do not change).
struct Workspace {
  std::optional<MpdDetector> mpd;
};

TrialOut run_trial(const PointContext& ctx, std::uint64_t trial, Workspace& ws) {
  const SystemConfig& sys = ctx.system;
  const SmSignalSet& set = sys.set;
  const int K = sys.K;
  const int bpu = set.bits_per_use;

  auto ch_rng = make_stream(ctx.master_seed, ctx.curve_idx, ctx.point_idx, trial, Stream::channel);
  auto bit_rng = make_stream(ctx.master_seed, ctx.curve_idx, ctx.point_idx, trial, Stream::bits);
  auto n_rng = make_stream(ctx.master_seed, ctx.curve_idx, ctx.point_idx, trial, Stream::noise);
  auto det_rng = make_stream(ctx.master_seed, ctx.curve_idx, ctx.point_idx, trial, Stream::detector);

  const MatrixXcd H = generate_channel(sys, ch_rng);

  std::uniform_int_distribution<std::uint32_t> word_dist(0, (1u << bpu) - 1u);
  std::vector<std::uint32_t> words(K);
  TransmitVector x(K);
  for (int k = 0; k < K; ++k) {
    words[k] = word_dist(bit_rng);
    x[k] = map_bits(words[k], set);
  }

  TrialOut out;
  const VectorXcd y = transmit(x, set, H, ctx.sigma2, n_rng, &out.signal_power);

  DetectionResult res;
  try {
    switch (ctx.detector.kind) {
      case DetectorKind::Mmse:
        res = mmse_detect(y, H, ctx.sigma2, set);
        break;
      case DetectorKind::Mpd: {
        if (!ws.mpd) ws.mpd.emplace(set, ctx.detector.mpd);
        res = ws.mpd->detect(y, H, ctx.sigma2);
        break;
      }
      case DetectorKind::Lsd: {
        const DetectionResult init = mmse_detect(y, H, ctx.sigma2, set);
        std::vector<TransmitVector> initials{init.x_hat};
        std::uniform_int_distribution<int> entry(0, set.size() - 1);
        for (int r = 1; r < ctx.detector.restarts; ++r) {
          TransmitVector rand_x(K);
          for (int k = 0; k < K; ++k) rand_x[k] = entry(det_rng);
          initials.push_back(std::move(rand_x));
        }
        res = lsd_sm_detect(y, H, set, initials);
        res.diag.flops += init.diag.flops;  // the initial solution is part of the detector
        break;
      }
      case DetectorKind::Hybrid:
        res = hybrid_detect(y, H, set, ctx.sigma2, ctx.detector.mpd);
        break;
      case DetectorKind::Sphere:
        res = sphere_decode(y, H, set.alphabet, ctx.detector.bf_cap);
        break;
      case DetectorKind::Brute:
        res = ml_brute_force(y, H, set, ctx.detector.bf_cap);
        break;
    }
  } catch (const NumericalError&) {
    out.erased = true;
    return out;
  }

  std::int64_t errors = 0;
  for (int k = 0; k < K; ++k) errors += hamming_distance(words[k], demap(res.x_hat[k], set));
  out.bit_errors = errors;
  out.bits = static_cast<std::int64_t>(K) * bpu;
  out.flops = res.diag.flops;
  const bool tree = ctx.detector.kind == DetectorKind::Sphere ||
                    ctx.detector.kind == DetectorKind::Brute;
  out.iters = tree ? static_cast<std::int64_t>(res.diag.nodes_visited) : res.diag.iterations;
  out.max_msg_err = res.diag.max_message_sum_error;
  out.var_margin = res.diag.min_variance_margin;
  out.clamps = res.diag.variance_clamps;
  return out;
}

BerRecord run_point(const PointContext& ctx, const StoppingRule& stop, int workers,
                    const std::string& label) {
  BerRecord rec;
  rec.curve = label;
  rec.x = ctx.x;
  rec.min_variance_margin = std::numeric_limits<double>::infinity();

  std::int64_t trials = 0;
  std::uint64_t flops_sum = 0;
  std::int64_t iters_sum = 0;
  double power_sum = 0;
  std::vector<TrialOut> slots(kBatch);
  Workspace serial_ws;

  while (trials + rec.erasures < stop.max_trials &&
         (rec.errors < stop.min_bit_errors || stop.min_bit_errors <= 0)) {
    const int batch =
        static_cast<int>(std::min<std::int64_t>(kBatch, stop.max_trials - trials - rec.erasures));
    const std::uint64_t first = static_cast<std::uint64_t>(trials + rec.erasures);

    if (workers <= 1) {
      for (int s = 0; s < batch; ++s) slots[s] = run_trial(ctx, first + s, serial_ws);
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          Workspace ws;
          int s;
          while ((s = next.fetch_add(1)) < batch) slots[s] = run_trial(ctx, first + s, ws);
        });
      }
      for (auto& t : pool) t.join();
    }

    // Reduce in slot (= trial) order: aggregates are worker-count-invariant.
    for (int s = 0; s < batch; ++s) {
      const TrialOut& o = slots[s];
      if (o.erased) {
        ++rec.erasures;
        continue;
      }
      ++trials;
      rec.errors += o.bit_errors;
      rec.bits += o.bits;
      flops_sum += o.flops;
      iters_sum += o.iters;
      power_sum += o.signal_power;
      rec.max_message_sum_error = std::max(rec.max_message_sum_error, o.max_msg_err);
      rec.min_variance_margin = std::min(rec.min_variance_margin, o.var_margin);
      rec.variance_clamps += o.clamps;
    }
  }

  rec.trials = trials;
  if (rec.bits > 0) {
    rec.ber = static_cast<double>(rec.errors) / static_cast<double>(rec.bits);
    rec.ci_halfwidth = 1.96 * std::sqrt(rec.ber * (1.0 - rec.ber) / static_cast<double>(rec.bits));
  }
  if (trials > 0) {
    rec.mean_ops = static_cast<double>(flops_sum) / 8.0 / static_cast<double>(trials);
    rec.mean_iters = static_cast<double>(iters_sum) / static_cast<double>(trials);
    if (ctx.sigma2 > 0) {
      const double mean_power = power_sum / static_cast<double>(trials);
      rec.measured_snr_db =
          10.0 * std::log10(mean_power / (ctx.system.N * ctx.sigma2));
    } else {
      rec.measured_snr_db = std::numeric_limits<double>::infinity();
    }
  }
  rec.hit_min_errors = stop.min_bit_errors > 0 && rec.errors >= stop.min_bit_errors;
  if (!std::isfinite(rec.min_variance_margin)) rec.min_variance_margin = 0;
  return rec;
}

int resolve_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void check_plan(const TrialPlan& plan, bool alpha_sweep) {
  if (plan.curves.empty()) throw ConfigError("plan has no curves");
  if (alpha_sweep) {
    if (plan.alpha_grid.empty()) throw ConfigError("alpha sweep needs a non-empty alpha grid");
    if (!plan.snr_grid_db.empty())
      throw ConfigError("alpha sweep must not also carry an SNR grid");
  } else {
    if (plan.snr_grid_db.empty()) throw ConfigError("SNR sweep needs a non-empty SNR grid");
    if (!plan.alpha_grid.empty()) throw ConfigError("SNR sweep must not also carry an alpha grid");
  }
  if (plan.stopping.max_trials < 1) throw ConfigError("max_trials must be >= 1");
  for (std::size_t a = 0; a < plan.curves.size(); ++a) {
    if (plan.curves[a].label.empty()) throw ConfigError("curve labels must be non-empty");
    for (std::size_t b = a + 1; b < plan.curves.size(); ++b)
      if (plan.curves[a].label == plan.curves[b].label)
        throw ConfigError("duplicate curve label '" + plan.curves[a].label + "'");
    const Curve& c = plan.curves[a];
    if (c.detector.kind == DetectorKind::Sphere && c.system.set.n_t != 1)
      throw ConfigError("curve '" + c.label + "': sphere decoding requires n_t = 1");
    if (c.detector.kind == DetectorKind::Lsd && c.detector.restarts < 1)
      throw ConfigError("curve '" + c.label + "': local search needs restarts >= 1");
  }
}

void check_erasures(const std::vector<BerRecord>& records) {
  std::int64_t erased = 0, total = 0;
  for (const auto& r : records) {
    erased += r.erasures;
    total += r.trials + r.erasures;
  }
  if (total > 0 && erased * 1000 > total)
    throw SimError("erasure rate " + std::to_string(erased) + "/" + std::to_string(total) +
                   " exceeds the 0.1% budget");
}

}  // namespace

std::string detector_kind_name(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::Mmse: return "mmse";
    case DetectorKind::Mpd: return "mpd";
    case DetectorKind::Lsd: return "lsd";
    case DetectorKind::Hybrid: return "hybrid";
    case DetectorKind::Sphere: return "sphere";
    case DetectorKind::Brute: return "brute";
  }
  return "?";
}

std::vector<BerRecord> run_ber_sweep(const TrialPlan& plan) {
  check_plan(plan, /*alpha_sweep=*/false);
  const int workers = resolve_workers(plan.workers);
  std::vector<BerRecord> records;
  for (std::size_t ci = 0; ci < plan.curves.size(); ++ci) {
    const Curve& curve = plan.curves[ci];
    curve.system.validate();
    for (std::size_t pi = 0; pi < plan.snr_grid_db.size(); ++pi) {
      PointContext ctx;
      ctx.system = curve.system;
      ctx.detector = curve.detector;
      ctx.snr_db = plan.snr_grid_db[pi];
      ctx.sigma2 = snr_to_noise_variance(ctx.snr_db, ctx.system);
      ctx.x = ctx.snr_db;
      ctx.master_seed = plan.master_seed;
      ctx.curve_idx = ci;
      ctx.point_idx = pi;
      records.push_back(run_point(ctx, plan.stopping, workers, curve.label));
    }
  }
  check_erasures(records);
  return records;
}

std::vector<BerRecord> run_alpha_sweep(const TrialPlan& plan) {
  check_plan(plan, /*alpha_sweep=*/true);
  const int workers = resolve_workers(plan.workers);
  std::vector<BerRecord> records;
  for (std::size_t ci = 0; ci < plan.curves.size(); ++ci) {
    const Curve& curve = plan.curves[ci];
    if (!curve.system.power_profile.empty())
      throw ConfigError("curve '" + curve.label +
                        "': alpha sweeps use the default power profile");
    for (std::size_t pi = 0; pi < plan.alpha_grid.size(); ++pi) {
      const double alpha = plan.alpha_grid[pi];
      const double k_real = alpha * curve.system.N;
      const int K = static_cast<int>(std::lround(k_real));
      if (K < 1 || std::abs(k_real - K) > 1e-9)
        throw ConfigError("curve '" + curve.label + "': alpha = " + std::to_string(alpha) +
                          " gives non-integral K = alpha * N");
      PointContext ctx;
      ctx.system = curve.system;
      ctx.system.K = K;
      ctx.system.validate();
      ctx.detector = curve.detector;
      ctx.snr_db = plan.fixed_snr_db;
      ctx.sigma2 = snr_to_noise_variance(ctx.snr_db, ctx.system);
      ctx.x = alpha;
      ctx.master_seed = plan.master_seed;
      ctx.curve_idx = ci;
      ctx.point_idx = pi;
      records.push_back(run_point(ctx, plan.stopping, workers, curve.label));
    }
  }
  check_erasures(records);
  return records;
}

OpCountReport run_complexity_sweep(const TrialPlan& plan) {
  const std::vector<BerRecord> records = run_alpha_sweep(plan);
  OpCountReport report;
  for (const auto& r : records)
    report.entries.push_back({r.curve, r.x, r.mean_ops, r.mean_iters});
  return report;
}

}  // namespace smmimo
