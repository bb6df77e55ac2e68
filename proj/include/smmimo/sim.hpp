#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smmimo/channel.hpp"
#include "smmimo/detect.hpp"

namespace smmimo {

enum class DetectorKind { Mmse, Mpd, Lsd, Hybrid, Sphere, Brute };

std::string detector_kind_name(DetectorKind kind);

struct DetectorSpec {
  DetectorKind kind = DetectorKind::Mmse;
  MpdOptions mpd;                                 // message passing / hybrid stage 1
  int restarts = 2;                               // local search: MMSE initial + random initials
  std::uint64_t bf_cap = std::uint64_t{1} << 24;  // brute-force candidate cap
};

struct Curve {
  std::string label;    // CSV "detector" column; must be unique within a plan
  SystemConfig system;  // K is a template value for alpha sweeps (overridden per point)
  DetectorSpec detector;
};

struct StoppingRule {
  std::int64_t min_bit_errors = 100;  // stop a point once this many errors accumulate
  std::int64_t max_trials = 10'000'000;
};

struct TrialPlan {
  std::vector<Curve> curves;
  std::vector<double> snr_grid_db;  // exactly one of the two grids may be non-empty
  std::vector<double> alpha_grid;
  double fixed_snr_db = 9.0;  // operating SNR for alpha sweeps
  std::uint64_t master_seed = 1;
  StoppingRule stopping;
  int workers = 1;                    // 0 = hardware concurrency
  bool new_channel_per_trial = true;  // quasi-static fading, fresh H every channel use
};

struct BerRecord {
  std::string curve;
  double x = 0;  // snr_db or alpha
  std::int64_t trials = 0;
  std::int64_t bits = 0;
  std::int64_t errors = 0;
  std::int64_t erasures = 0;
  double ber = 0;
  double ci_halfwidth = 0;  // binomial 95% confidence half-width on ber
  double mean_ops = 0;      // complex multiply-accumulate units per detection
  double mean_iters = 0;    // message iterations / descent steps / tree nodes
  // Diagnostics (metadata sidecar, not CSV):
  double measured_snr_db = 0;          // from accumulated ||Hx||^2, convention guard
  double max_message_sum_error = 0;    // message passing only
  double min_variance_margin = 0;      // min sigma2_ik - sigma2 seen; < 0 is a bug
  std::int64_t variance_clamps = 0;
  bool hit_min_errors = false;
};

struct OpCountEntry {
  std::string curve;
  double alpha = 0;
  double mean_ops = 0;
  double mean_iters = 0;
};

struct OpCountReport {
  std::vector<OpCountEntry> entries;
};

/// BER vs SNR. Per grid point and curve, repeats {draw H, draw bits, map,
/// transmit, detect, demap, count} until the stopping rule fires. Trials run
/// in fixed-size batches with per-slot result storage reduced in trial order,
/// so records are bit-identical for any worker count. Throws SimError if more
/// than 0.1% of a sweep's trials are erased by detector failures.
std::vector<BerRecord> run_ber_sweep(const TrialPlan& plan);

/// BER vs loading factor at fixed SNR; K = alpha * N per point (must be
/// integral). Curves keep their n_t/alphabet/N; the power profile must be
/// the default (all ones).
std::vector<BerRecord> run_alpha_sweep(const TrialPlan& plan);

/// Mean operation counts per detection across the alpha grid (runs the same
/// trials as run_alpha_sweep and summarizes the tallies).
OpCountReport run_complexity_sweep(const TrialPlan& plan);

}  // namespace smmimo
