#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "smmimo/sim.hpp"

namespace smmimo {

enum class SweepKind { Snr, Alpha };

/// A parsed experiment: the plan to run plus presentation metadata.
struct ExperimentConfig {
  std::string scenario;
  SweepKind sweep = SweepKind::Snr;
  TrialPlan plan;
  std::vector<std::string> warnings;  // non-fatal findings (e.g. unequal spectral efficiency)
};

/// Parse INI-style experiment text (see README for the schema). source_name
/// prefixes diagnostics as "source:line: message"; all problems are collected
/// and thrown together as one ConfigError.
ExperimentConfig parse_experiment(const std::string& text, const std::string& source_name);

/// Human-readable derived quantities: per-curve alpha, bits_per_use, E_s and
/// the noise variance at every grid point, plus any warnings.
std::string describe_experiment(const ExperimentConfig& cfg);

/// Stable CSV schema: scenario, detector, snr_db|alpha, trials, bits, errors,
/// ber, ci_halfwidth, mean_ops, mean_iters; one row per (curve, grid point).
std::string records_to_csv(const std::string& scenario, SweepKind sweep,
                           const std::vector<BerRecord>& records);

struct RunOutput {
  std::vector<BerRecord> records;
  std::filesystem::path csv_path;
  std::filesystem::path meta_path;
  double wall_seconds = 0;
};

/// Run the sweep and write <scenario>.csv + <scenario>.meta.json to out_dir
/// (created if missing).
RunOutput run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace smmimo
