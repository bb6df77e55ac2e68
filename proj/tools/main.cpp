// smmimo: uplink detection simulator for multiuser SM-MIMO and massive MIMO.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bundled_scenarios.hpp"
#include "smmimo/errors.hpp"
#include "smmimo/experiment.hpp"

namespace {

using smmimo::ConfigError;

std::string scenario_text(const std::string& arg, std::string& source_name) {
  for (const auto& [name, text] : k_bundled_scenarios) {
    if (arg == name) {
      source_name = std::string(name);
      return std::string(text);
    }
  }
  std::ifstream in(arg);
  if (!in) throw ConfigError("cannot read config '" + arg + "' (not a file or bundled scenario)");
  std::ostringstream buf;
  buf << in.rdbuf();
  source_name = arg;
  return buf.str();
}

std::string first_comment_line(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) return line.substr(2);
    if (!line.empty() && line[0] != '#') break;
  }
  return "";
}

std::string default_out_dir() {
  const char* env = std::getenv("SMMIMO_OUT_DIR");
  return env && *env ? env : ".";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uplink detection simulator: spatial-modulation MIMO vs massive MIMO"};
  app.require_subcommand(1);

  std::string config_arg, out_dir = default_out_dir();
  int workers = -1;
  std::int64_t seed = -1;

  auto* run = app.add_subcommand("run", "Run a sweep and write CSV + metadata");
  run->add_option("config", config_arg, "Config file path or bundled scenario name")->required();
  run->add_option("--workers", workers, "Worker threads (0 = hardware concurrency)");
  run->add_option("--seed", seed, "Master seed override");
  run->add_option("--out", out_dir, "Output directory (default: $SMMIMO_OUT_DIR or .)");

  auto* validate = app.add_subcommand("validate", "Check a config and print derived quantities");
  validate->add_option("config", config_arg, "Config file path or bundled scenario name")
      ->required();

  auto* list = app.add_subcommand("list-scenarios", "List bundled scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const auto& [name, text] : k_bundled_scenarios)
        std::cout << name << "  " << first_comment_line(text) << "\n";
      return 0;
    }

    std::string source_name;
    const std::string text = scenario_text(config_arg, source_name);
    smmimo::ExperimentConfig cfg = smmimo::parse_experiment(text, source_name);

    if (validate->parsed()) {
      std::cout << smmimo::describe_experiment(cfg);
      std::cout << "ok\n";
      return 0;
    }

    if (workers >= 0) cfg.plan.workers = workers;
    if (seed >= 0) cfg.plan.master_seed = static_cast<std::uint64_t>(seed);
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";

    const smmimo::RunOutput out = smmimo::run_experiment(cfg, out_dir);
    for (const auto& r : out.records)
      std::cout << r.curve << " x=" << r.x << " ber=" << r.ber << " (" << r.errors << "/"
                << r.bits << " bits, " << r.trials << " trials)"
                << " mean_ops=" << r.mean_ops << " mean_iters=" << r.mean_iters << "\n";
    std::cout << "wrote " << out.csv_path.string() << "\n";
    std::cout << "wrote " << out.meta_path.string() << "\n";
    std::cout << "wall time: " << out.wall_seconds << " s\n";
    return 0;
  } catch (const ConfigError& e) {
    for (const auto& m : e.messages()) std::cerr << "error: " << m << "\n";
    return 2;
  } catch (const smmimo::SimError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
