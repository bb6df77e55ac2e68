#include "smmimo/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "smmimo/errors.hpp"

namespace smmimo {
namespace {

struct KeyVal {
  std::string value;
  int line = 0;
  bool used = false;
};

struct Section {
  std::string kind;   // "", "grid", "stopping", "curve"
  std::string label;  // curve label
  int line = 0;
  std::map<std::string, KeyVal> keys;
  std::vector<std::string> order;  // key insertion order (error reporting)
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Parser {
 public:
  Parser(const std::string& text, std::string source) : src_(std::move(source)) {
    split_sections(text);
  }

  ExperimentConfig parse() {
    ExperimentConfig cfg;
    cfg.scenario = take_top("scenario").value_or(default_scenario());
    cfg.sweep = parse_sweep();
    cfg.plan.master_seed = take_u64_top("seed").value_or(1);
    cfg.plan.workers = static_cast<int>(take_u64_top("workers").value_or(0));
    parse_grid(cfg);
    parse_stopping(cfg);
    parse_curves(cfg);
    finish_unknown_keys();
    if (!errors_.empty()) throw ConfigError(errors_);
    cross_checks(cfg);
    if (!errors_.empty()) throw ConfigError(errors_);
    return cfg;
  }

 private:
  std::string src_;
  std::vector<Section> sections_;
  std::vector<std::string> errors_;

  void fail(int line, const std::string& msg) {
    errors_.push_back(src_ + ":" + std::to_string(line) + ": " + msg);
  }
  void fail(const std::string& msg) { errors_.push_back(src_ + ": " + msg); }

  std::string default_scenario() const {
    const auto slash = src_.find_last_of("/\\");
    std::string base = slash == std::string::npos ? src_ : src_.substr(slash + 1);
    const auto dot = base.rfind('.');
    if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
    return base.empty() ? "experiment" : base;
  }

  void split_sections(const std::string& text) {
    sections_.push_back(Section{});  // top level
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      const std::string s = trim(raw);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') {
          fail(line, "unterminated section header");
          continue;
        }
        const std::string inner = trim(s.substr(1, s.size() - 2));
        Section sec;
        sec.line = line;
        if (inner == "grid" || inner == "stopping") {
          sec.kind = inner;
        } else if (inner.rfind("curve", 0) == 0) {
          sec.kind = "curve";
          sec.label = trim(inner.substr(5));
          if (sec.label.empty()) fail(line, "curve section needs a label: [curve <label>]");
        } else {
          fail(line, "unknown section [" + inner + "] (expected [grid], [stopping], or [curve <label>])");
          sec.kind = "ignored";
        }
        sections_.push_back(std::move(sec));
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        fail(line, "expected 'key = value', got '" + s + "'");
        continue;
      }
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (key.empty()) {
        fail(line, "empty key");
        continue;
      }
      Section& sec = sections_.back();
      if (sec.keys.count(key)) {
        fail(line, "duplicate key '" + key + "'");
        continue;
      }
      sec.keys[key] = KeyVal{value, line, false};
      sec.order.push_back(key);
    }
  }

  Section* find_section(const std::string& kind) {
    for (auto& s : sections_)
      if (s.kind == kind) return &s;
    return nullptr;
  }

  std::optional<KeyVal> take(Section& sec, const std::string& key) {
    auto it = sec.keys.find(key);
    if (it == sec.keys.end()) return std::nullopt;
    it->second.used = true;
    return it->second;
  }

  std::optional<std::string> take_top(const std::string& key) {
    auto kv = take(sections_.front(), key);
    if (!kv) return std::nullopt;
    return kv->value;
  }

  std::optional<double> parse_double(const KeyVal& kv, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(kv.value.c_str(), &end);
    if (end == kv.value.c_str() || *end != '\0' || !std::isfinite(v)) {
      fail(kv.line, "key '" + key + "': expected a number, got '" + kv.value + "'");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::int64_t> parse_int(const KeyVal& kv, const std::string& key) {
    auto v = parse_double(kv, key);
    if (!v) return std::nullopt;
    if (std::abs(*v - std::llround(*v)) > 1e-9) {
      fail(kv.line, "key '" + key + "': expected an integer, got '" + kv.value + "'");
      return std::nullopt;
    }
    return std::llround(*v);
  }

  std::optional<std::uint64_t> take_u64_top(const std::string& key) {
    auto kv = take(sections_.front(), key);
    if (!kv) return std::nullopt;
    auto v = parse_int(*kv, key);
    if (!v || *v < 0) {
      if (v) fail(kv->line, "key '" + key + "' must be >= 0");
      return std::nullopt;
    }
    return static_cast<std::uint64_t>(*v);
  }

  // "a,b,c" or "start:stop:step" (inclusive).
  std::vector<double> parse_list(const KeyVal& kv, const std::string& key) {
    std::vector<double> out;
    const std::string& v = kv.value;
    if (v.find(':') != std::string::npos) {
      double a = 0, b = 0, s = 0;
      char extra = 0;
      if (std::sscanf(v.c_str(), "%lf:%lf:%lf%c", &a, &b, &s, &extra) != 3 || s <= 0 || b < a) {
        fail(kv.line, "key '" + key + "': range must be start:stop:step with step > 0");
        return out;
      }
      for (double x = a; x <= b + 1e-9; x += s) out.push_back(x);
      return out;
    }
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (item.empty()) {
        fail(kv.line, "key '" + key + "': empty list entry");
        continue;
      }
      char* end = nullptr;
      const double x = std::strtod(item.c_str(), &end);
      if (end == item.c_str() || *end != '\0' || !std::isfinite(x)) {
        fail(kv.line, "key '" + key + "': bad number '" + item + "'");
        continue;
      }
      out.push_back(x);
    }
    return out;
  }

  SweepKind parse_sweep() {
    auto kv = take(sections_.front(), "sweep");
    if (!kv) return SweepKind::Snr;
    if (kv->value == "snr") return SweepKind::Snr;
    if (kv->value == "alpha") return SweepKind::Alpha;
    fail(kv->line, "sweep must be 'snr' or 'alpha', got '" + kv->value + "'");
    return SweepKind::Snr;
  }

  void parse_grid(ExperimentConfig& cfg) {
    Section* grid = find_section("grid");
    if (!grid) {
      fail("missing [grid] section");
      return;
    }
    auto snr = take(*grid, "snr_db");
    auto alpha = take(*grid, "alpha");
    if (cfg.sweep == SweepKind::Snr) {
      if (alpha) fail(alpha->line, "SNR sweeps must not define an alpha grid");
      if (!snr) {
        fail(grid->line, "SNR sweep needs 'snr_db' in [grid]");
        return;
      }
      cfg.plan.snr_grid_db = parse_list(*snr, "snr_db");
      if (cfg.plan.snr_grid_db.empty()) fail(snr->line, "empty SNR grid");
    } else {
      if (!alpha) {
        fail(grid->line, "alpha sweep needs 'alpha' in [grid]");
        return;
      }
      cfg.plan.alpha_grid = parse_list(*alpha, "alpha");
      if (cfg.plan.alpha_grid.empty()) fail(alpha->line, "empty alpha grid");
      for (double a : cfg.plan.alpha_grid)
        if (!(a > 0)) fail(alpha->line, "alpha values must be > 0");
      if (!snr) {
        fail(grid->line, "alpha sweep needs a single operating 'snr_db' in [grid]");
      } else {
        const auto pts = parse_list(*snr, "snr_db");
        if (pts.size() != 1)
          fail(snr->line, "alpha sweeps take exactly one snr_db operating point");
        else
          cfg.plan.fixed_snr_db = pts[0];
      }
    }
  }

  void parse_stopping(ExperimentConfig& cfg) {
    Section* stop = find_section("stopping");
    if (!stop) return;  // defaults apply
    if (auto kv = take(*stop, "min_bit_errors")) {
      if (auto v = parse_int(*kv, "min_bit_errors")) {
        if (*v < 0)
          fail(kv->line, "min_bit_errors must be >= 0");
        else
          cfg.plan.stopping.min_bit_errors = *v;
      }
    }
    if (auto kv = take(*stop, "max_trials")) {
      if (auto v = parse_int(*kv, "max_trials")) {
        if (*v < 1)
          fail(kv->line, "max_trials must be >= 1");
        else
          cfg.plan.stopping.max_trials = *v;
      }
    }
  }

  void parse_curves(ExperimentConfig& cfg) {
    bool any = false;
    for (auto& sec : sections_) {
      if (sec.kind != "curve") continue;
      any = true;
      parse_curve(cfg, sec);
    }
    if (!any) fail("no [curve <label>] sections defined");
  }

  void parse_curve(ExperimentConfig& cfg, Section& sec) {
    Curve curve;
    curve.label = sec.label;

    int n_t = 1, qam = 0, N = 0, K = 0;
    bool have_k = false;
    if (auto kv = take(sec, "N")) {
      if (auto v = parse_int(*kv, "N")) N = static_cast<int>(*v);
      if (N < 1) fail(kv->line, "N must be >= 1");
    } else {
      fail(sec.line, "curve '" + sec.label + "' needs N");
    }
    if (auto kv = take(sec, "K")) {
      have_k = true;
      if (auto v = parse_int(*kv, "K")) K = static_cast<int>(*v);
      if (K < 1) fail(kv->line, "K must be >= 1");
      if (cfg.sweep == SweepKind::Alpha)
        fail(kv->line, "alpha sweeps derive K from alpha * N; drop the K key");
    } else if (cfg.sweep == SweepKind::Snr) {
      fail(sec.line, "curve '" + sec.label + "' needs K");
    }
    if (auto kv = take(sec, "n_t")) {
      if (auto v = parse_int(*kv, "n_t")) n_t = static_cast<int>(*v);
      if (n_t < 1) fail(kv->line, "n_t must be >= 1");
    }
    if (auto kv = take(sec, "qam")) {
      if (auto v = parse_int(*kv, "qam")) qam = static_cast<int>(*v);
    } else {
      fail(sec.line, "curve '" + sec.label + "' needs qam (modulation order)");
    }

    DetectorSpec det;
    if (auto kv = take(sec, "detector")) {
      static const std::map<std::string, DetectorKind> kinds = {
          {"mmse", DetectorKind::Mmse},     {"mpd", DetectorKind::Mpd},
          {"lsd", DetectorKind::Lsd},       {"hybrid", DetectorKind::Hybrid},
          {"sphere", DetectorKind::Sphere}, {"brute", DetectorKind::Brute}};
      auto it = kinds.find(kv->value);
      if (it == kinds.end())
        fail(kv->line, "unknown detector '" + kv->value +
                           "' (expected mmse, mpd, lsd, hybrid, sphere, or brute)");
      else
        det.kind = it->second;
    } else {
      fail(sec.line, "curve '" + sec.label + "' needs a detector");
    }
    if (auto kv = take(sec, "iterations")) {
      if (auto v = parse_int(*kv, "iterations")) {
        if (*v < 1)
          fail(kv->line, "iterations must be >= 1");
        else
          det.mpd.iterations = static_cast<int>(*v);
      }
    }
    if (auto kv = take(sec, "damping")) {
      if (auto v = parse_double(*kv, "damping")) {
        if (!(*v > 0) || *v > 1)
          fail(kv->line, "damping must lie in (0, 1]");
        else
          det.mpd.damping = *v;
      }
    }
    if (auto kv = take(sec, "conv_tol")) {
      if (auto v = parse_double(*kv, "conv_tol")) {
        if (*v < 0)
          fail(kv->line, "conv_tol must be >= 0");
        else
          det.mpd.conv_tol = *v;
      }
    }
    if (auto kv = take(sec, "restarts")) {
      if (auto v = parse_int(*kv, "restarts")) {
        if (*v < 1)
          fail(kv->line, "restarts must be >= 1");
        else
          det.restarts = static_cast<int>(*v);
      }
    }

    std::vector<double> profile;
    if (auto kv = take(sec, "power_profile")) {
      if (cfg.sweep == SweepKind::Alpha) {
        fail(kv->line, "alpha sweeps use the default power profile");
      } else {
        profile = parse_list(*kv, "power_profile");
        if (have_k && static_cast<int>(profile.size()) != K)
          fail(kv->line, "power_profile needs exactly K = " + std::to_string(K) + " entries");
        double sum = 0;
        bool pos = true;
        for (double p : profile) {
          sum += p;
          pos = pos && p > 0;
        }
        if (!pos)
          fail(kv->line, "power_profile entries must be positive");
        else if (have_k && std::abs(sum - K) > 1e-9 * std::max(1, K))
          fail(kv->line, "power_profile must satisfy sum of sigma_k^2 = K (got " +
                             std::to_string(sum) + ")");
      }
    }

    if (det.kind == DetectorKind::Sphere && n_t != 1)
      fail(sec.line, "curve '" + sec.label + "': sphere decoding requires n_t = 1");

    try {
      curve.system.set = build_sm_signal_set(n_t, qam_alphabet(qam));
    } catch (const ConfigError& e) {
      fail(sec.line, "curve '" + sec.label + "': " + e.what());
      return;
    }
    curve.system.N = N;
    curve.system.K = cfg.sweep == SweepKind::Alpha ? 1 : K;  // template K for alpha sweeps
    curve.system.power_profile = std::move(profile);
    curve.detector = det;
    cfg.plan.curves.push_back(std::move(curve));
  }

  void finish_unknown_keys() {
    for (auto& sec : sections_) {
      if (sec.kind == "ignored") continue;
      for (const auto& key : sec.order) {
        const KeyVal& kv = sec.keys.at(key);
        if (kv.used) continue;
        const std::string where =
            sec.kind.empty()
                ? "at top level"
                : "in [" + sec.kind + (sec.label.empty() ? "" : " " + sec.label) + "]";
        fail(kv.line, "unknown key '" + key + "' " + where);
      }
    }
  }

  void cross_checks(ExperimentConfig& cfg) {
    if (cfg.plan.curves.empty()) return;
    // Loading-factor grids must give integral K >= 1 for every curve.
    if (cfg.sweep == SweepKind::Alpha) {
      for (const auto& curve : cfg.plan.curves)
        for (double a : cfg.plan.alpha_grid) {
          const double k_real = a * curve.system.N;
          const long k = std::lround(k_real);
          if (k < 1 || std::abs(k_real - k) > 1e-9)
            fail("curve '" + curve.label + "': alpha = " + std::to_string(a) +
                 " gives non-integral or zero K for N = " + std::to_string(curve.system.N));
        }
    }
    // Same-throughput comparison guard: warn when curves differ in rate.
    const int bpu0 = cfg.plan.curves.front().system.set.bits_per_use;
    for (const auto& curve : cfg.plan.curves)
      if (curve.system.set.bits_per_use != bpu0) {
        cfg.warnings.push_back("curves have unequal spectral efficiency (" +
                               std::to_string(bpu0) + " vs " +
                               std::to_string(curve.system.set.bits_per_use) +
                               " bits per channel use); comparison is not throughput-fair");
        break;
      }
  }
};

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

ExperimentConfig parse_experiment(const std::string& text, const std::string& source_name) {
  return Parser(text, source_name).parse();
}

std::string describe_experiment(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "scenario: " << cfg.scenario << "\n";
  out << "sweep: " << (cfg.sweep == SweepKind::Snr ? "snr" : "alpha") << "\n";
  out << "seed: " << cfg.plan.master_seed << "\n";
  out << "stopping: min_bit_errors=" << cfg.plan.stopping.min_bit_errors
      << " max_trials=" << cfg.plan.stopping.max_trials << "\n";
  for (const auto& curve : cfg.plan.curves) {
    const SystemConfig& sys = curve.system;
    out << "curve " << curve.label << ": N=" << sys.N << " n_t=" << sys.set.n_t << " "
        << sys.set.alphabet.name << " detector=" << detector_kind_name(curve.detector.kind)
        << "\n";
    out << "  bits_per_use=" << sys.set.bits_per_use
        << "  E_s=" << format_double("%g", sys.set.alphabet.average_energy)
        << "  |S|=" << sys.set.size() << "\n";
    if (cfg.sweep == SweepKind::Snr) {
      out << "  K=" << sys.K << "  alpha=" << format_double("%g", sys.alpha()) << "\n";
      for (double snr : cfg.plan.snr_grid_db)
        out << "  snr_db=" << format_double("%g", snr)
            << " -> sigma2=" << format_double("%.6g", snr_to_noise_variance(snr, sys)) << "\n";
    } else {
      for (double a : cfg.plan.alpha_grid) {
        SystemConfig point = sys;
        point.K = static_cast<int>(std::lround(a * sys.N));
        out << "  alpha=" << format_double("%g", a) << " -> K=" << point.K << "  sigma2("
            << format_double("%g", cfg.plan.fixed_snr_db)
            << " dB)=" << format_double("%.6g", snr_to_noise_variance(cfg.plan.fixed_snr_db, point))
            << "\n";
      }
    }
  }
  for (const auto& w : cfg.warnings) out << "warning: " << w << "\n";
  return out.str();
}

std::string records_to_csv(const std::string& scenario, SweepKind sweep,
                           const std::vector<BerRecord>& records) {
  std::ostringstream out;
  out << "scenario,detector," << (sweep == SweepKind::Snr ? "snr_db" : "alpha")
      << ",trials,bits,errors,ber,ci_halfwidth,mean_ops,mean_iters\n";
  for (const auto& r : records) {
    out << scenario << ',' << r.curve << ',' << format_double("%g", r.x) << ',' << r.trials << ','
        << r.bits << ',' << r.errors << ',' << format_double("%.8e", r.ber) << ','
        << format_double("%.8e", r.ci_halfwidth) << ',' << format_double("%.2f", r.mean_ops)
        << ',' << format_double("%.4f", r.mean_iters) << '\n';
  }
  return out.str();
}

RunOutput run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  out.records = cfg.sweep == SweepKind::Snr ? run_ber_sweep(cfg.plan) : run_alpha_sweep(cfg.plan);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::filesystem::create_directories(out_dir);
  out.csv_path = out_dir / (cfg.scenario + ".csv");
  out.meta_path = out_dir / (cfg.scenario + ".meta.json");

  {
    std::ofstream csv(out.csv_path);
    if (!csv) throw ConfigError("cannot write " + out.csv_path.string());
    csv << records_to_csv(cfg.scenario, cfg.sweep, out.records);
  }

  nlohmann::ordered_json meta;
  meta["scenario"] = cfg.scenario;
  meta["sweep"] = cfg.sweep == SweepKind::Snr ? "snr" : "alpha";
  meta["seed"] = cfg.plan.master_seed;
  meta["workers"] = cfg.plan.workers;
  meta["wall_seconds"] = out.wall_seconds;
  meta["versions"] = {{"library", "1.0.0"},
                      {"compiler", __VERSION__},
                      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)}};
  meta["stopping"] = {{"min_bit_errors", cfg.plan.stopping.min_bit_errors},
                      {"max_trials", cfg.plan.stopping.max_trials}};
  if (cfg.sweep == SweepKind::Snr) {
    meta["grid"] = cfg.plan.snr_grid_db;
  } else {
    meta["grid"] = cfg.plan.alpha_grid;
    meta["snr_db"] = cfg.plan.fixed_snr_db;
  }
  meta["curves"] = nlohmann::ordered_json::array();
  for (const auto& c : cfg.plan.curves) {
    nlohmann::ordered_json jc;
    jc["label"] = c.label;
    jc["N"] = c.system.N;
    if (cfg.sweep == SweepKind::Snr) jc["K"] = c.system.K;
    jc["n_t"] = c.system.set.n_t;
    jc["modulation"] = c.system.set.alphabet.name;
    jc["bits_per_use"] = c.system.set.bits_per_use;
    jc["detector"] = detector_kind_name(c.detector.kind);
    if (c.detector.kind == DetectorKind::Mpd || c.detector.kind == DetectorKind::Hybrid) {
      jc["iterations"] = c.detector.mpd.iterations;
      jc["damping"] = c.detector.mpd.damping;
      jc["conv_tol"] = c.detector.mpd.conv_tol;
    }
    if (c.detector.kind == DetectorKind::Lsd) jc["restarts"] = c.detector.restarts;
    meta["curves"].push_back(std::move(jc));
  }
  std::int64_t erasures = 0;
  meta["records"] = nlohmann::ordered_json::array();
  for (const auto& r : out.records) {
    erasures += r.erasures;
    nlohmann::ordered_json jr;
    jr["curve"] = r.curve;
    jr["x"] = r.x;
    jr["trials"] = r.trials;
    jr["erasures"] = r.erasures;
    jr["hit_min_errors"] = r.hit_min_errors;
    if (std::isfinite(r.measured_snr_db))
      jr["measured_snr_db"] = r.measured_snr_db;
    else
      jr["measured_snr_db"] = nullptr;
    jr["max_message_sum_error"] = r.max_message_sum_error;
    jr["variance_clamps"] = r.variance_clamps;
    jr["min_variance_margin"] = r.min_variance_margin;
    meta["records"].push_back(std::move(jr));
  }
  meta["erasures_total"] = erasures;

  std::ofstream js(out.meta_path);
  if (!js) throw ConfigError("cannot write " + out.meta_path.string());
  js << meta.dump(2) << "\n";
  return out;
}

}  // namespace smmimo
