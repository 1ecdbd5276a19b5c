#pragma once

// Batch commands behind the CLI. Each command computes rows and writes them;
// the row builders are exposed separately so tests can inspect the numbers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "iqscc/beamforming.hpp"
#include "iqscc/config.hpp"
#include "iqscc/detection.hpp"
#include "iqscc/errors.hpp"
#include "iqscc/sca.hpp"
#include "iqscc/scenario.hpp"

namespace iqscc {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failed_checks = 1;
inline constexpr int infeasible = 2;
inline constexpr int solver_failure = 3;
inline constexpr int config_error = 4;
}  // namespace exit_code

/// Fixed-precision number formatting shared by every CSV writer.
/// NaN is written as an empty field.
inline std::string fmt_num(double x) {
  if (std::isnan(x)) return "";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error("cannot open '" + path.string() + "' for writing");
    write(header);
  }
  void write(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// thermal

struct ThermalOptions {
  double f_min_hz = 1e9;
  double f_max_hz = 1e12;
  int points = 61;  // log-spaced
  std::vector<double> temperatures_k{0.0, 4.0, 77.0, 293.0};
  std::vector<double> extra_frequencies_hz{24e9};  // merged into the grid
};

struct ThermalRow {
  double frequency_hz;
  double temperature_k;
  double n_thermal;
};

inline std::vector<ThermalRow> thermal_rows(const ThermalOptions& o) {
  if (!(o.f_min_hz > 0.0 && o.f_max_hz >= o.f_min_hz) || o.points < 1) {
    throw ConfigError("thermal: need 0 < f_min <= f_max and points >= 1");
  }
  std::vector<double> freqs;
  for (int i = 0; i < o.points; ++i) {
    const double frac = o.points == 1 ? 0.0 : static_cast<double>(i) / (o.points - 1);
    freqs.push_back(o.f_min_hz * std::pow(o.f_max_hz / o.f_min_hz, frac));
  }
  for (double f : o.extra_frequencies_hz) {
    if (!(f > 0.0)) throw ConfigError("thermal: frequencies must be > 0");
    freqs.push_back(f);
  }
  std::sort(freqs.begin(), freqs.end());
  freqs.erase(std::unique(freqs.begin(), freqs.end()), freqs.end());
  std::vector<ThermalRow> rows;
  for (double temp : o.temperatures_k) {
    for (double f : freqs) rows.push_back({f, temp, thermal_photons(f, temp)});
  }
  return rows;
}

inline int cmd_thermal(const ThermalOptions& o, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  CsvWriter w(out_dir / "thermal.csv", {"frequency_hz", "temperature_k", "n_thermal"});
  for (const auto& r : thermal_rows(o)) w.write({fmt_num(r.frequency_hz), fmt_num(r.temperature_k), fmt_num(r.n_thermal)});
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// roc

struct DetectionEnv {
  int k = 1;
  double n_thermal = thermal_photons(24e9, 293.0);
  double eta = 1e-11;
};

struct RocOptions {
  std::vector<Protocol> protocols{Protocol::cw, Protocol::cs, Protocol::qi};
  double gamma_min_db = -20.0;
  double gamma_max_db = 20.0;
  double gamma_step_db = 0.5;
  std::vector<double> pf{1e-6};
  DetectionEnv env;
};

struct RocRow {
  double gamma_db;
  Protocol protocol;
  double pf;
  double pd;
  double kay_pd;     // NaN unless CW
  double marcum_pd;  // NaN unless CW
};

inline std::vector<double> db_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw ConfigError("invalid dB grid");
  std::vector<double> g;
  const auto n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i) g.push_back(lo + step * i);
  return g;
}

inline std::vector<RocRow> roc_rows(const RocOptions& o) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<RocRow> rows;
  for (Protocol p : o.protocols) {
    for (double pf : o.pf) {
      for (double gdb : db_grid(o.gamma_min_db, o.gamma_max_db, o.gamma_step_db)) {
        const double g = db_to_linear(gdb);
        RocRow r{gdb, p, pf, roc_pd(protocol_params(p, g, o.env.k, o.env.n_thermal, o.env.eta), pf), nan, nan};
        if (p == Protocol::cw) {
          // reference forms take the deflection SNR, twice the CW model's gamma
          r.kay_pd = kay_pd(2.0 * g, o.env.k, pf);
          r.marcum_pd = marcum_pd(2.0 * g, pf);
        }
        rows.push_back(r);
      }
    }
  }
  return rows;
}

inline int cmd_roc(const RocOptions& o, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  CsvWriter w(out_dir / "roc.csv", {"gamma_db", "protocol", "pf", "pd", "kay_pd", "marcum_pd"});
  for (const auto& r : roc_rows(o)) {
    w.write({fmt_num(r.gamma_db), to_string(r.protocol), fmt_num(r.pf), fmt_num(r.pd), fmt_num(r.kay_pd),
             fmt_num(r.marcum_pd)});
  }
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// required-sinr

struct RequiredSinrOptions {
  std::vector<Protocol> protocols{Protocol::cw, Protocol::cs, Protocol::qi};
  double pd_min = 1e-6;
  double pd_max = 0.99;
  int pd_points = 50;  // log-spaced
  double pf = 1e-6;
  DetectionEnv env;
};

struct RequiredSinrRow {
  double pd;
  Protocol protocol;
  double required_sinr_db;  // -inf when gamma = 0 suffices, NaN on error
  std::string status;       // ok | non_monotone | unattainable
};

inline std::vector<RequiredSinrRow> required_sinr_rows(const RequiredSinrOptions& o) {
  if (!(o.pd_min > 0.0 && o.pd_max < 1.0 && o.pd_min <= o.pd_max) || o.pd_points < 1) {
    throw ConfigError("required-sinr: need 0 < pd_min <= pd_max < 1 and pd_points >= 1");
  }
  std::vector<RequiredSinrRow> rows;
  for (Protocol p : o.protocols) {
    for (int i = 0; i < o.pd_points; ++i) {
      const double frac = o.pd_points == 1 ? 0.0 : static_cast<double>(i) / (o.pd_points - 1);
      const double pd = o.pd_min * std::pow(o.pd_max / o.pd_min, frac);
      RequiredSinrRow r{pd, p, std::numeric_limits<double>::quiet_NaN(), "ok"};
      try {
        r.required_sinr_db = linear_to_db(required_sinr(p, pd, o.pf, o.env.k, o.env.n_thermal, o.env.eta));
      } catch (const NonMonotoneError&) {
        r.status = "non_monotone";
      } catch (const UnattainableError&) {
        r.status = "unattainable";
      }
      rows.push_back(r);
    }
  }
  return rows;
}

inline int cmd_required_sinr(const RequiredSinrOptions& o, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  CsvWriter w(out_dir / "required_sinr.csv", {"pd", "protocol", "pf", "required_sinr_db", "status"});
  for (const auto& r : required_sinr_rows(o)) {
    w.write({fmt_num(r.pd), to_string(r.protocol), fmt_num(o.pf), fmt_num(r.required_sinr_db), r.status});
  }
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// optimize

inline const char* mode_name(RadarMode m) { return to_string(m); }

inline RadarMode parse_mode(const std::string& s) {
  if (s == "conventional") return RadarMode::conventional;
  if (s == "iqscc") return RadarMode::iqscc;
  throw ConfigError("unknown mode '" + s + "' (expected conventional or iqscc)");
}

inline int exit_code_for(ScaStatus s) {
  switch (s) {
    case ScaStatus::converged: return exit_code::ok;
    case ScaStatus::infeasible: return exit_code::infeasible;
    case ScaStatus::max_iterations:
    case ScaStatus::solver_failure: return exit_code::solver_failure;
  }
  return exit_code::solver_failure;
}

inline ProblemSpec problem_spec(const RunConfig& cfg, RadarMode mode) {
  ProblemSpec spec;
  spec.scenario = to_scenario(cfg);
  spec.channels = build_channels(spec.scenario);
  spec.rho_s = rho_s(cfg, mode);
  spec.mode = mode;
  spec.options = cfg.sca;
  return spec;
}

inline void write_convergence_csv(const std::filesystem::path& path, const SCATrace& trace) {
  CsvWriter w(path, {"iter", "surrogate_bps_hz", "sum_rate_bps_hz", "dl_rate_bps_hz", "ul_rate_bps_hz",
                     "radar_sinr_db", "feasible", "solver_status"});
  for (const auto& r : trace) {
    w.write({std::to_string(r.iter), fmt_num(r.surrogate), fmt_num(r.sum_rate), fmt_num(r.dl_rate),
             fmt_num(r.ul_rate), fmt_num(r.radar_sinr_db), (r.radar_feasible && r.budget_feasible) ? "1" : "0",
             r.solver_status});
  }
}

inline json matrix_json(const HermitianMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.dim(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.dim(); ++j) row.push_back({m.matrix()(i, j).real(), m.matrix()(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline json eigenvalues_desc(const HermitianMatrix& m) {
  Eigen::VectorXd ev = m.eigenvalues();
  std::vector<double> v(ev.data(), ev.data() + ev.size());
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

inline json design_report(const RunConfig& cfg, RadarMode mode, double rho, const ScaResult& r) {
  json j;
  j["mode"] = mode_name(mode);
  j["seed"] = cfg.seed;
  j["status"] = to_string(r.status);
  j["message"] = r.message;
  j["rho_s_db"] = linear_to_db(rho);
  j["iterations"] = r.trace.empty() ? 0 : r.trace.back().iter;
  j["restoration_iterations"] = r.restoration_iters;
  j["sum_rate_bps_hz"] = r.sum_rate;
  j["radar_sinr_db"] = linear_to_db(r.radar_sinr);
  j["p_watt"] = r.design.p;
  const Rank1 r1 = extract_rank1(r.design.v_c);
  j["rank1_gap"] = r1.gap;
  json v = json::array();
  for (Eigen::Index i = 0; i < r1.v.size(); ++i) v.push_back({r1.v(i).real(), r1.v(i).imag()});
  j["dl_beamformer"] = v;
  j["v_s"] = {{"eigenvalues", eigenvalues_desc(r.design.v_s)}, {"matrix", matrix_json(r.design.v_s)}};
  j["v_c"] = {{"eigenvalues", eigenvalues_desc(r.design.v_c)}, {"matrix", matrix_json(r.design.v_c)}};
  return j;
}

struct OptimizeOutcome {
  RadarMode mode;
  double rho_s = 0.0;
  ScaResult result;
};

inline OptimizeOutcome run_optimize(const RunConfig& cfg, RadarMode mode) {
  const ProblemSpec spec = problem_spec(cfg, mode);
  return {mode, spec.rho_s, run_sca(spec)};
}

inline void write_optimize_outputs(const RunConfig& cfg, const OptimizeOutcome& o, const std::filesystem::path& dir) {
  ensure_dir(dir);
  const std::string m = mode_name(o.mode);
  const auto& fm = cfg.output.formats;
  if (std::find(fm.begin(), fm.end(), "csv") != fm.end()) {
    write_convergence_csv(dir / ("convergence_" + m + ".csv"), o.result.trace);
  }
  if (std::find(fm.begin(), fm.end(), "json") != fm.end()) {
    write_text(dir / ("design_" + m + ".json"), design_report(cfg, o.mode, o.rho_s, o.result).dump(2) + "\n");
  }
}

/// Worst exit code wins: solver failure > infeasible > ok.
inline int combine_exit(int a, int b) { return std::max(a, b); }

inline int cmd_optimize(const RunConfig& cfg, const std::vector<RadarMode>& modes, const std::filesystem::path& out_dir,
                        std::ostream& log) {
  int code = exit_code::ok;
  for (RadarMode m : modes) {
    const OptimizeOutcome o = run_optimize(cfg, m);
    write_optimize_outputs(cfg, o, out_dir);
    log << mode_name(m) << ": " << to_string(o.result.status) << ", sum rate " << fmt_num(o.result.sum_rate)
        << " bps/Hz, radar SINR " << fmt_num(linear_to_db(o.result.radar_sinr)) << " dB (threshold "
        << fmt_num(linear_to_db(o.rho_s)) << " dB)";
    if (o.result.status != ScaStatus::converged) log << ": " << o.result.message;
    log << '\n';
    code = combine_exit(code, exit_code_for(o.result.status));
  }
  return code;
}

/// Independent runs over seeds seed, seed+1, ... and optional rho_s overrides,
/// fanned across a worker pool. Run i writes into <out>/seed_<n>[/rho_<x>db]/;
/// the summary is written afterwards in job order, so it does not depend on scheduling.
inline int cmd_optimize_sweep(const RunConfig& cfg, const std::vector<RadarMode>& modes,
                              const std::filesystem::path& out_dir, int n_seeds, unsigned threads,
                              const std::vector<double>& rho_s_db = {}) {
  if (n_seeds < 1) throw ConfigError("sweep: number of seeds must be >= 1");
  ensure_dir(out_dir);
  struct Job {
    RunConfig cfg;
    RadarMode mode;
    std::filesystem::path dir;
    OptimizeOutcome outcome;
  };
  std::vector<Job> jobs;
  for (int i = 0; i < n_seeds; ++i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    const std::filesystem::path seed_dir = out_dir / ("seed_" + std::to_string(seed));
    for (RadarMode m : modes) {
      RunConfig c = cfg;
      c.seed = seed;
      if (rho_s_db.empty()) {
        jobs.push_back({c, m, seed_dir, {}});
        continue;
      }
      for (double r : rho_s_db) {
        RunConfig cr = c;
        RadarThresholdConfig& t = m == RadarMode::conventional ? cr.conventional : cr.iqscc;
        t = RadarThresholdConfig{r, std::nullopt};
        jobs.push_back({cr, m, seed_dir / ("rho_" + fmt_num(r) + "db"), {}});
      }
    }
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::string first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        jobs[i].outcome = run_optimize(jobs[i].cfg, jobs[i].mode);
        write_optimize_outputs(jobs[i].cfg, jobs[i].outcome, jobs[i].dir);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!first_error.empty()) throw Error("sweep failed: " + first_error);

  int code = exit_code::ok;
  CsvWriter w(out_dir / "sweep_summary.csv",
              {"seed", "mode", "rho_s_db", "status", "iterations", "sum_rate_bps_hz", "radar_sinr_db"});
  for (const auto& j : jobs) {
    const auto& r = j.outcome.result;
    w.write({std::to_string(j.cfg.seed), mode_name(j.mode), fmt_num(linear_to_db(j.outcome.rho_s)),
             to_string(r.status), std::to_string(r.trace.empty() ? 0 : r.trace.back().iter), fmt_num(r.sum_rate),
             fmt_num(linear_to_db(r.radar_sinr))});
    code = combine_exit(code, exit_code_for(r.status));
  }
  return code;
}

// ---------------------------------------------------------------------------
// beampattern

inline HermitianMatrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError("design file: '" + what + "' is not a matrix");
  const auto n = static_cast<Eigen::Index>(j.size());
  CMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw ConfigError("design file: '" + what + "' is not square");
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const json& e = row[static_cast<std::size_t>(k)];
      if (!e.is_array() || e.size() != 2) throw ConfigError("design file: complex entries must be [re, im]");
      m(i, k) = {e[0].get<double>(), e[1].get<double>()};
    }
  }
  return HermitianMatrix(m);
}

struct BeampatternRow {
  double angle_deg;
  double comm_gain_db;
  double sens_gain_db;
};

inline std::vector<BeampatternRow> beampattern_rows(const HermitianMatrix& v_c, const HermitianMatrix& v_s,
                                                    const std::vector<double>& grid) {
  const auto c = beampattern_gain(v_c, grid);
  const auto s = beampattern_gain(v_s, grid);
  std::vector<BeampatternRow> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) rows.push_back({grid[i], c[i].gain_db, s[i].gain_db});
  return rows;
}

inline int cmd_beampattern(RadarMode mode, const std::filesystem::path& design_path,
                           const std::filesystem::path& out_dir, int points = 721) {
  std::ifstream in(design_path);
  if (!in) {
    throw ConfigError("beampattern: design file '" + design_path.string() + "' not found; run optimize first");
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("beampattern: cannot parse '" + design_path.string() + "': " + e.what());
  }
  if (!j.contains("v_s") || !j.contains("v_c")) throw ConfigError("beampattern: design file lacks v_s / v_c");
  const HermitianMatrix v_s = matrix_from_json(j["v_s"]["matrix"], "v_s");
  const HermitianMatrix v_c = matrix_from_json(j["v_c"]["matrix"], "v_c");
  ensure_dir(out_dir);
  CsvWriter w(out_dir / ("beampattern_" + std::string(mode_name(mode)) + ".csv"),
              {"angle_deg", "comm_gain_db", "sens_gain_db"});
  for (const auto& r : beampattern_rows(v_c, v_s, default_beampattern_grid(points))) {
    w.write({fmt_num(r.angle_deg), fmt_num(r.comm_gain_db), fmt_num(r.sens_gain_db)});
  }
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// validate

/// Replaceable formula entry points, so a test can inject a broken formula and
/// confirm the suite notices.
struct ValidationHooks {
  std::function<double(const RadarProtocolParams&, double)> roc_pd = [](const RadarProtocolParams& p, double pf) {
    return iqscc::roc_pd(p, pf);
  };
  std::function<RadarProtocolParams(double, int)> cw_params = [](double g, int k) { return iqscc::cw_params(g, k); };
  std::function<RadarProtocolParams(double, double, int)> cs_params = [](double g, double n, int k) {
    return iqscc::cs_params(g, n, k);
  };
  std::function<RadarProtocolParams(double, double, double, int)> qi_params = [](double g, double n, double e, int k) {
    return iqscc::qi_params(g, n, e, k);
  };
  std::function<double(double, double)> thermal_photons = [](double f, double t) {
    return iqscc::thermal_photons(f, t);
  };
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // the measured quantity (error, ratio, ...)
  double tolerance = 0.0;  // pass threshold on value
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
  json to_json() const {
    json j;
    j["all_passed"] = all_passed();
    j["checks"] = json::array();
    for (const auto& c : checks) {
      j["checks"].push_back(
          {{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance}, {"detail", c.detail}});
    }
    return j;
  }
};

struct ValidateOptions {
  std::uint64_t mc_trials = 1000000;
  int random_scenarios = 100;
  int random_beamformers = 1000;
  unsigned threads = 1;
  bool run_sca = true;
};

namespace validate_detail {

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline CMatrix random_cmatrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  CMatrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = {nd(rng), nd(rng)};
  return m;
}

}  // namespace validate_detail

inline ValidationReport run_validation(const RunConfig& cfg, const ValidationHooks& h = {},
                                       const ValidateOptions& vo = {}) {
  using namespace validate_detail;
  ValidationReport rep;
  auto add = [&](std::string name, double value, double tol, bool passed, std::string detail = {}) {
    rep.checks.push_back({std::move(name), passed, value, tol, std::move(detail)});
  };
  auto rng = make_rng(cfg.seed, RngStream::validation);

  // Thermal photons at 24 GHz / 293 K.
  const double n_n = h.thermal_photons(24e9, 293.0);
  add("thermal_photons_24ghz_293k", n_n, 0.5, std::abs(n_n - 253.9) <= 0.5);

  // Kay identity over a (gamma, K, pf) grid.
  {
    double worst = 0.0;
    for (double gdb : {-10.0, -5.0, 0.0, 5.0, 10.0})
      for (int k : {1, 4, 16, 64, 256})
        for (double pf : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
          const double g = db_to_linear(gdb);
          worst = std::max(worst, std::abs(h.roc_pd(h.cw_params(g, k), pf) - kay_pd(2.0 * g, k, pf)));
        }
    add("cw_kay_identity", worst, 1e-12, worst <= 1e-12);
  }

  // CS / CW amplitude ratio.
  {
    double worst = 0.0;
    for (double nn : {0.1, 1.0, 10.0, 253.9, 1e4, 1e6})
      for (double gdb : {-10.0, 0.0, 10.0}) {
        const double g = db_to_linear(gdb);
        const double ratio = h.cs_params(g, nn, 4).a2 / h.cw_params(g, 4).a2;
        worst = std::max(worst, std::abs(ratio - std::sqrt(2.0 * nn / (2.0 * nn + 1.0))));
      }
    add("cs_cw_ratio", worst, 1e-12, worst <= 1e-12);
  }

  // QI closed forms against the Gaussian moment oracle.
  {
    double worst_moments = 0.0, worst_params = 0.0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const double n_q = std::pow(10.0, -4.0 + 6.0 * u(rng));
      const double eta = std::pow(10.0, -6.0 + 5.7 * u(rng));
      const double nn = std::pow(10.0, -2.0 + 6.0 * u(rng));
      const int k = 1 + static_cast<int>(16.0 * u(rng));
      const QiMoments m = qi_moment_oracle(n_q, eta, nn);
      const double mean_cf = 4.0 * std::sqrt(eta * n_q * (n_q + 1.0));
      const double var_cf = 4.0 * (n_q * (4.0 * eta * n_q + 3.0 * eta + 2.0 * nn + 1.0) + nn + 1.0);
      worst_moments = std::max({worst_moments, rel_err(m.mean_h1, mean_cf), rel_err(m.var_h1, var_cf)});
      const RadarProtocolParams p = h.qi_params(eta * n_q / nn, nn, eta, k);
      const double a1 = std::sqrt(m.var_h1 / m.var_h0);
      const double a2 = m.mean_h1 * std::sqrt(static_cast<double>(k)) / std::sqrt(m.second_moment_h1);
      worst_params = std::max({worst_params, rel_err(p.a1, a1), rel_err(p.a2, a2)});
    }
    add("qi_moment_oracle_closed_forms", worst_moments, 1e-9, worst_moments <= 1e-9);
    add("qi_params_vs_oracle", worst_params, 1e-9, worst_params <= 1e-9,
        "printed forms read as A1 = sigma1/sigma0, A2 = mu1 sqrt(K)/sqrt(<c^2>_H1)");
  }

  // Low-photon QI advantage.
  {
    const double nn = 253.9, eta = 0.01, n_q = 1e-4;
    const double g = eta * n_q / nn;
    const double ratio = std::pow(h.qi_params(g, nn, eta, 1).a2, 2) / std::pow(h.cs_params(g, nn, 1).a2, 2);
    const double target = (2.0 * nn + 1.0) / (nn + 1.0);
    add("qi_low_photon_advantage", rel_err(ratio, target), 0.01, rel_err(ratio, target) <= 0.01);
  }

  // Monte Carlo ROC.
  {
    double worst_sigma = 0.0;
    std::uint32_t shard_seed = 0;
    for (double gdb : {-3.0, 0.0, 3.0})
      for (double pf : {1e-2, 1e-3}) {
        const RadarProtocolParams p = h.cw_params(db_to_linear(gdb), 16);
        const McResult r = mc_validate(p, pf, 16, vo.mc_trials, cfg.seed * 1000 + shard_seed++, vo.threads);
        const double pd = h.roc_pd(p, pf);
        const double sigma = std::sqrt(pd * (1.0 - pd) / static_cast<double>(vo.mc_trials));
        worst_sigma = std::max(worst_sigma, std::abs(r.pd_hat - pd) / sigma);
      }
    add("monte_carlo_roc", worst_sigma, 4.0, worst_sigma <= 4.0, "worst deviation in binomial sigmas");
  }

  // Receive beamformer optimality on random instances.
  {
    bool dominates = true;
    double worst_closed = 0.0;
    for (int s = 0; s < vo.random_scenarios; ++s) {
      const int n = 8;
      ChannelSet ch;
      ch.g = random_cmatrix(rng, n, 1, 1.0).col(0);
      ch.h = random_cmatrix(rng, n, 1, 1.0).col(0);
      ch.h_si = random_cmatrix(rng, n, n, 0.3);
      ch.b = ch.h_si;
      ch.c = ch.b + response_matrix(0.0, n, n);
      const CMatrix a = random_cmatrix(rng, n, n, 1.0);
      const CMatrix b = random_cmatrix(rng, n, n, 1.0);
      const TransmitDesign d{HermitianMatrix(a * a.adjoint() / (2.0 * n)), HermitianMatrix(b * b.adjoint() / (2.0 * n)),
                             0.5};
      const double s_opt = sinr_radar(opt_rx_radar(d, ch, 1.0, 0.0), d, ch, 1.0, 0.0, 1.0);
      const double u_opt = sinr_ul(opt_rx_ul(d, ch, 1.0), d, ch, 1.0);
      worst_closed = std::max({worst_closed, rel_err(s_opt, sinr_radar_opt(d, ch, 1.0, 0.0, 1.0)),
                               rel_err(u_opt, sinr_ul_opt(d, ch, 1.0))});
      for (int i = 0; i < vo.random_beamformers; ++i) {
        const CVector u = random_cmatrix(rng, n, 1, 1.0).col(0);
        if (sinr_radar(u, d, ch, 1.0, 0.0, 1.0) > s_opt * (1.0 + 1e-12)) dominates = false;
        if (sinr_ul(u, d, ch, 1.0) > u_opt * (1.0 + 1e-12)) dominates = false;
      }
    }
    add("beamformer_optimality", worst_closed, 1e-9, dominates && worst_closed <= 1e-9,
        dominates ? "" : "a random beamformer beat the closed form");
  }

  // Tangency of the linearizations at the configured scenario.
  {
    const ProblemSpec spec = problem_spec(cfg, RadarMode::conventional);
    const SCAState st = initial_state(spec);
    const double s2 = spec.scenario.noise_power;
    const ChannelSet& ch = spec.channels;
    const TransmitDesign d = st.design();
    const HermitianMatrix v_t = d.v_t();
    double worst = rel_err(dl_rate_lower_bound(d.v_s, d.v_c, d.v_s, ch.g, s2), std::log2(1.0 + sinr_dl(d, ch, s2)));
    const HermitianMatrix psi = assemble_psi(d.p, v_t, ch, s2);
    const auto rt = radar_constraint_terms(psi, ch, s2, spec.scenario.target_angle_deg, spec.rho_s,
                                           spec.scenario.target_reflectivity, RadarMode::conventional);
    worst = std::max(worst, rel_err(rt.lhs(d.p, v_t), rt.exact_at_prev));
    if (d.p > 0.0) {
      const HermitianMatrix phi = assemble_phi(v_t, ch, s2);
      const double x0 = std::sqrt(d.p * ch.h.dot(hermitian_solve(phi, ch.h)).real());
      const auto ut = ul_constraint_terms(phi, ch, s2, x0);
      worst = std::max(worst, std::abs(ut.constraint1_slack(x0, d.p, v_t)) / (x0 * x0 / d.p));
      worst = std::max(worst, rel_err(ut.u_bound(x0), x0 * x0));
    }
    add("linearization_tangency", worst, 1e-10, worst <= 1e-10);
  }

  if (vo.run_sca) {
    for (RadarMode m : {RadarMode::conventional, RadarMode::iqscc}) {
      const OptimizeOutcome o = run_optimize(cfg, m);
      const auto& tr = o.result.trace;
      double worst_drop = 0.0;
      for (std::size_t i = 1; i < tr.size(); ++i) worst_drop = std::max(worst_drop, tr[i - 1].sum_rate - tr[i].sum_rate);
      const bool feasible = std::all_of(tr.begin(), tr.end(), [](const SCATraceRow& r) {
        return r.radar_feasible && r.budget_feasible;
      });
      const bool ok = o.result.status == ScaStatus::converged && worst_drop <= 1e-6 && feasible;
      add(std::string("sca_ascent_") + mode_name(m), worst_drop, 1e-6, ok,
          std::string(to_string(o.result.status)) + ", sum rate " + fmt_num(o.result.sum_rate) + " bps/Hz");
    }
  }
  return rep;
}

inline int cmd_validate(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log,
                        const ValidationHooks& hooks = {}, const ValidateOptions& vo = {}) {
  const ValidationReport rep = run_validation(cfg, hooks, vo);
  ensure_dir(out_dir);
  write_text(out_dir / "validation_report.json", rep.to_json().dump(2) + "\n");
  for (const auto& c : rep.checks) {
    log << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << fmt_num(c.value) << " tol=" << fmt_num(c.tolerance);
    if (!c.detail.empty()) log << " (" << c.detail << ")";
    log << '\n';
  }
  return rep.all_passed() ? exit_code::ok : exit_code::failed_checks;
}

}  // namespace iqscc
