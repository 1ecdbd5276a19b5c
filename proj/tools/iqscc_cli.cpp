// iqscc: batch front end. Every subcommand writes data files under --out.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iqscc/iqscc.hpp"

namespace {

struct Globals {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string mode;
};

iqscc::RunConfig load(const Globals& g) {
  iqscc::RunConfig c = g.config_path.empty() ? iqscc::paper_campaign_config() : iqscc::load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  return c;
}

std::string out_dir(const Globals& g, const iqscc::RunConfig* c) {
  if (!g.out_dir.empty()) return g.out_dir;
  return c ? c->output.directory : "out";
}

std::vector<iqscc::RadarMode> modes(const Globals& g) {
  if (g.mode.empty()) return {iqscc::RadarMode::conventional, iqscc::RadarMode::iqscc};
  return {iqscc::parse_mode(g.mode)};
}

std::vector<iqscc::Protocol> protocols(const std::vector<std::string>& names) {
  std::vector<iqscc::Protocol> out;
  for (const auto& n : names) {
    try {
      out.push_back(iqscc::parse_protocol(n));
    } catch (const iqscc::Error& e) {
      throw iqscc::ConfigError(e.what());
    }
  }
  return out;
}

void add_env(CLI::App* sub, iqscc::DetectionEnv& env) {
  sub->add_option("--k", env.k, "samples per decision (K)")->check(CLI::PositiveNumber);
  sub->add_option("--n-thermal", env.n_thermal, "thermal photons per mode (N_n)")->check(CLI::PositiveNumber);
  sub->add_option("--eta", env.eta, "channel transmissivity (linear)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-illumination ISAC sum-rate optimizer and detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "run configuration (JSON); the built-in campaign is used if omitted");
  app.add_option("--out", g.out_dir, "output directory (default: output.directory from the config, or ./out)");
  app.add_option("--seed", g.seed, "override the configuration seed");
  app.add_option("--mode", g.mode, "radar mode; both modes when omitted")
      ->check(CLI::IsMember({"conventional", "iqscc"}));

  iqscc::ThermalOptions thermal;
  auto* c_thermal = app.add_subcommand("thermal", "thermal photon occupation over frequency");
  c_thermal->add_option("--f-min-hz", thermal.f_min_hz);
  c_thermal->add_option("--f-max-hz", thermal.f_max_hz);
  c_thermal->add_option("--points", thermal.points);
  c_thermal->add_option("--temperatures-k", thermal.temperatures_k)->delimiter(',');
  c_thermal->add_option("--extra-frequencies-hz", thermal.extra_frequencies_hz)->delimiter(',');

  iqscc::RocOptions roc;
  std::vector<std::string> roc_protocols{"CW", "CS", "QI"};
  auto* c_roc = app.add_subcommand("roc", "detection probability versus SINR");
  c_roc->add_option("--protocols", roc_protocols)->delimiter(',');
  c_roc->add_option("--gamma-min-db", roc.gamma_min_db);
  c_roc->add_option("--gamma-max-db", roc.gamma_max_db);
  c_roc->add_option("--gamma-step-db", roc.gamma_step_db);
  c_roc->add_option("--pf", roc.pf)->delimiter(',');
  add_env(c_roc, roc.env);

  iqscc::RequiredSinrOptions req;
  std::vector<std::string> req_protocols{"CW", "CS", "QI"};
  auto* c_req = app.add_subcommand("required-sinr", "SINR needed to reach a detection probability");
  c_req->add_option("--protocols", req_protocols)->delimiter(',');
  c_req->add_option("--pd-min", req.pd_min);
  c_req->add_option("--pd-max", req.pd_max);
  c_req->add_option("--pd-points", req.pd_points);
  c_req->add_option("--pf", req.pf);
  add_env(c_req, req.env);

  int sweep_seeds = 0;
  unsigned threads = 1;
  std::vector<double> sweep_rho;
  auto* c_opt = app.add_subcommand("optimize", "SCA sum-rate optimization");
  c_opt->add_option("--sweep-seeds", sweep_seeds, "run N consecutive seeds into per-run directories");
  c_opt->add_option("--sweep-rho-s-db", sweep_rho, "radar thresholds to sweep (dB)")->delimiter(',');
  c_opt->add_option("--threads", threads, "worker threads for sweeps");

  std::string design_path;
  int bp_points = 721;
  auto* c_bp = app.add_subcommand("beampattern", "transmit beampattern of an optimized design");
  c_bp->add_option("--design", design_path, "design JSON (default: <out>/design_<mode>.json)");
  c_bp->add_option("--points", bp_points)->check(CLI::Range(2, 100000));

  iqscc::ValidateOptions vopt;
  auto* c_val = app.add_subcommand("validate", "run the oracle and property suite");
  c_val->add_option("--mc-trials", vopt.mc_trials);
  c_val->add_option("--threads", vopt.threads);
  c_val->add_flag("!--skip-sca", vopt.run_sca, "skip the optimizer ascent checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : iqscc::exit_code::config_error;
  }

  try {
    if (*c_thermal) return iqscc::cmd_thermal(thermal, out_dir(g, nullptr));
    if (*c_roc) {
      roc.protocols = protocols(roc_protocols);
      return iqscc::cmd_roc(roc, out_dir(g, nullptr));
    }
    if (*c_req) {
      req.protocols = protocols(req_protocols);
      return iqscc::cmd_required_sinr(req, out_dir(g, nullptr));
    }
    if (*c_opt) {
      const iqscc::RunConfig cfg = load(g);
      const std::string dir = out_dir(g, &cfg);
      if (sweep_seeds > 0 || !sweep_rho.empty()) {
        return iqscc::cmd_optimize_sweep(cfg, modes(g), dir, std::max(sweep_seeds, 1), threads, sweep_rho);
      }
      return iqscc::cmd_optimize(cfg, modes(g), dir, std::cout);
    }
    if (*c_bp) {
      const iqscc::RunConfig cfg = g.config_path.empty() ? iqscc::paper_campaign_config() : load(g);
      const std::string dir = out_dir(g, &cfg);
      const auto ms = modes(g);
      if (!design_path.empty() && ms.size() != 1) {
        throw iqscc::ConfigError("beampattern: --design needs an explicit --mode");
      }
      for (auto m : ms) {
        const std::string path =
            design_path.empty() ? dir + "/design_" + iqscc::mode_name(m) + ".json" : design_path;
        iqscc::cmd_beampattern(m, path, dir, bp_points);
      }
      return iqscc::exit_code::ok;
    }
    if (*c_val) {
      const iqscc::RunConfig cfg = load(g);
      return iqscc::cmd_validate(cfg, out_dir(g, &cfg), std::cout, {}, vopt);
    }
  } catch (const iqscc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return iqscc::exit_code::config_error;
  } catch (const iqscc::DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return iqscc::exit_code::config_error;
  } catch (const iqscc::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return iqscc::exit_code::infeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return iqscc::exit_code::solver_failure;
  }
  return iqscc::exit_code::ok;
}
