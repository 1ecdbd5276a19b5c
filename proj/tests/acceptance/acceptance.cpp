// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "iqscc/iqscc.hpp"

using namespace iqscc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* what, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool ok = o.passed && in_time;
  if (!ok) ++failures;
  std::printf("[%s] criterion %d: %s | %s | %.2f s (budget %.0f s%s)\n", ok ? "PASS" : "FAIL", id, what,
              o.detail.c_str(), secs, budget_s, in_time ? "" : ", exceeded");
  std::fflush(stdout);
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig shipped_campaign() { return load_config(std::string(IQSCC_SOURCE_DIR) + "/configs/paper_campaign.json"); }

}  // namespace

int main() {
  criterion(1, "thermal photons at 24 GHz, 293 K", 1.0, [] {
    const double n = thermal_photons(24e9, 293.0);
    return Outcome{n >= 253.4 && n <= 254.4, "N_n = " + g(n) + ", window [253.4, 254.4]"};
  });

  criterion(2, "effective bandwidth", 1.0, [] {
    const double b = effective_bandwidth(5e-12, thermal_photons(24e9, 293.0), 24e9);
    return Outcome{b >= 1.15e9 && b <= 1.30e9, "B = " + g(b / 1e9) + " GHz, window [1.15, 1.30]"};
  });

  criterion(3, "CW ROC equals the Kay form", 5.0, [] {
    double worst = 0.0;
    for (double gdb : {-10.0, -5.0, 0.0, 5.0, 10.0})
      for (int k : {1, 4, 16, 64, 256})
        for (double pf : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
          const double gam = db_to_linear(gdb);
          worst = std::max(worst, std::abs(roc_pd(cw_params(gam, k), pf) - kay_pd(2.0 * gam, k, pf)));
        }
    return Outcome{worst <= 1e-12, "max |diff| = " + g(worst)};
  });

  criterion(4, "CS approaches CW", 1.0, [] {
    double worst = 0.0;
    for (double nn : {1e-2, 0.5, 1.0, 10.0, 253.9, 1e4, 1e6})
      for (double gdb : {-10.0, 0.0, 10.0})
        for (int k : {1, 16}) {
          const double gam = db_to_linear(gdb);
          const double ratio = cs_params(gam, nn, k).a2 / cw_params(gam, k).a2;
          worst = std::max(worst, std::abs(ratio - std::sqrt(2.0 * nn / (2.0 * nn + 1.0))));
        }
    const double far = cs_params(1.0, 1e6, 1).a2 / cw_params(1.0, 1).a2;
    return Outcome{worst <= 1e-12 && std::abs(far - 1.0) <= 1e-6,
                   "max ratio error " + g(worst) + ", |ratio - 1| at N_n = 1e6: " + g(std::abs(far - 1.0))};
  });

  criterion(5, "QI closed forms against the Gaussian moment oracle", 10.0, [] {
    std::mt19937_64 rng(20240501);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const double n_q = std::pow(10.0, -4.0 + 6.0 * u(rng));
      const double eta = std::pow(10.0, -6.0 + 5.7 * u(rng));
      const double nn = std::pow(10.0, -2.0 + 6.0 * u(rng));
      const int k = 1 + static_cast<int>(16.0 * u(rng));
      const QiMoments m = qi_moment_oracle(n_q, eta, nn);
      const RadarProtocolParams p = qi_params(eta * n_q / nn, nn, eta, k);
      const double a1 = std::sqrt(m.var_h1 / m.var_h0);
      const double a2 = m.mean_h1 * std::sqrt(static_cast<double>(k) / m.second_moment_h1);
      worst = std::max({worst, rel(p.a1, a1), rel(p.a2, a2)});
    }
    return Outcome{worst <= 1e-9, "max relative error " + g(worst) + " over 50 triples"};
  });

  criterion(6, "QI low-photon advantage", 1.0, [] {
    const double nn = 253.9, eta = 0.01, n_q = 1e-4;
    const double gam = eta * n_q / nn;
    const double ratio = std::pow(qi_params(gam, nn, eta, 1).a2 / cs_params(gam, nn, 1).a2, 2);
    const double target = (2.0 * nn + 1.0) / (nn + 1.0);
    return Outcome{rel(ratio, target) <= 0.01, "ratio " + g(ratio) + " vs " + g(target)};
  });

  criterion(7, "Monte Carlo ROC within 4 sigma", 60.0, [] {
    double worst = 0.0;
    std::uint64_t seed = 7;
    for (double gdb : {-3.0, 0.0, 3.0})
      for (double pf : {1e-2, 1e-3}) {
        const RadarProtocolParams p = cw_params(db_to_linear(gdb), 16);
        const McResult r = mc_validate(p, pf, 16, 1000000, seed++);
        worst = std::max(worst, std::abs(r.pd_hat - r.pd_analytic) / r.pd_sigma);
      }
    return Outcome{worst <= 4.0, "worst deviation " + g(worst) + " sigma"};
  });

  criterion(8, "receive beamformer optimality", 60.0, [] {
    ValidateOptions vo;
    vo.mc_trials = 1;
    vo.run_sca = false;
    const ValidationReport rep = run_validation(paper_campaign_config(), {}, vo);
    for (const auto& c : rep.checks) {
      if (c.name == "beamformer_optimality") {
        return Outcome{c.passed, "100 scenarios x 1000 random beamformers, closed-form error " + g(c.value) +
                                     (c.detail.empty() ? "" : ", " + c.detail)};
      }
    }
    return Outcome{false, "check missing"};
  });

  criterion(9, "SCA ascent and feasibility on the shipped campaign", 600.0, [] {
    const RunConfig cfg = shipped_campaign();
    std::string detail;
    bool ok = true;
    for (RadarMode m : {RadarMode::conventional, RadarMode::iqscc}) {
      const ProblemSpec spec = problem_spec(cfg, m);
      const ScaResult r = run_sca(spec);
      double worst_drop = 0.0;
      for (std::size_t i = 1; i < r.trace.size(); ++i)
        worst_drop = std::max(worst_drop, r.trace[i - 1].sum_rate - r.trace[i].sum_rate);
      const double power = r.design.v_t().trace();
      const bool mode_ok = r.status == ScaStatus::converged && r.trace.back().iter <= 50 && worst_drop <= 1e-6 &&
                           r.radar_sinr >= spec.rho_s * (1.0 - 1e-6) &&
                           power <= spec.scenario.bs_power_max + 1e-9 &&
                           r.design.p <= spec.scenario.ul_power_max + 1e-9 && r.design.p >= 0.0;
      ok = ok && mode_ok;
      detail += std::string(detail.empty() ? "" : "; ") + mode_name(m) + ": " + to_string(r.status) + " in " +
                std::to_string(r.trace.back().iter) + " iters, worst drop " + g(worst_drop) + ", SINR margin " +
                g(linear_to_db(r.radar_sinr / spec.rho_s)) + " dB";
    }
    return Outcome{ok, detail};
  });

  criterion(10, "IQSCC dominates conventional over 10 seeds", 1800.0, [] {
    RunConfig cfg = shipped_campaign();
    double worst_margin = std::numeric_limits<double>::infinity();
    int wins = 0;
    for (std::uint64_t s = 1; s <= 10; ++s) {
      cfg.seed = s;
      const ScaResult conv = run_sca(problem_spec(cfg, RadarMode::conventional));
      const ScaResult iq = run_sca(problem_spec(cfg, RadarMode::iqscc));
      if (conv.status != ScaStatus::converged || iq.status != ScaStatus::converged) {
        return Outcome{false, "seed " + std::to_string(s) + " did not converge"};
      }
      worst_margin = std::min(worst_margin, iq.sum_rate - conv.sum_rate);
      if (iq.sum_rate >= conv.sum_rate) ++wins;
    }
    return Outcome{wins == 10, std::to_string(wins) + "/10 seeds, smallest margin " + g(worst_margin) + " bps/Hz"};
  });

  criterion(11, "campaign figure: 17.3 bps/Hz steady state and 7.4 bps/Hz gap within 25%", 600.0, [] {
    const RunConfig cfg = shipped_campaign();
    const ScaResult conv = run_sca(problem_spec(cfg, RadarMode::conventional));
    const ScaResult iq = run_sca(problem_spec(cfg, RadarMode::iqscc));
    const double gap = iq.sum_rate - conv.sum_rate;
    const bool level = std::abs(iq.sum_rate - 17.3) <= 0.25 * 17.3;
    const bool gap_ok = std::abs(gap - 7.4) <= 0.25 * 7.4;
    const bool order = iq.sum_rate > conv.sum_rate;
    const bool fast = conv.trace.back().iter <= 6 && iq.trace.back().iter <= 6;
    return Outcome{level && gap_ok && order && fast,
                   "IQSCC " + g(iq.sum_rate) + (level ? " (in window)" : " (out of window)") + ", conventional " +
                       g(conv.sum_rate) + ", gap " + g(gap) + (gap_ok ? " (in window)" : " (outside [5.55, 9.25])") +
                       ", ordering " + (order ? "holds" : "violated") + ", iterations " +
                       std::to_string(conv.trace.back().iter) + "/" + std::to_string(iq.trace.back().iter)};
  });

  criterion(12, "matched-beamforming limit", 60.0, [] {
    std::string detail;
    bool ok = true;
    for (RadarMode m : {RadarMode::conventional, RadarMode::iqscc}) {
      RunConfig cfg = shipped_campaign();
      cfg.scenario.ul_power_max_watt = 0.0;
      cfg.scenario.interferers.clear();
      ProblemSpec spec = problem_spec(cfg, m);
      spec.rho_s = 1e-20;
      const ScaResult r = run_sca(spec);
      const double mrt = std::log2(1.0 + spec.scenario.bs_power_max * spec.channels.g.squaredNorm() /
                                             spec.scenario.noise_power);
      const double err = std::abs(r.sum_rate - mrt);
      ok = ok && r.status == ScaStatus::converged && err <= 1e-3;
      detail += std::string(detail.empty() ? "" : "; ") + mode_name(m) + " |rate - MRT| = " + g(err);
    }
    return Outcome{ok, detail};
  });

  criterion(13, "repeated optimize runs are byte-identical", 1200.0, [] {
    const RunConfig cfg = shipped_campaign();
    const fs::path root = fs::temp_directory_path() / "iqscc_acceptance_determinism";
    fs::remove_all(root);
    std::ostringstream log;
    const std::vector<RadarMode> modes{RadarMode::conventional, RadarMode::iqscc};
    cmd_optimize(cfg, modes, root / "a", log);
    cmd_optimize(cfg, modes, root / "b", log);
    int compared = 0;
    for (const auto& e : fs::directory_iterator(root / "a")) {
      const fs::path other = root / "b" / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
        return Outcome{false, e.path().filename().string() + " differs"};
      }
      ++compared;
    }
    return Outcome{compared >= 4, std::to_string(compared) + " files identical"};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
