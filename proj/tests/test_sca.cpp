#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "iqscc/sca.hpp"
#include "test_support.hpp"

using namespace iqscc;
using testing_support::random_cvector;
using testing_support::random_psd;

namespace {

ProblemSpec campaign_spec(RadarMode mode, double rho_db, std::uint64_t seed = 1) {
  ProblemSpec spec;
  spec.scenario = Scenario::campaign_defaults();
  spec.scenario.rng_seed = seed;
  spec.channels = build_channels(spec.scenario);
  spec.rho_s = db_to_linear(rho_db);
  spec.mode = mode;
  return spec;
}

// Small well-scaled instance for brute-force checks.
ProblemSpec toy_spec(RadarMode mode, int n = 2) {
  ProblemSpec spec;
  Scenario& s = spec.scenario;
  s.n_tx = s.n_rx = n;
  s.bs_power_max = 1.0;
  s.ul_power_max = 0.5;
  s.noise_power = 1.0;
  s.target_reflectivity = 0.5;
  s.si_power = 0.05;
  s.dl_pathloss = 2.0;
  s.ul_pathloss = 1.0;
  s.interferers = {{-50.0, {0.5, 0.0}}};
  spec.channels = build_channels(s);
  spec.mode = mode;
  const double half = s.bs_power_max / (2.0 * n);
  const TransmitDesign iso{HermitianMatrix::identity(n, half), HermitianMatrix::identity(n, half), s.ul_power_max};
  // active but satisfiable: half the SINR of the isotropic start
  spec.rho_s = 0.5 * sinr_radar_opt(iso, spec.channels, s.noise_power, s.target_angle_deg, s.target_reflectivity,
                                    sinr_mode(mode));
  return spec;
}

bool nondecreasing(const SCATrace& tr, double slack) {
  for (std::size_t i = 1; i < tr.size(); ++i) {
    if (tr[i].sum_rate < tr[i - 1].sum_rate - slack) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linearizations

TEST(DlRateLowerBound, TightAtPointAndBelowElsewhere) {
  std::mt19937_64 rng(1);
  const int n = 6;
  const double s2 = 0.4;
  for (int t = 0; t < 100; ++t) {
    const CVector g = random_cvector(rng, n);
    const HermitianMatrix vs = random_psd(rng, n, 0.7), vc = random_psd(rng, n, 0.5, 1), prev = random_psd(rng, n, 0.9);
    const double exact = std::log2(1.0 + vc.quad(g) / (vs.quad(g) + s2));
    EXPECT_NEAR(dl_rate_lower_bound(vs, vc, vs, g, s2), exact, 1e-12);
    EXPECT_LE(dl_rate_lower_bound(vs, vc, prev, g, s2), exact + 1e-12);
  }
  const CVector g = random_cvector(rng, n);
  const HermitianMatrix vc = random_psd(rng, n, 1.0);
  EXPECT_NEAR(dl_rate_lower_bound(HermitianMatrix::zero(n), vc, HermitianMatrix::zero(n), g, s2),
              std::log2(1.0 + vc.quad(g) / s2), 1e-12);
}

TEST(RadarConstraintTerms, TangencyConvexityAndRhs) {
  std::mt19937_64 rng(2);
  const ProblemSpec spec = toy_spec(RadarMode::conventional, 4);
  const ChannelSet& ch = spec.channels;
  const double s2 = spec.scenario.noise_power;
  const CVector a_r = steering_rx(0.0, 4);
  for (int t = 0; t < 100; ++t) {
    const HermitianMatrix v0 = random_psd(rng, 4, 1.0);
    const double p0 = testing_support::uniform(rng, 0.0, 0.5);
    const HermitianMatrix psi0 = assemble_psi(p0, v0, ch, s2);
    const auto rt = radar_constraint_terms(psi0, ch, s2, 0.0, spec.rho_s, 0.5, RadarMode::conventional);
    EXPECT_NEAR(rt.lhs(p0, v0) / a_r.dot(hermitian_solve(psi0, a_r)).real(), 1.0, 1e-10);
    const HermitianMatrix v1 = random_psd(rng, 4, 1.0);
    const double p1 = testing_support::uniform(rng, 0.0, 0.5);
    const double exact1 = a_r.dot(hermitian_solve(assemble_psi(p1, v1, ch, s2), a_r)).real();
    EXPECT_LE(rt.lhs(p1, v1), exact1 * (1.0 + 1e-12));
  }
  const auto rt = radar_constraint_terms(assemble_psi(0.1, HermitianMatrix::identity(4, 0.1), ch, s2), ch, s2, 0.0,
                                         2.0, 0.5, RadarMode::iqscc);
  const HermitianMatrix beam = HermitianMatrix::outer(steering_tx(0.0, 4)) * 3.0;
  EXPECT_NEAR(rt.rhs(beam, HermitianMatrix::zero(4)), 2.0 / (0.5 * 3.0), 1e-12);
  // sensing-only mode ignores V_c, so a pure data beam cannot meet it
  EXPECT_THROW(rt.rhs(HermitianMatrix::zero(4), beam), InfeasibleError);
}

TEST(UlConstraintTerms, TangencyAndTightness) {
  std::mt19937_64 rng(3);
  const ProblemSpec spec = toy_spec(RadarMode::conventional, 4);
  const ChannelSet& ch = spec.channels;
  const double s2 = spec.scenario.noise_power;
  for (int t = 0; t < 50; ++t) {
    const HermitianMatrix v0 = random_psd(rng, 4, 1.0);
    const double p0 = testing_support::uniform(rng, 0.01, 0.5);
    const HermitianMatrix phi0 = assemble_phi(v0, ch, s2);
    const double x0 = std::sqrt(p0 * ch.h.dot(hermitian_solve(phi0, ch.h)).real());
    const auto ut = ul_constraint_terms(phi0, ch, s2, x0);
    EXPECT_NEAR(ut.u_bound(x0), x0 * x0, 1e-12 * x0 * x0);
    EXPECT_NEAR(ut.constraint1_slack(x0, p0, v0), 0.0, 1e-10 * x0 * x0 / p0);
    for (double x = 0.0; x < 4.0 * x0; x += 0.1 * x0) EXPECT_LE(ut.u_bound(x), x * x + 1e-15);
    // the linearized gain under-estimates h^H Phi^{-1} h away from the point
    const HermitianMatrix v1 = random_psd(rng, 4, 1.0);
    EXPECT_LE(ut.linearized_gain(v1), ch.h.dot(hermitian_solve(assemble_phi(v1, ch, s2), ch.h)).real() * (1 + 1e-12));
  }
}

TEST(ExtractRank1, Cases) {
  CVector v(3);
  v << cdouble(1, 2), cdouble(0, -1), cdouble(0.5, 0);
  const Rank1 r = extract_rank1(HermitianMatrix::outer(v));
  EXPECT_NEAR(r.gap, 0.0, 1e-12);
  EXPECT_NEAR(std::abs(r.v.dot(v)), v.squaredNorm(), 1e-12);
  EXPECT_NEAR(extract_rank1(HermitianMatrix::identity(2)).gap, 0.5, 1e-14);

  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const HermitianMatrix m = random_psd(rng, 5, 2.0);
    const Rank1 k = extract_rank1(m);
    Eigen::VectorXd ev = m.eigenvalues();
    std::sort(ev.data(), ev.data() + ev.size());
    const double rest = ev.head(4).squaredNorm();
    EXPECT_NEAR((m.matrix() - k.v * k.v.adjoint()).norm(), std::sqrt(rest), 1e-10);
    EXPECT_NEAR(k.gap, 1.0 - ev(4) / m.trace(), 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Subproblem and ascent loop

TEST(Subproblem, SurrogateIsTangentAtTheLinearizationPoint) {
  for (RadarMode mode : {RadarMode::conventional, RadarMode::iqscc}) {
    const ProblemSpec spec = toy_spec(mode, 3);
    const SCAState st = initial_state(spec);
    EXPECT_NEAR(surrogate_objective(st, st, spec), sum_rate(st.design(), spec.channels, spec.scenario.noise_power),
                1e-10);
  }
}

namespace {

// Independent evaluation of the subproblem for a 2x2 instance, linearized at `st`.
struct ToyOracle {
  const ProblemSpec& spec;
  double s2, dl_prev_den, gs_prev;
  double r_const, r_pcoeff, ul_const, x_prev;
  CVector b_dir, c_dir, a_t, g;

  ToyOracle(const ProblemSpec& sp, const SCAState& st) : spec(sp) {
    const ChannelSet& ch = sp.channels;
    const int n = sp.scenario.n_tx;
    s2 = sp.scenario.noise_power;
    g = ch.g;
    gs_prev = st.v_s.quad(g);
    dl_prev_den = gs_prev + s2;
    const CMatrix vt = (st.v_s + st.v_c).matrix();
    const CMatrix eye = CMatrix::Identity(n, n);
    const CMatrix psi = st.p * ch.h * ch.h.adjoint() + ch.b * vt * ch.b.adjoint() + s2 * eye;
    const CVector a_r = steering_rx(sp.scenario.target_angle_deg, n);
    const CVector z = psi.llt().solve(a_r);
    r_const = 2.0 * a_r.dot(z).real() - s2 * z.squaredNorm();
    r_pcoeff = std::norm(ch.h.dot(z));
    b_dir = ch.b.adjoint() * z;
    const CMatrix phi = ch.c * vt * ch.c.adjoint() + s2 * eye;
    const CVector y = phi.llt().solve(ch.h);
    ul_const = 2.0 * ch.h.dot(y).real() - s2 * y.squaredNorm();
    c_dir = ch.c.adjoint() * y;
    x_prev = std::sqrt(std::max(st.p, 1e-9 * sp.scenario.ul_power_max) * ch.h.dot(y).real());
    a_t = steering_tx(sp.scenario.target_angle_deg, n);
  }

  static double q(const CMatrix& m, const CVector& v) { return v.dot(m * v).real(); }

  /// Surrogate value in bps/Hz, or -inf when (V_s, V_c, p) violates a constraint.
  double value(const CMatrix& vs, const CMatrix& vc, double p, double slack = 0.0) const {
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    const CMatrix vt = vs + vc;
    if (vt.trace().real() > spec.scenario.bs_power_max * (1 + slack) + 1e-12) return ninf;
    if (p < 0.0 || p > spec.scenario.ul_power_max * (1 + slack) + 1e-12) return ninf;
    const double lhs = r_const - r_pcoeff * p - q(vt, b_dir);
    const double gain = q(spec.mode == RadarMode::conventional ? vt : vs, a_t);
    if (!(gain > 0.0) || lhs * gain * spec.scenario.target_reflectivity < spec.rho_s * (1 - slack)) return ninf;
    const double gs = q(vs, g);
    double v = std::log2(gs + q(vc, g) + s2) - std::log2(dl_prev_den) - (gs - gs_prev) / (dl_prev_den * std::numbers::ln2);
    const double l = ul_const - q(vt, c_dir);
    if (l <= 0.0) return ninf;
    const double u = x_prev * (2.0 * std::sqrt(p * l) - x_prev);
    if (u <= -1.0) return ninf;
    return v + std::log2(1.0 + std::max(u, 0.0));
  }
};

}  // namespace

TEST(Subproblem, BeatsBruteForceGridOnToyInstance) {
  for (RadarMode mode : {RadarMode::conventional, RadarMode::iqscc}) {
    const ProblemSpec spec = toy_spec(mode, 2);
    const SCAState st = initial_state(spec);
    const ToyOracle oracle(spec, st);

    const SCAState next = solve_subproblem(st, spec);
    const double solver = oracle.value(next.v_s.matrix(), next.v_c.matrix(), next.p, 1e-6);
    ASSERT_TRUE(std::isfinite(solver)) << "solver output violates the linearized constraints";
    EXPECT_NEAR(solver, surrogate_objective(st, next, spec), 1e-6);

    // diagonal-plus-rank-1 family: a I + b v v^H, v = (cos phi, e^{i psi} sin phi)
    std::vector<CMatrix> dirs;
    for (int i = 0; i <= 8; ++i) {
      for (int j = 0; j < 12; ++j) {
        const double ph = std::numbers::pi / 2.0 * i / 8.0, ps = 2.0 * std::numbers::pi * j / 12.0;
        CVector v(2);
        v << std::cos(ph), std::polar(std::sin(ph), ps);
        dirs.push_back(v * v.adjoint());
        if (i == 0 || i == 8) break;  // phase is irrelevant on the axes
      }
    }
    auto family = [&](const std::vector<double>& as, const std::vector<double>& bs) {
      std::vector<CMatrix> out;
      for (const CMatrix& d : dirs)
        for (double a : as)
          for (double b : bs) out.push_back(a * CMatrix::Identity(2, 2) + b * d);
      return out;
    };
    const auto vcs = family({0.0, 0.02, 0.08}, {0.2, 0.4, 0.6, 0.75, 0.9});
    const auto vss = family({0.0, 0.02}, {0.0, 0.05, 0.15, 0.3});
    double grid = -std::numeric_limits<double>::infinity();
    for (const CMatrix& vc : vcs)
      for (const CMatrix& vs : vss)
        for (double p : {0.1, 0.3, 0.5}) grid = std::max(grid, oracle.value(vs, vc, p));
    ASSERT_TRUE(std::isfinite(grid));
    EXPECT_GE(solver, grid - 1e-3) << to_string(mode);
  }
}

TEST(RunSca, MatchedBeamformingLimit) {
  for (RadarMode mode : {RadarMode::conventional, RadarMode::iqscc}) {
    ProblemSpec spec = campaign_spec(mode, -200.0);
    spec.scenario.ul_power_max = 0.0;
    spec.scenario.interferers.clear();
    spec.channels = build_channels(spec.scenario);
    const ScaResult r = run_sca(spec);
    ASSERT_EQ(r.status, ScaStatus::converged) << r.message;
    const double mrt = std::log2(1.0 + spec.scenario.bs_power_max * spec.channels.g.squaredNorm() /
                                           spec.scenario.noise_power);
    EXPECT_NEAR(r.sum_rate, mrt, 1e-3) << to_string(mode);
    EXPECT_EQ(r.design.p, 0.0);
    // the data beam is aligned with g
    const Rank1 k = extract_rank1(r.design.v_c);
    EXPECT_NEAR(std::abs(k.v.normalized().dot(spec.channels.g.normalized())), 1.0, 1e-3);
  }
}

TEST(RunSca, AscentFeasibilityAndTangentSurrogate) {
  for (RadarMode mode : {RadarMode::conventional, RadarMode::iqscc}) {
    const ProblemSpec spec = campaign_spec(mode, mode == RadarMode::conventional ? 2.9 : -3.5);
    const ScaResult r = run_sca(spec);
    ASSERT_EQ(r.status, ScaStatus::converged) << r.message;
    ASSERT_GE(r.trace.size(), 2u);
    EXPECT_LE(r.trace.back().iter, 50);
    EXPECT_TRUE(nondecreasing(r.trace, 1e-6));
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
      EXPECT_TRUE(r.trace[i].radar_feasible) << i;
      EXPECT_TRUE(r.trace[i].budget_feasible) << i;
      // surrogate at the new iterate is at least the surrogate (= true rate) of the old one
      if (i > 0) {
        EXPECT_GE(r.trace[i].surrogate, r.trace[i - 1].sum_rate - 1e-6) << i;
      }
      // the surrogate under-estimates the true rate
      EXPECT_LE(r.trace[i].surrogate, r.trace[i].sum_rate + 1e-9) << i;
    }
    EXPECT_GE(r.radar_sinr, spec.rho_s * (1.0 - 1e-6));
    EXPECT_LE(r.design.v_t().trace(), spec.scenario.bs_power_max + 1e-9);
    EXPECT_LE(r.design.p, spec.scenario.ul_power_max + 1e-9);
    EXPECT_NEAR(r.sum_rate, sum_rate(r.design, spec.channels, spec.scenario.noise_power), 1e-9);
  }
}

TEST(RunSca, DeterministicTraces) {
  const ProblemSpec spec = campaign_spec(RadarMode::iqscc, -3.5);
  const ScaResult a = run_sca(spec);
  const ScaResult b = run_sca(spec);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].sum_rate, b.trace[i].sum_rate);
    EXPECT_EQ(a.trace[i].surrogate, b.trace[i].surrogate);
  }
  EXPECT_EQ(a.design.v_c.matrix(), b.design.v_c.matrix());
}

TEST(RunSca, LooserThresholdNeverHurts) {
  const double conv = run_sca(campaign_spec(RadarMode::conventional, 2.9)).sum_rate;
  EXPECT_GE(run_sca(campaign_spec(RadarMode::conventional, -3.5)).sum_rate, conv - 1e-6);
  EXPECT_GE(run_sca(campaign_spec(RadarMode::iqscc, -3.5)).sum_rate, conv - 1e-6);
}

TEST(RunSca, UnreachableThresholdIsInfeasible) {
  const ScaResult r = run_sca(campaign_spec(RadarMode::conventional, 40.0));
  EXPECT_EQ(r.status, ScaStatus::infeasible);
  EXPECT_FALSE(r.message.empty());
  EXPECT_GT(r.restoration_iters, 0);
}

TEST(RunSca, RestorationRecoversFromInfeasibleStart) {
  // The ceiling is |beta_0|^2 P_b / sigma^2 = 3.01 dB; the isotropic start sits ~12 dB below it.
  const ProblemSpec spec = campaign_spec(RadarMode::conventional, 2.98);
  const SCAState st = initial_state(spec);
  ASSERT_LT(sinr_radar_opt(st.design(), spec.channels, spec.scenario.noise_power, 0.0,
                           spec.scenario.target_reflectivity),
            spec.rho_s);
  const ScaResult r = run_sca(spec);
  ASSERT_EQ(r.status, ScaStatus::converged) << r.message;
  EXPECT_GT(r.restoration_iters, 0);
  EXPECT_GE(r.radar_sinr, spec.rho_s * (1.0 - 1e-6));
  EXPECT_TRUE(nondecreasing(r.trace, 1e-6));
}

TEST(RunSca, UplinkDisabled) {
  ProblemSpec spec = campaign_spec(RadarMode::iqscc, -3.5);
  spec.scenario.ul_power_max = 0.0;
  const ScaResult r = run_sca(spec);
  ASSERT_EQ(r.status, ScaStatus::converged) << r.message;
  EXPECT_EQ(r.design.p, 0.0);
  EXPECT_EQ(r.trace.back().ul_rate, 0.0);
}

TEST(ProblemSpec, Validation) {
  ProblemSpec spec = toy_spec(RadarMode::conventional);
  spec.rho_s = 0.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = toy_spec(RadarMode::conventional);
  spec.scenario.n_tx = 3;
  EXPECT_THROW(spec.validate(), ConfigError);
}
