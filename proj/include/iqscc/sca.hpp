#pragma once

// Sum-rate maximization by successive convex approximation.
//
// Each iteration linearizes the nonconvex pieces around the previous iterate
//   * log2(g^H V_s g + sigma^2)               (DL interference term)
//   * a_r^H Psi^{-1} a_r                      (radar SINR constraint)
//   * h^H Phi^{-1} h and u <= x^2             (UL SINR epigraph)
// and solves the resulting convex program with the log-barrier method in
// barrier.hpp. All internal quantities are whitened by the noise power so the
// solver sees O(1) numbers.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "iqscc/barrier.hpp"
#include "iqscc/beamforming.hpp"
#include "iqscc/errors.hpp"
#include "iqscc/numerics.hpp"
#include "iqscc/scenario.hpp"

namespace iqscc {

/// Conventional ISAC constrains the radar SINR built from V_t; IQSCC builds it
/// from the sensing covariance V_s alone.
enum class RadarMode { conventional, iqscc };

inline RadarSinrMode sinr_mode(RadarMode m) {
  return m == RadarMode::conventional ? RadarSinrMode::total : RadarSinrMode::sensing_only;
}

inline const char* to_string(RadarMode m) { return m == RadarMode::conventional ? "conventional" : "iqscc"; }

struct ScaOptions {
  int max_iters = 50;
  double rel_tol = 1e-4;        // relative change of the surrogate objective
  double gap_tol = 1e-6;        // subproblem duality gap, relative to the objective
  int max_restoration_iters = 50;
};

struct ProblemSpec {
  Scenario scenario;
  ChannelSet channels;
  double rho_s = 1.0;  // minimum radar SINR, linear
  RadarMode mode = RadarMode::conventional;
  ScaOptions options;

  void validate() const {
    scenario.validate();
    if (!(rho_s > 0.0) || !std::isfinite(rho_s)) throw ConfigError("radar SINR threshold rho_s must be > 0");
    if (channels.n_tx() != scenario.n_tx || channels.n_rx() != scenario.n_rx) {
      throw ConfigError("channel dimensions do not match the scenario");
    }
  }
};

/// Iterate of the ascent loop, with the auxiliaries x, u and cached Psi, Phi.
struct SCAState {
  int iter = 0;
  HermitianMatrix v_s;
  HermitianMatrix v_c;
  double p = 0.0;
  double x = 0.0;
  double u = 0.0;
  HermitianMatrix psi;
  HermitianMatrix phi;

  TransmitDesign design() const { return {v_s, v_c, p}; }
};

struct SCATraceRow {
  int iter = 0;
  double surrogate = 0.0;       // bits/s/Hz
  double sum_rate = 0.0;        // true log2(1+gamma_UL) + log2(1+gamma_d)
  double dl_rate = 0.0;
  double ul_rate = 0.0;
  double radar_sinr_db = 0.0;   // true value in the active radar mode
  bool radar_feasible = false;  // radar SINR >= rho_s (1 - 1e-6)
  bool budget_feasible = false;
  std::string solver_status;
  double duality_gap = 0.0;
  int newton_steps = 0;
};

using SCATrace = std::vector<SCATraceRow>;

enum class ScaStatus { converged, max_iterations, infeasible, solver_failure };

inline const char* to_string(ScaStatus s) {
  switch (s) {
    case ScaStatus::converged: return "converged";
    case ScaStatus::max_iterations: return "max_iterations";
    case ScaStatus::infeasible: return "infeasible";
    case ScaStatus::solver_failure: return "solver_failure";
  }
  return "unknown";
}

struct ScaResult {
  ScaStatus status = ScaStatus::converged;
  TransmitDesign design;
  SCATrace trace;
  double sum_rate = 0.0;
  double radar_sinr = 0.0;  // linear, active mode
  int restoration_iters = 0;
  std::string message;
};

// ---------------------------------------------------------------------------
// Linearizations

/// Concave lower bound of log2(1 + gamma_d) obtained by linearizing
/// log2(g^H V_s g + sigma^2) at V_s_prev.
inline double dl_rate_lower_bound(const HermitianMatrix& v_s, const HermitianMatrix& v_c,
                                  const HermitianMatrix& v_s_prev, const CVector& g, double sigma2) {
  const double gs = v_s.quad(g);
  const double gt = gs + v_c.quad(g);
  const double d_prev = v_s_prev.quad(g) + sigma2;
  return std::log2(gt + sigma2) - std::log2(d_prev) - (gs - v_s_prev.quad(g)) / (d_prev * std::numbers::ln2);
}

/// Radar constraint after linearizing a_r^H Psi^{-1} a_r at Psi_prev:
///   LHS(p, V_t) = constant - p_coeff p - b^H V_t b
///   RHS(V)      = rhs_numerator / (a_t^H V a_t),  V = V_t or V_s
struct RadarConstraintTerms {
  double constant = 0.0;   // 2 a^H Psi0^{-1} a - sigma^2 ||Psi0^{-1} a||^2
  double p_coeff = 0.0;    // |h^H Psi0^{-1} a|^2
  CVector b_dir;           // B^H Psi0^{-1} a
  CVector a_t;             // a_t(theta_0)
  double rhs_numerator = 0.0;  // rho_s / |beta_0|^2
  RadarMode mode = RadarMode::conventional;
  double exact_at_prev = 0.0;  // a^H Psi0^{-1} a

  double lhs(double p, const HermitianMatrix& v_t) const { return constant - p_coeff * p - v_t.quad(b_dir); }
  double tx_gain(const HermitianMatrix& v_s, const HermitianMatrix& v_c) const {
    return mode == RadarMode::conventional ? (v_s + v_c).quad(a_t) : v_s.quad(a_t);
  }
  double rhs(const HermitianMatrix& v_s, const HermitianMatrix& v_c) const {
    const double gain = tx_gain(v_s, v_c);
    if (!(gain > 0.0)) throw InfeasibleError("radar constraint: a_t^H V a_t is zero (no power toward the target)");
    return rhs_numerator / gain;
  }
};

inline RadarConstraintTerms radar_constraint_terms(const HermitianMatrix& psi_prev, const ChannelSet& ch,
                                                   double sigma2, double theta0_deg, double rho_s,
                                                   double beta0_sq, RadarMode mode) {
  const CVector a_r = steering_rx(theta0_deg, static_cast<int>(ch.n_rx()));
  const CVector z = hermitian_solve(psi_prev, a_r);
  RadarConstraintTerms t;
  t.exact_at_prev = a_r.dot(z).real();
  t.constant = 2.0 * t.exact_at_prev - sigma2 * z.squaredNorm();
  t.p_coeff = std::norm(ch.h.dot(z));
  t.b_dir = ch.b.adjoint() * z;
  t.a_t = steering_tx(theta0_deg, static_cast<int>(ch.n_tx()));
  t.rhs_numerator = rho_s / beta0_sq;
  t.mode = mode;
  return t;
}

/// UL epigraph constraints after linearizing h^H Phi^{-1} h at Phi_prev:
///   x^2 / p <= constant - c^H V_t c            (constraint 1)
///   u <= x_prev^2 + 2 x_prev (x - x_prev)       (constraint 2)
struct UlConstraintTerms {
  double constant = 0.0;  // 2 h^H Phi0^{-1} h - sigma^2 ||Phi0^{-1} h||^2
  CVector c_dir;          // C^H Phi0^{-1} h
  double x_prev = 0.0;
  double exact_at_prev = 0.0;  // h^H Phi0^{-1} h

  double linearized_gain(const HermitianMatrix& v_t) const { return constant - v_t.quad(c_dir); }
  /// slack of constraint 1 (>= 0 when satisfied)
  double constraint1_slack(double x, double p, const HermitianMatrix& v_t) const {
    return linearized_gain(v_t) - x * x / p;
  }
  double u_bound(double x) const { return x_prev * x_prev + 2.0 * x_prev * (x - x_prev); }
};

inline UlConstraintTerms ul_constraint_terms(const HermitianMatrix& phi_prev, const ChannelSet& ch, double sigma2,
                                             double x_prev) {
  const CVector y = hermitian_solve(phi_prev, ch.h);
  UlConstraintTerms t;
  t.exact_at_prev = ch.h.dot(y).real();
  t.constant = 2.0 * t.exact_at_prev - sigma2 * y.squaredNorm();
  t.c_dir = ch.c.adjoint() * y;
  t.x_prev = x_prev;
  return t;
}

/// Rank-1 recovery of the DL beamformer from the relaxed covariance.
struct Rank1 {
  CVector v;
  double gap = 0.0;  // 1 - lambda_max / trace
};

inline Rank1 extract_rank1(const HermitianMatrix& v_c) {
  const Eigenpair ep = principal_eigenpair(v_c);
  const double tr = v_c.trace();
  const double lam = std::max(ep.value, 0.0);
  Rank1 r;
  r.v = std::sqrt(lam) * ep.vector;
  r.gap = tr > 0.0 ? std::clamp(1.0 - lam / tr, 0.0, 1.0) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Convex subproblem

namespace sca_detail {

// Functional layout per PSD block (V_s block 0, V_c block 1).
enum Functional : int { f_trace = 0, f_dl = 1, f_target = 2, f_radar_leak = 3, f_ul_leak = 4, n_functionals = 5 };

struct Linearization {
  // whitened units: noise power 1
  double bs_power_max = 0.0;
  double ul_power_max = 0.0;
  bool ul_enabled = true;
  RadarMode mode = RadarMode::conventional;
  double dl_prev = 0.0;  // g^H V_s_prev g
  RadarConstraintTerms radar;
  UlConstraintTerms ul;
  barrier::Functionals funcs;
};

inline int idx(int block, Functional f) { return block * n_functionals + f; }
constexpr int i_p = 2 * n_functionals;
constexpr int i_x = i_p + 1;
constexpr int i_u = i_p + 2;

// -log(s) with affine-or-quadratic s: grad += -a/s, hess += a a^T / s^2 - S / s.
inline void add_neg_log(double s, const Eigen::VectorXd& a, const Eigen::MatrixXd* s_hess, Eigen::VectorXd& g,
                        Eigen::MatrixXd& h, double weight = 1.0) {
  g.noalias() -= weight * a / s;
  h.noalias() += weight * (a * a.transpose()) / (s * s);
  if (s_hess) h.noalias() -= weight * (*s_hess) / s;
}

struct RadarPieces {
  double r = 0.0;
  double t = 0.0;
  Eigen::VectorXd dr, dt;
};

inline RadarPieces radar_pieces(const Linearization& lin, const Eigen::VectorXd& w) {
  const Eigen::Index n = w.size();
  RadarPieces rp;
  rp.dr = Eigen::VectorXd::Zero(n);
  rp.dt = Eigen::VectorXd::Zero(n);
  rp.r = lin.radar.constant - w(idx(0, f_radar_leak)) - w(idx(1, f_radar_leak));
  rp.dr(idx(0, f_radar_leak)) = -1.0;
  rp.dr(idx(1, f_radar_leak)) = -1.0;
  if (lin.ul_enabled) {
    rp.r -= lin.radar.p_coeff * w(i_p);
    rp.dr(i_p) = -lin.radar.p_coeff;
  }
  rp.t = w(idx(0, f_target));
  rp.dt(idx(0, f_target)) = 1.0;
  if (lin.mode == RadarMode::conventional) {
    rp.t += w(idx(1, f_target));
    rp.dt(idx(1, f_target)) = 1.0;
  }
  return rp;
}

/// Main subproblem: maximize the surrogate sum rate. Scalars are (p, x, u) when the
/// UL user is active, none otherwise.
struct SumRateProblem {
  const Linearization* lin;

  double objective(const Eigen::VectorXd& w) const {
    double f = -std::log1p(w(idx(0, f_dl)) + w(idx(1, f_dl))) + w(idx(0, f_dl)) / (lin->dl_prev + 1.0);
    if (lin->ul_enabled) f -= std::log1p(w(i_u));
    return f;
  }

  void objective_derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
    const Eigen::Index n = w.size();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    a(idx(0, f_dl)) = 1.0;
    a(idx(1, f_dl)) = 1.0;
    add_neg_log(1.0 + w(idx(0, f_dl)) + w(idx(1, f_dl)), a, nullptr, g, h);
    g(idx(0, f_dl)) += 1.0 / (lin->dl_prev + 1.0);
    if (lin->ul_enabled) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(i_u) = 1.0;
      add_neg_log(1.0 + w(i_u), e, nullptr, g, h);
    }
  }

  double barrier(const Eigen::VectorXd& w) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double s_pow = lin->bs_power_max - w(idx(0, f_trace)) - w(idx(1, f_trace));
    if (!(s_pow > 0.0)) return inf;
    const RadarPieces rp = radar_pieces(*lin, w);
    const double s_rad = rp.r * rp.t - lin->radar.rhs_numerator;
    if (!(rp.r > 0.0 && rp.t > 0.0 && s_rad > 0.0)) return inf;
    double b = -std::log(s_pow) - std::log(s_rad);
    if (lin->ul_enabled) {
      const double p = w(i_p), x = w(i_x), u = w(i_u);
      const double l = lin->ul.constant - w(idx(0, f_ul_leak)) - w(idx(1, f_ul_leak));
      const double s_ul = p * l - x * x;
      const double s_u = lin->ul.u_bound(x) - u;
      if (!(p > 0.0 && lin->ul_power_max - p > 0.0 && l > 0.0 && s_ul > 0.0 && u > 0.0 && s_u > 0.0)) return inf;
      b += -std::log(p) - std::log(lin->ul_power_max - p) - std::log(s_ul) - std::log(u) - std::log(s_u);
    }
    return b;
  }

  void barrier_derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
    const Eigen::Index n = w.size();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    a(idx(0, f_trace)) = -1.0;
    a(idx(1, f_trace)) = -1.0;
    add_neg_log(lin->bs_power_max - w(idx(0, f_trace)) - w(idx(1, f_trace)), a, nullptr, g, h);

    const RadarPieces rp = radar_pieces(*lin, w);
    {
      const Eigen::VectorXd ds = rp.t * rp.dr + rp.r * rp.dt;
      const Eigen::MatrixXd hs = rp.dr * rp.dt.transpose() + rp.dt * rp.dr.transpose();
      add_neg_log(rp.r * rp.t - lin->radar.rhs_numerator, ds, &hs, g, h);
    }
    if (lin->ul_enabled) {
      const double p = w(i_p), x = w(i_x), u = w(i_u);
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(i_p) = 1.0;
      add_neg_log(p, e, nullptr, g, h);
      add_neg_log(lin->ul_power_max - p, -e, nullptr, g, h);

      const double l = lin->ul.constant - w(idx(0, f_ul_leak)) - w(idx(1, f_ul_leak));
      Eigen::VectorXd dl = Eigen::VectorXd::Zero(n);
      dl(idx(0, f_ul_leak)) = -1.0;
      dl(idx(1, f_ul_leak)) = -1.0;
      Eigen::VectorXd ds = p * dl;
      ds(i_p) += l;
      ds(i_x) -= 2.0 * x;
      Eigen::MatrixXd hs = Eigen::MatrixXd::Zero(n, n);
      hs.col(i_p) += dl;
      hs.row(i_p) += dl.transpose();
      hs(i_x, i_x) = -2.0;
      add_neg_log(p * l - x * x, ds, &hs, g, h);

      Eigen::VectorXd eu = Eigen::VectorXd::Zero(n);
      eu(i_u) = 1.0;
      add_neg_log(u, eu, nullptr, g, h);
      Eigen::VectorXd du = Eigen::VectorXd::Zero(n);
      du(i_x) = 2.0 * lin->ul.x_prev;
      du(i_u) = -1.0;
      add_neg_log(lin->ul.u_bound(x) - u, du, nullptr, g, h);
    }
  }

  double barrier_degree() const { return lin->ul_enabled ? 9.0 : 3.0; }
};

/// Feasibility restoration: maximize log of the linearized radar SINR,
/// log(LHS) + log(a_t^H V a_t), under the power budgets. Scalar: p (if UL active).
struct RestorationProblem {
  const Linearization* lin;

  double objective(const Eigen::VectorXd& w) const {
    const RadarPieces rp = radar_pieces(*lin, w);
    if (!(rp.r > 0.0 && rp.t > 0.0)) return std::numeric_limits<double>::infinity();
    return -std::log(rp.r) - std::log(rp.t);
  }

  void objective_derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
    const RadarPieces rp = radar_pieces(*lin, w);
    add_neg_log(rp.r, rp.dr, nullptr, g, h);
    add_neg_log(rp.t, rp.dt, nullptr, g, h);
  }

  double barrier(const Eigen::VectorXd& w) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double s_pow = lin->bs_power_max - w(idx(0, f_trace)) - w(idx(1, f_trace));
    if (!(s_pow > 0.0)) return inf;
    const RadarPieces rp = radar_pieces(*lin, w);
    if (!(rp.r > 0.0 && rp.t > 0.0)) return inf;
    double b = -std::log(s_pow);
    if (lin->ul_enabled) {
      const double p = w(i_p);
      if (!(p > 0.0 && lin->ul_power_max - p > 0.0)) return inf;
      b += -std::log(p) - std::log(lin->ul_power_max - p);
    }
    return b;
  }

  void barrier_derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
    const Eigen::Index n = w.size();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    a(idx(0, f_trace)) = -1.0;
    a(idx(1, f_trace)) = -1.0;
    add_neg_log(lin->bs_power_max - w(idx(0, f_trace)) - w(idx(1, f_trace)), a, nullptr, g, h);
    if (lin->ul_enabled) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(i_p) = 1.0;
      add_neg_log(w(i_p), e, nullptr, g, h);
      add_neg_log(lin->ul_power_max - w(i_p), -e, nullptr, g, h);
    }
  }

  double barrier_degree() const { return lin->ul_enabled ? 3.0 : 1.0; }
};

static_assert(barrier::Problem<SumRateProblem>);
static_assert(barrier::Problem<RestorationProblem>);

/// Whitened problem data: every field amplitude divided by sigma_n.
struct Whitened {
  ChannelSet ch;
  double beta0_sq = 0.0;
  double bs_power_max = 0.0;
  double ul_power_max = 0.0;
  double theta0 = 0.0;
  double rho_s = 0.0;
  RadarMode mode = RadarMode::conventional;
  bool ul_enabled = true;
};

inline Whitened whiten(const ProblemSpec& spec) {
  const double sigma = std::sqrt(spec.scenario.noise_power);
  Whitened wp;
  wp.ch = spec.channels.scaled(1.0 / sigma);
  wp.beta0_sq = spec.scenario.target_reflectivity / spec.scenario.noise_power;
  wp.bs_power_max = spec.scenario.bs_power_max;
  wp.ul_power_max = spec.scenario.ul_power_max;
  wp.theta0 = spec.scenario.target_angle_deg;
  wp.rho_s = spec.rho_s;
  wp.mode = spec.mode;
  wp.ul_enabled = spec.scenario.ul_power_max > 0.0;
  return wp;
}

inline Linearization linearize(const Whitened& wp, const SCAState& st) {
  Linearization lin;
  lin.bs_power_max = wp.bs_power_max;
  lin.ul_power_max = wp.ul_power_max;
  lin.ul_enabled = wp.ul_enabled;
  lin.mode = wp.mode;
  lin.dl_prev = st.v_s.quad(wp.ch.g);
  lin.radar = radar_constraint_terms(st.psi, wp.ch, 1.0, wp.theta0, wp.rho_s, wp.beta0_sq, wp.mode);
  lin.ul = ul_constraint_terms(st.phi, wp.ch, 1.0, st.x);

  const auto n = wp.ch.n_tx();
  std::vector<CMatrix> m(n_functionals);
  m[f_trace] = CMatrix::Identity(n, n);
  m[f_dl] = wp.ch.g * wp.ch.g.adjoint();
  m[f_target] = lin.radar.a_t * lin.radar.a_t.adjoint();
  m[f_radar_leak] = lin.radar.b_dir * lin.radar.b_dir.adjoint();
  m[f_ul_leak] = lin.ul.c_dir * lin.ul.c_dir.adjoint();
  lin.funcs = {m, m};
  return lin;
}

/// Refreshes Psi, Phi and the tight UL auxiliary x = sqrt(p h^H Phi^{-1} h) at the
/// current covariances.
inline void refresh_state(const Whitened& wp, SCAState& st) {
  const HermitianMatrix v_t = st.v_s + st.v_c;
  st.psi = assemble_psi(wp.ul_enabled ? st.p : 0.0, v_t, wp.ch, 1.0);
  st.phi = assemble_phi(v_t, wp.ch, 1.0);
  if (wp.ul_enabled) {
    const double p_lin = std::max(st.p, 1e-9 * wp.ul_power_max);
    const double gain = wp.ch.h.dot(hermitian_solve(st.phi, wp.ch.h)).real();
    st.x = std::sqrt(p_lin * gain);
    st.u = st.x * st.x;
  } else {
    st.x = 0.0;
    st.u = 0.0;
  }
}

/// Pulls a state strictly inside the budget sets so the barrier can start from it.
inline barrier::Point interior_start(const Whitened& wp, const SCAState& st, bool with_ul_aux) {
  const auto n = st.v_s.dim();
  CMatrix vs = st.v_s.matrix();
  CMatrix vc = st.v_c.matrix();
  const double floor = 1e-6 * wp.bs_power_max / static_cast<double>(n);
  auto make_pd = [&](CMatrix& v) {
    Eigen::LLT<CMatrix> llt(v);
    const bool ok = llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().real().array() > 0.0).all();
    if (!ok) v += floor * CMatrix::Identity(n, n);
  };
  make_pd(vs);
  make_pd(vc);
  const double tr = (vs + vc).trace().real();
  const double cap = (1.0 - 1e-6) * wp.bs_power_max;
  if (tr > cap) {
    vs *= cap / tr;
    vc *= cap / tr;
  }
  barrier::Point z;
  z.blocks = {vs, vc};
  if (wp.ul_enabled) {
    const double p = std::clamp(st.p, 1e-6 * wp.ul_power_max, (1.0 - 1e-6) * wp.ul_power_max);
    if (with_ul_aux) {
      const double x = st.x * (1.0 - 1e-3);
      const double u_cap = st.x * st.x + 2.0 * st.x * (x - st.x);
      z.scalars = Eigen::Vector3d(p, x, 0.5 * u_cap);
    } else {
      z.scalars = Eigen::VectorXd::Constant(1, p);
    }
  } else {
    z.scalars = Eigen::VectorXd(0);
  }
  return z;
}

inline SCAState state_from_point(const Whitened& wp, const barrier::Point& z, int iter) {
  SCAState st;
  st.iter = iter;
  st.v_s = HermitianMatrix(z.blocks[0]);
  st.v_c = HermitianMatrix(z.blocks[1]);
  st.p = wp.ul_enabled ? z.scalars(0) : 0.0;
  refresh_state(wp, st);
  return st;
}

inline double true_radar_sinr(const Whitened& wp, const SCAState& st) {
  return sinr_radar_opt(st.design(), wp.ch, 1.0, wp.theta0, wp.beta0_sq, sinr_mode(wp.mode));
}

inline double true_dl_rate(const Whitened& wp, const SCAState& st) {
  return std::log2(1.0 + sinr_dl(st.design(), wp.ch, 1.0));
}

inline double true_ul_rate(const Whitened& wp, const SCAState& st) {
  if (!wp.ul_enabled) return 0.0;
  return std::log2(1.0 + sinr_ul_opt(st.design(), wp.ch, 1.0));
}

/// Surrogate objective (bits/s/Hz) at stacked functionals w.
inline double surrogate_value(const Linearization& lin, const Eigen::VectorXd& w) {
  const double gs = w(idx(0, f_dl));
  const double gt = gs + w(idx(1, f_dl));
  double v = std::log2(1.0 + gt) - std::log2(1.0 + lin.dl_prev) - (gs - lin.dl_prev) / ((1.0 + lin.dl_prev) * std::numbers::ln2);
  if (lin.ul_enabled) v += std::log2(1.0 + w(i_u));
  return v;
}

struct SubproblemOutcome {
  SCAState next;
  double surrogate = 0.0;
  barrier::Result solve;
};

inline SubproblemOutcome solve_whitened(const Whitened& wp, const SCAState& st, const ScaOptions& opt) {
  const Linearization lin = linearize(wp, st);
  barrier::Point start = interior_start(wp, st, true);
  const SumRateProblem prob{&lin};
  const Eigen::VectorXd w0 = barrier::detail::stack(lin.funcs, start);
  if (!std::isfinite(prob.barrier(w0))) {
    throw InfeasibleError("subproblem: the linearization point does not satisfy the radar constraint strictly");
  }
  barrier::Options bo;
  bo.gap_tol = opt.gap_tol;
  bo.relative_gap = true;
  barrier::Result r = barrier::minimize(prob, lin.funcs, std::move(start), bo);
  const double surrogate = surrogate_value(lin, r.w);
  if (r.status != barrier::Status::optimal) {
    // Near a tight radar threshold the feasible sliver is thin enough for Newton to
    // stall above gap_tol. The stalled iterate is strictly feasible, so it is kept
    // when it still ascends; the trace row records the status.
    const double current = true_dl_rate(wp, st) + true_ul_rate(wp, st);
    const bool stalled =
        r.status == barrier::Status::line_search_failed || r.status == barrier::Status::newton_limit;
    const bool usable = stalled && r.newton_steps > 0 && surrogate >= current;
    if (!usable) throw SolverError(std::string("subproblem solver stopped early: ") + barrier::to_string(r.status));
  }
  SubproblemOutcome out;
  out.surrogate = surrogate;
  out.next = state_from_point(wp, r.point, st.iter + 1);
  out.solve = std::move(r);
  return out;
}

}  // namespace sca_detail

/// Initial point: V_s = V_c = P_b/(2 N_t) I, p = P_u^max, x from the exact UL SINR.
inline SCAState initial_state(const ProblemSpec& spec, const std::optional<TransmitDesign>& init = std::nullopt) {
  const sca_detail::Whitened wp = sca_detail::whiten(spec);
  SCAState st;
  const int n = spec.scenario.n_tx;
  if (init) {
    st.v_s = init->v_s;
    st.v_c = init->v_c;
    st.p = init->p;
  } else {
    st.v_s = HermitianMatrix::identity(n, spec.scenario.bs_power_max / (2.0 * n));
    st.v_c = st.v_s;
    st.p = spec.scenario.ul_power_max;
  }
  sca_detail::refresh_state(wp, st);
  return st;
}

/// One convex subproblem solve from `state` (linearization point and warm start).
inline SCAState solve_subproblem(const SCAState& state, const ProblemSpec& spec) {
  spec.validate();
  const sca_detail::Whitened wp = sca_detail::whiten(spec);
  SCAState st = state;
  sca_detail::refresh_state(wp, st);
  return sca_detail::solve_whitened(wp, st, spec.options).next;
}

/// Surrogate value of the subproblem linearized at `at`, evaluated at `eval`.
inline double surrogate_objective(const SCAState& at, const SCAState& eval, const ProblemSpec& spec) {
  const sca_detail::Whitened wp = sca_detail::whiten(spec);
  SCAState lin_pt = at;
  sca_detail::refresh_state(wp, lin_pt);
  const auto lin = sca_detail::linearize(wp, lin_pt);
  barrier::Point z;
  z.blocks = {eval.v_s.matrix(), eval.v_c.matrix()};
  if (wp.ul_enabled) {
    // best auxiliaries for this (V, p): x on the linearized SINR bound, u on its tangent
    const double l = lin.ul.linearized_gain(eval.v_s + eval.v_c);
    const double x = std::sqrt(std::max(eval.p * l, 0.0));
    z.scalars = Eigen::Vector3d(eval.p, x, std::max(lin.ul.u_bound(x), 0.0));
  } else {
    z.scalars = Eigen::VectorXd(0);
  }
  return sca_detail::surrogate_value(lin, barrier::detail::stack(lin.funcs, z));
}

/// True objective log2(1 + gamma_UL) + log2(1 + gamma_d).
inline double sum_rate(const TransmitDesign& d, const ChannelSet& ch, double sigma2) {
  const double ul = d.p > 0.0 ? std::log2(1.0 + sinr_ul_opt(d, ch, sigma2)) : 0.0;
  return ul + std::log2(1.0 + sinr_dl(d, ch, sigma2));
}

/// Ascent loop. Infeasibility and solver failures are reported through the status.
inline ScaResult run_sca(const ProblemSpec& spec, const std::optional<TransmitDesign>& init = std::nullopt) {
  using namespace sca_detail;
  spec.validate();
  const Whitened wp = whiten(spec);
  const ScaOptions& opt = spec.options;
  ScaResult res;

  SCAState st = initial_state(spec, init);

  auto finish = [&](ScaStatus status, std::string msg) {
    res.status = status;
    res.message = std::move(msg);
    res.design = st.design();
    res.sum_rate = true_dl_rate(wp, st) + true_ul_rate(wp, st);
    res.radar_sinr = true_radar_sinr(wp, st);
    return res;
  };

  // Feasibility restoration: ascend the linearized radar SINR until the true
  // constraint holds with some margin.
  const double rho = spec.rho_s;
  double gamma = true_radar_sinr(wp, st);
  if (!(gamma > rho)) {
    double prev = gamma;
    for (int k = 0; k < opt.max_restoration_iters; ++k) {
      ++res.restoration_iters;
      const Linearization lin = linearize(wp, st);
      const RestorationProblem prob{&lin};
      barrier::Options bo;
      bo.gap_tol = 1e-9;
      const double target = lin.radar.rhs_numerator * (1.0 + 1e-3);
      auto done = [&](const Eigen::VectorXd& w) {
        const RadarPieces rp = radar_pieces(lin, w);
        return rp.r * rp.t >= target;
      };
      barrier::Result r = barrier::minimize(prob, lin.funcs, interior_start(wp, st, false), bo, done);
      // A stall late on the path still leaves a strictly feasible iterate that is
      // at least as good as the start; only a start outside the domain is fatal.
      if (r.status == barrier::Status::line_search_failed && r.newton_steps == 0) {
        return finish(ScaStatus::solver_failure, std::string("feasibility restoration solver failed: ") +
                                                     barrier::to_string(r.status) + " after " +
                                                     std::to_string(r.newton_steps) + " Newton steps");
      }
      st = state_from_point(wp, r.point, 0);
      gamma = true_radar_sinr(wp, st);
      if (gamma > rho) break;
      if (std::abs(gamma - prev) <= 1e-9 * std::abs(gamma)) break;
      prev = gamma;
    }
    if (!(gamma > rho)) {
      return finish(ScaStatus::infeasible, "radar SINR threshold " + std::to_string(linear_to_db(rho)) +
                                               " dB not reachable; best " + std::to_string(linear_to_db(gamma)) +
                                               " dB");
    }
  }

  auto make_row = [&](int j, double surrogate, const char* status, double gap, int newton) {
    SCATraceRow row;
    row.iter = j;
    row.surrogate = surrogate;
    row.dl_rate = true_dl_rate(wp, st);
    row.ul_rate = true_ul_rate(wp, st);
    row.sum_rate = row.dl_rate + row.ul_rate;
    const double g = true_radar_sinr(wp, st);
    row.radar_sinr_db = linear_to_db(g);
    row.radar_feasible = g >= rho * (1.0 - 1e-6);
    row.budget_feasible = st.v_s.trace() + st.v_c.trace() <= wp.bs_power_max + 1e-9 &&
                          st.p <= wp.ul_power_max + 1e-9 && st.p >= 0.0 && st.v_s.is_psd() && st.v_c.is_psd();
    row.solver_status = status;
    row.duality_gap = gap;
    row.newton_steps = newton;
    return row;
  };

  // Row 0 is the starting point; with x tight the surrogate equals the true rate there.
  res.trace.push_back(make_row(0, true_dl_rate(wp, st) + true_ul_rate(wp, st), "initial", 0.0, 0));
  double prev_obj = res.trace.back().surrogate;
  for (int j = 1; j <= opt.max_iters; ++j) {
    SubproblemOutcome out;
    try {
      out = solve_whitened(wp, st, opt);
    } catch (const InfeasibleError& e) {
      return finish(ScaStatus::infeasible, e.what());
    } catch (const SolverError& e) {
      return finish(ScaStatus::solver_failure, e.what());
    }
    st = std::move(out.next);
    st.iter = j;

    res.trace.push_back(make_row(j, out.surrogate, barrier::to_string(out.solve.status), out.solve.gap,
                                 out.solve.newton_steps));

    if (std::abs(out.surrogate - prev_obj) <= opt.rel_tol * std::abs(out.surrogate)) {
      return finish(ScaStatus::converged, "converged");
    }
    prev_obj = out.surrogate;
  }
  return finish(ScaStatus::max_iterations, "iteration limit reached before convergence");
}

}  // namespace iqscc
