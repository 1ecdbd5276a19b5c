#pragma once

// Log-barrier interior-point method for problems of the form
//
//   minimize    f0(w)
//   subject to  barrier domain of phi(w),  V_b > 0 for every PSD block b
//
// where w = L(V_1, ..., V_B, s) stacks a few real linear functionals
// tr(M_bk V_b) of each Hermitian block followed by free real scalars s.
// Because the smooth part only sees V through a handful of functionals, the
// Newton system reduces to a dense system of size dim(w) (Woodbury-style),
// so a step costs O(B K N^3) instead of O(N^6).

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <vector>

#include "iqscc/numerics.hpp"

namespace iqscc::barrier {

using cldouble = std::complex<long double>;
using CMatrixL = Eigen::Matrix<cldouble, Eigen::Dynamic, Eigen::Dynamic>;
using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// Smooth objective f0 and barrier phi over the stacked functional vector w.
/// barrier() returns +inf outside its domain.
template <class P>
concept Problem = requires(const P& p, const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd& h) {
  { p.objective(w) } -> std::convertible_to<double>;
  { p.barrier(w) } -> std::convertible_to<double>;
  p.objective_derivatives(w, g, h);
  p.barrier_derivatives(w, g, h);
  { p.barrier_degree() } -> std::convertible_to<double>;
};

struct Point {
  std::vector<CMatrix> blocks;
  Eigen::VectorXd scalars;
};

struct Options {
  double t0 = 1.0;
  double mu = 10.0;
  double gap_tol = 1e-8;      // bound (nu + lambda^2) / t on f0 - p*
  bool relative_gap = false;  // scale gap_tol by max(1, |f0|)
  double newton_tol = 1e-9;   // lambda^2 / 2
  double stall_tol = 1e-2;    // lambda^2 / 2 below which rounding-limited progress is accepted
  int max_stalled_steps = 20;
  int max_newton = 400;       // total across all centering steps
  std::function<void(double t, double decrement)> on_newton;  // diagnostics hook
};

enum class Status { optimal, early_exit, newton_limit, line_search_failed };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::early_exit: return "early_exit";
    case Status::newton_limit: return "newton_limit";
    case Status::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

struct Result {
  Point point;
  Eigen::VectorXd w;
  double t = 0.0;
  double gap = std::numeric_limits<double>::infinity();
  int newton_steps = 0;
  Status status = Status::optimal;
};

/// Functionals M_bk for each PSD block b.
using Functionals = std::vector<std::vector<CMatrix>>;

namespace detail {

inline Eigen::VectorXd stack(const Functionals& f, const Point& z) {
  Eigen::Index n = z.scalars.size();
  for (const auto& blk : f) n += static_cast<Eigen::Index>(blk.size());
  Eigen::VectorXd w(n);
  Eigen::Index i = 0;
  for (std::size_t b = 0; b < f.size(); ++b) {
    for (const CMatrix& m : f[b]) w(i++) = (m.cwiseProduct(z.blocks[b].transpose())).sum().real();
  }
  w.tail(z.scalars.size()) = z.scalars;
  return w;
}

// -sum log det V_b, +inf when any block is not positive definite.
inline double neg_log_det(const std::vector<CMatrix>& blocks) {
  double acc = 0.0;
  for (const CMatrix& v : blocks) {
    Eigen::LLT<CMatrix> llt(v);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const auto diag = llt.matrixLLT().diagonal().real();
    if ((diag.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    acc -= 2.0 * diag.array().log().sum();
  }
  return acc;
}

template <Problem P>
double total(const P& prob, const Functionals& f, const Point& z, double t) {
  const double nld = neg_log_det(z.blocks);
  if (!std::isfinite(nld)) return nld;
  const Eigen::VectorXd w = stack(f, z);
  const double bar = prob.barrier(w);
  if (!std::isfinite(bar)) return std::numeric_limits<double>::infinity();
  return t * prob.objective(w) + bar + nld;
}

}  // namespace detail

/// Path-following barrier method from a strictly feasible start.
/// `stop_early(w)` may end the solve as soon as the caller is satisfied.
template <Problem P>
Result minimize(const P& prob, const Functionals& funcs, Point start, const Options& opt,
                const std::function<bool(const Eigen::VectorXd&)>& stop_early = {}) {
  Result res;
  res.point = std::move(start);
  Point& z = res.point;

  double nu = prob.barrier_degree();
  Eigen::Index n_mat = 0;
  for (std::size_t b = 0; b < funcs.size(); ++b) {
    nu += static_cast<double>(z.blocks[b].rows());
    n_mat += static_cast<Eigen::Index>(funcs[b].size());
  }
  const Eigen::Index n_sc = z.scalars.size();
  const Eigen::Index n = n_mat + n_sc;

  double t = opt.t0;
  if (!std::isfinite(detail::total(prob, funcs, z, t))) {
    res.status = Status::line_search_failed;
    res.w = detail::stack(funcs, z);
    return res;
  }

  Eigen::VectorXd g0(n), g1(n);
  Eigen::MatrixXd h0(n, n), h1(n, n);
  std::vector<std::vector<CMatrixL>> mv(funcs.size());

  while (true) {
    // Centering.
    int stalled_steps = 0;
    double last_decrement = 0.0;
    while (true) {
      const Eigen::VectorXd w = detail::stack(funcs, z);
      if (stop_early && stop_early(w)) {
        res.status = Status::early_exit;
        res.w = w;
        res.t = t;
        res.gap = nu / t;
        return res;
      }
      g0.setZero();
      h0.setZero();
      g1.setZero();
      h1.setZero();
      prob.objective_derivatives(w, g0, h0);
      prob.barrier_derivatives(w, g1, h1);
      const Eigen::VectorXd grad = t * g0 + g1;
      const Eigen::MatrixXd hess = t * h0 + h1;

      // Reduced Newton system. With y = L(dz) and mu the multipliers of the
      // functional rows, dV_b = V_b + sum_k mu_k V_b M_bk V_b and
      //   [ H   J ] [y ]   [-grad]
      //   [ J' -P ] [mu] = [ w_m ]
      // where P_kj = tr(M_k V M_j V) and J embeds the functional rows. Close to
      // the end of the path P is nearly singular and the mu_k are large with
      // cancelling contributions, so the step is assembled and solved in
      // extended precision after symmetric equilibration.
      const Eigen::Index n_aug = n + n_mat;
      MatrixL a = MatrixL::Zero(n_aug, n_aug);
      a.topLeftCorner(n, n) = hess.template cast<long double>();
      Eigen::Index off = 0;
      for (std::size_t b = 0; b < funcs.size(); ++b) {
        const CMatrixL v = z.blocks[b].template cast<cldouble>();
        const auto kb = static_cast<Eigen::Index>(funcs[b].size());
        mv[b].resize(funcs[b].size());
        for (Eigen::Index k = 0; k < kb; ++k) mv[b][k] = funcs[b][k].template cast<cldouble>() * v;
        for (Eigen::Index k = 0; k < kb; ++k) {
          for (Eigen::Index j = 0; j <= k; ++j) {
            const long double pkj = mv[b][k].cwiseProduct(mv[b][j].transpose()).sum().real();
            a(n + off + k, n + off + j) = a(n + off + j, n + off + k) = -pkj;
          }
          a(off + k, n + off + k) = a(n + off + k, off + k) = 1.0L;
        }
        off += kb;
      }
      VectorL rhs(n_aug);
      rhs.head(n) = -grad.template cast<long double>();
      rhs.tail(n_mat) = w.head(n_mat).template cast<long double>();

      VectorL d(n_aug);
      for (Eigen::Index i = 0; i < n_aug; ++i) {
        const long double m = a.row(i).cwiseAbs().maxCoeff();
        d(i) = m > 0.0L ? 1.0L / std::sqrt(m) : 1.0L;
      }
      const MatrixL as = d.asDiagonal() * a * d.asDiagonal();
      const Eigen::FullPivLU<MatrixL> lu(as);
      VectorL sol = d.asDiagonal() * lu.solve(VectorL(d.asDiagonal() * rhs));
      sol += d.asDiagonal() * lu.solve(VectorL(d.asDiagonal() * (rhs - a * sol)));  // one refinement step
      const VectorL mu = sol.tail(n_mat);

      Point dz;
      dz.blocks.resize(funcs.size());
      Eigen::VectorXd y(n);
      y.tail(n_sc) = sol.segment(n_mat, n_sc).template cast<double>();
      long double decrement_l = 0.0L;
      off = 0;
      for (std::size_t b = 0; b < funcs.size(); ++b) {
        // V^{-1} dV = I + sum_k mu_k M_k V
        const CMatrixL v = z.blocks[b].template cast<cldouble>();
        const auto nb = v.rows();
        CMatrixL x = CMatrixL::Identity(nb, nb);
        for (std::size_t k = 0; k < funcs[b].size(); ++k) x.noalias() += mu(off + static_cast<Eigen::Index>(k)) * mv[b][k];
        decrement_l += (x * x).trace().real();
        CMatrixL dv = v * x;
        dv = (0.5L * (dv + dv.adjoint())).eval();
        // Read y back from the step itself so the matrix and functional parts agree.
        for (std::size_t k = 0; k < funcs[b].size(); ++k) {
          y(off + static_cast<Eigen::Index>(k)) =
              static_cast<double>(funcs[b][k].template cast<cldouble>().cwiseProduct(dv.transpose()).sum().real());
        }
        dz.blocks[b] = dv.template cast<cdouble>();
        off += static_cast<Eigen::Index>(funcs[b].size());
      }
      dz.scalars = y.tail(n_sc);
      const double decrement = static_cast<double>(decrement_l) + y.dot(hess * y);

      if (opt.on_newton) opt.on_newton(t, decrement);
      last_decrement = decrement;
      if (0.5 * decrement <= opt.newton_tol) break;
      if (res.newton_steps >= opt.max_newton) {
        res.status = Status::newton_limit;
        res.w = w;
        res.t = t;
        res.gap = nu / t;
        return res;
      }
      ++res.newton_steps;

      auto step_to = [&](double s) {
        Point c;
        c.blocks.resize(z.blocks.size());
        for (std::size_t b = 0; b < z.blocks.size(); ++b) c.blocks[b] = z.blocks[b] + s * dz.blocks[b];
        c.scalars = z.scalars + s * dz.scalars;
        return c;
      };

      // Armijo backtracking. Once the iterate is nearly centered, rounding can
      // keep the decrement from shrinking further; a failed search or a long
      // tail of tiny steps then counts as centered, which still bounds the
      // suboptimality of the t-problem by the decrement.
      const bool nearly_centered = 0.5 * decrement <= opt.stall_tol;
      if (nearly_centered && ++stalled_steps > opt.max_stalled_steps) break;
      double s = 1.0;
      Point cand;
      const double f_cur = detail::total(prob, funcs, z, t);
      while (true) {
        cand = step_to(s);
        const double f_new = detail::total(prob, funcs, cand, t);
        if (std::isfinite(f_new) && f_new <= f_cur - 0.25 * s * decrement) break;
        s *= 0.5;
        if (s < 1e-12) break;
      }
      if (s < 1e-12) {
        if (nearly_centered) break;
        res.status = Status::line_search_failed;
        res.w = detail::stack(funcs, z);
        res.t = t;
        res.gap = nu / t;
        return res;
      }
      z = std::move(cand);
    }

    res.t = t;
    res.gap = (nu + last_decrement) / t;
    res.w = detail::stack(funcs, z);
    const double scale = opt.relative_gap ? std::max(1.0, std::abs(prob.objective(res.w))) : 1.0;
    if (res.gap <= opt.gap_tol * scale) {
      res.status = Status::optimal;
      return res;
    }
    t *= opt.mu;
  }
}

}  // namespace iqscc::barrier
