#pragma once

// Special functions and Hermitian linear algebra shared by the rest of the library.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "iqscc/errors.hpp"

namespace iqscc {

using cdouble = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Complex Hermitian matrix. Construction checks the Hermitian property and
/// stores the exactly symmetrized value, so downstream quadratic forms are real.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(const CMatrix& m) {
    if (m.rows() != m.cols()) {
      throw DomainError("HermitianMatrix: matrix is not square");
    }
    const double scale = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
    const double tol = 1e-12 + 1e-12 * scale;
    const double asym = m.size() == 0 ? 0.0 : (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (asym > tol) {
      throw DomainError("HermitianMatrix: asymmetry " + std::to_string(asym) + " exceeds tolerance");
    }
    m_ = 0.5 * (m + m.adjoint());
  }

  static HermitianMatrix zero(Eigen::Index n) { return HermitianMatrix(CMatrix::Zero(n, n)); }
  static HermitianMatrix identity(Eigen::Index n, double scale = 1.0) {
    return HermitianMatrix(CMatrix::Identity(n, n) * scale);
  }
  static HermitianMatrix outer(const CVector& v) { return HermitianMatrix(v * v.adjoint()); }

  /// Builds the matrix and asserts positive semidefiniteness; throws when the
  /// smallest eigenvalue is below -1e-9 times the largest magnitude.
  static HermitianMatrix psd(const CMatrix& m) {
    HermitianMatrix h(m);
    if (!h.is_psd()) {
      throw NotPositiveDefiniteError("HermitianMatrix: matrix is not positive semidefinite");
    }
    h.psd_asserted_ = true;
    return h;
  }

  const CMatrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  bool psd_asserted() const { return psd_asserted_; }

  Eigen::VectorXd eigenvalues() const {
    if (dim() == 0) return {};
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  bool is_psd(double rel_tol = 1e-9) const {
    if (dim() == 0) return true;
    const Eigen::VectorXd ev = eigenvalues();
    const double big = ev.cwiseAbs().maxCoeff();
    return ev.minCoeff() >= -rel_tol * big;
  }

  double trace() const { return m_.trace().real(); }

  /// v^H M v
  double quad(const CVector& v) const { return v.dot(m_ * v).real(); }

  HermitianMatrix operator+(const HermitianMatrix& o) const { return HermitianMatrix(m_ + o.m_); }
  HermitianMatrix operator*(double s) const { return HermitianMatrix(m_ * s); }

 private:
  CMatrix m_;
  bool psd_asserted_ = false;
};

// ---------------------------------------------------------------------------
// Gaussian tail function

/// Q(x) = P(Z > x) for standard normal Z.
inline double standard_normal_q(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double standard_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace detail {

// Acklam's rational approximation of the standard normal quantile, |rel err| < 1.2e-9.
inline double normal_quantile_approx(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Inverse of standard_normal_q: returns x with Q(x) = p.
inline double standard_normal_q_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("standard_normal_q_inv: p must lie in (0, 1), got " + std::to_string(p));
  }
  double x = -detail::normal_quantile_approx(p);
  // Halley polish against the erfc-based tail; one step already reaches double precision.
  for (int it = 0; it < 2; ++it) {
    const double e = standard_normal_q(x) - p;
    const double u = e / standard_normal_pdf(x);
    x += u / (1.0 - 0.5 * x * u);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Modified Bessel functions of the first kind

/// Exponentially scaled values e^{-x} I_k(x) for k = 0..n_max, x >= 0.
/// Miller's backward recurrence normalized with e^{x} = I_0(x) + 2 sum_{k>=1} I_k(x).
inline std::vector<double> bessel_i_scaled_sequence(int n_max, double x) {
  if (n_max < 0) throw DomainError("bessel_i_scaled_sequence: negative order");
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("bessel_i_scaled_sequence: x must be finite and >= 0");
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (x <= 1.0) {
    // Power series; the backward recurrence would overflow for tiny x.
    const double y = 0.25 * x * x;
    const double ex = std::exp(-x);
    double lead = 1.0;  // (x/2)^k / k!
    for (int k = 0; k <= n_max; ++k) {
      if (k > 0) lead *= 0.5 * x / k;
      double term = lead;
      double sum = lead;
      for (int m = 1; m < 200 && term > 1e-18 * sum; ++m) {
        term *= y / (static_cast<double>(m) * (m + k));
        sum += term;
      }
      out[static_cast<std::size_t>(k)] = ex * sum;
    }
    return out;
  }
  // I_k / I_0 decays roughly like exp(-k^2 / 2x); 10 sqrt(x) extra orders leave < e^-50.
  const int start = n_max + 30 + static_cast<int>(std::ceil(10.0 * std::sqrt(x)));
  const double two_over_x = 2.0 / x;
  double i_next = 0.0;  // I_{k+1}
  double i_cur = 1e-300;  // I_k, arbitrary seed at k = start
  double norm = 0.0;
  for (int k = start; k >= 1; --k) {
    const double i_prev = k * two_over_x * i_cur + i_next;  // I_{k-1}
    norm += 2.0 * i_cur;
    if (k <= n_max) out[static_cast<std::size_t>(k)] = i_cur;
    i_next = i_cur;
    i_cur = i_prev;
    if (std::abs(i_cur) > 1e250) {
      constexpr double s = 1e-250;
      i_cur *= s;
      i_next *= s;
      norm *= s;
      for (int j = k; j <= n_max; ++j) out[static_cast<std::size_t>(j)] *= s;
    }
  }
  norm += i_cur;
  out[0] = i_cur;
  for (double& v : out) v /= norm;
  return out;
}

/// e^{-|x|} I_n(x).
inline double bessel_i_scaled(int order, double x) {
  if (order < 0) throw DomainError("bessel_i: order must be >= 0");
  const double ax = std::abs(x);
  const double v = bessel_i_scaled_sequence(order, ax)[static_cast<std::size_t>(order)];
  return (x < 0.0 && (order % 2 == 1)) ? -v : v;
}

/// I_n(x) for |x| <= 700.
inline double bessel_i(int order, double x) {
  if (!std::isfinite(x) || std::abs(x) > 700.0) {
    throw OverflowError("bessel_i: |x| must be <= 700 to avoid overflow");
  }
  if (x == 0.0) {
    if (order < 0) throw DomainError("bessel_i: order must be >= 0");
    return order == 0 ? 1.0 : 0.0;
  }
  return bessel_i_scaled(order, x) * std::exp(std::abs(x));
}

/// Generalized Marcum Q function Q_M(a, b) via the Bessel series
///   Q_1(a,b) = e^{-(a^2+b^2)/2} sum_{k>=0} (a/b)^k I_k(ab)         (a < b)
///   Q_1(a,b) = 1 - e^{-(a^2+b^2)/2} sum_{k>=1} (b/a)^k I_k(ab)     (a >= b)
///   Q_M = Q_1 + e^{-(a^2+b^2)/2} sum_{k=1}^{M-1} (b/a)^k I_k(ab)
inline double marcum_q(int order, double a, double b) {
  if (order < 1) throw DomainError("marcum_q: order must be >= 1");
  if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("marcum_q: a and b must be finite and nonnegative");
  }
  if (b == 0.0) return 1.0;
  if (a == 0.0) {
    // Q_M(0, b) = e^{-b^2/2} sum_{k<M} (b^2/2)^k / k!
    const double y = 0.5 * b * b;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < order; ++k) {
      term *= y / k;
      sum += term;
    }
    return std::min(1.0, std::exp(-y) * sum);
  }
  // Truncate once a term drops below 1e-16 of the running sum (well inside 1e-10).
  constexpr double rel_tol = 1e-16;
  const double x = a * b;
  const double envelope = std::exp(-0.5 * (a - b) * (a - b));
  const int k_max = order + 40 + static_cast<int>(std::ceil(12.0 * std::sqrt(x)));
  const std::vector<double> ik = bessel_i_scaled_sequence(k_max, x);

  double q1 = 0.0;
  if (a < b) {
    const double r = a / b;
    double sum = 0.0;
    double rk = 1.0;
    for (int k = 0; k <= k_max; ++k) {
      const double term = rk * ik[static_cast<std::size_t>(k)];
      sum += term;
      if (k > 0 && term <= rel_tol * sum && ik[static_cast<std::size_t>(k)] < ik[static_cast<std::size_t>(k - 1)]) break;
      rk *= r;
    }
    q1 = envelope * sum;
  } else {
    const double r = b / a;
    double sum = 0.0;
    double rk = r;
    for (int k = 1; k <= k_max; ++k) {
      const double term = rk * ik[static_cast<std::size_t>(k)];
      sum += term;
      if (term <= rel_tol * sum && ik[static_cast<std::size_t>(k)] < ik[static_cast<std::size_t>(k - 1)]) break;
      rk *= r;
    }
    q1 = 1.0 - envelope * sum;
  }
  if (order > 1) {
    const double r = b / a;
    double rk = 1.0;
    double extra = 0.0;
    for (int k = 1; k < order; ++k) {
      rk *= r;
      extra += rk * ik[static_cast<std::size_t>(k)];
    }
    q1 += envelope * extra;
  }
  return std::clamp(q1, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Hermitian linear algebra

/// Solves M x = b for Hermitian positive definite M (Cholesky, no pivoting).
inline CVector hermitian_solve(const CMatrix& m, const CVector& b) {
  if (m.rows() != m.cols() || m.rows() != b.size()) {
    throw DomainError("hermitian_solve: dimension mismatch");
  }
  Eigen::LLT<CMatrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("hermitian_solve: Cholesky factorization failed");
  }
  return llt.solve(b);
}

inline CVector hermitian_solve(const HermitianMatrix& m, const CVector& b) {
  return hermitian_solve(m.matrix(), b);
}

struct Eigenpair {
  double value = 0.0;
  CVector vector;
};

/// Largest eigenvalue and its unit eigenvector. The global phase is fixed so the
/// largest-magnitude component is real and positive.
inline Eigenpair principal_eigenpair(const CMatrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DomainError("principal_eigenpair: matrix must be square and non-empty");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  const Eigen::Index last = m.rows() - 1;
  CVector v = es.eigenvectors().col(last);
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  const cdouble ph = v(imax) / std::abs(v(imax));
  v /= ph;
  return {es.eigenvalues()(last), v};
}

inline Eigenpair principal_eigenpair(const HermitianMatrix& m) { return principal_eigenpair(m.matrix()); }

// ---------------------------------------------------------------------------
// Unit helpers

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) {
  return lin > 0.0 ? 10.0 * std::log10(lin) : -std::numeric_limits<double>::infinity();
}

}  // namespace iqscc
