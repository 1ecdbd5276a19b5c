#pragma once

// Detection theory for the radar leg: Gaussian ROC, CW/CS/QI parameters,
// thermal photon model and the Pd -> SINR inversion.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "iqscc/errors.hpp"
#include "iqscc/numerics.hpp"
#include "iqscc/scenario.hpp"

namespace iqscc {

/// qi uses the closed forms exactly as printed; qi_moments uses A1 = sigma0/sigma1,
/// A2 = mu1/sigma1 computed from the same correlation-operator moments.
enum class Protocol { cw, cs, qi, qi_moments };

inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::cw: return "CW";
    case Protocol::cs: return "CS";
    case Protocol::qi: return "QI";
    case Protocol::qi_moments: return "QI-moments";
  }
  return "unknown";
}

inline Protocol parse_protocol(std::string_view s) {
  if (s == "CW" || s == "cw") return Protocol::cw;
  if (s == "CS" || s == "cs") return Protocol::cs;
  if (s == "QI" || s == "qi") return Protocol::qi;
  if (s == "QI-moments" || s == "qi-moments" || s == "qi_moments") return Protocol::qi_moments;
  throw ConfigError("unknown radar protocol '" + std::string(s) + "' (expected CW, CS, QI or QI-moments)");
}

struct RadarProtocolParams {
  double a1 = 1.0;
  double a2 = 0.0;
  Protocol protocol = Protocol::cw;
};

struct DetectionSpec {
  double pd_min = 0.5;
  double pf_max = 1e-6;
  int k = 1;
  Protocol protocol = Protocol::cs;
  double frequency_hz = 24e9;
  double temperature_k = 293.0;
  double eta = 1e-11;

  void validate() const {
    if (!(pd_min > 0.0 && pd_min < 1.0)) throw ConfigError("detection.pd_min must lie in (0, 1)");
    if (!(pf_max > 0.0 && pf_max < 1.0)) throw ConfigError("detection.pf_max must lie in (0, 1)");
    if (k < 1) throw ConfigError("detection.k must be >= 1");
    if (!(frequency_hz > 0.0)) throw ConfigError("detection.frequency_hz must be > 0");
    if (!(temperature_k >= 0.0)) throw ConfigError("detection.temperature_k must be >= 0");
    if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("detection.transmissivity must lie in (0, 1)");
  }
};

/// Two-mode squeezed vacuum in (x_s, p_s, x_i, p_i) ordering, shot-noise units.
struct TMSVCovariance {
  double s = 1.0;  // 2 N_q + 1
  double c = 0.0;  // 2 sqrt(N_q (N_q + 1))

  static TMSVCovariance from_photons(double n_q) {
    if (!(n_q >= 0.0)) throw DomainError("TMSVCovariance: N_q must be >= 0");
    return {2.0 * n_q + 1.0, 2.0 * std::sqrt(n_q * (n_q + 1.0))};
  }
  bool physical(double tol = 1e-12) const { return s >= 1.0 && c * c <= s * s - 1.0 + tol * s * s; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d v = Eigen::Matrix4d::Zero();
    v.diagonal().setConstant(s);
    v(0, 2) = v(2, 0) = c;
    v(1, 3) = v(3, 1) = -c;
    return v;
  }
};

// ---------------------------------------------------------------------------
// ROC

/// P_d = Q(A1 Q^{-1}(P_f) - A2)
inline double roc_pd(const RadarProtocolParams& prm, double pf) {
  if (!(pf > 0.0 && pf < 1.0)) throw DomainError("roc_pd: pf must lie in (0, 1)");
  return standard_normal_q(prm.a1 * standard_normal_q_inv(pf) - prm.a2);
}

inline RadarProtocolParams cw_params(double gamma, int k) {
  if (!(gamma >= 0.0)) throw DomainError("cw_params: gamma must be >= 0");
  if (k < 1) throw DomainError("cw_params: K must be >= 1");
  return {1.0, std::sqrt(2.0 * gamma * k), Protocol::cw};
}

/// Textbook coherent detector, Q(Q^{-1}(P_f) - sqrt(K gamma)).
inline double kay_pd(double gamma, int k, double pf) {
  if (!(pf > 0.0 && pf < 1.0)) throw DomainError("kay_pd: pf must lie in (0, 1)");
  if (!(gamma >= 0.0) || k < 1) throw DomainError("kay_pd: need gamma >= 0 and K >= 1");
  return standard_normal_q(standard_normal_q_inv(pf) - std::sqrt(k * gamma));
}

/// Noncoherent (envelope) detector, Q_1(sqrt(2 gamma), sqrt(-2 ln P_f)).
inline double marcum_pd(double gamma, double pf) {
  if (!(pf > 0.0 && pf < 1.0)) throw DomainError("marcum_pd: pf must lie in (0, 1)");
  if (!(gamma >= 0.0)) throw DomainError("marcum_pd: gamma must be >= 0");
  return marcum_q(1, std::sqrt(2.0 * gamma), std::sqrt(-2.0 * std::log(pf)));
}

// ---------------------------------------------------------------------------
// Photon statistics

inline constexpr double planck_h = 6.62607015e-34;
inline constexpr double boltzmann_k = 1.380649e-23;

/// Bose-Einstein occupation 1 / (exp(h f / k_B T) - 1).
inline double thermal_photons(double f_hz, double temperature_k) {
  if (!(f_hz > 0.0)) throw DomainError("thermal_photons: frequency must be > 0");
  if (!(temperature_k >= 0.0)) throw DomainError("thermal_photons: temperature must be >= 0");
  if (temperature_k == 0.0) return 0.0;
  return 1.0 / std::expm1(planck_h * f_hz / (boltzmann_k * temperature_k));
}

/// B = sigma_n^2 / (N_n h f)
inline double effective_bandwidth(double noise_power_watt, double n_n, double f_hz) {
  if (!(noise_power_watt > 0.0 && n_n > 0.0 && f_hz > 0.0)) {
    throw DomainError("effective_bandwidth: all arguments must be > 0");
  }
  return noise_power_watt / (n_n * planck_h * f_hz);
}

inline RadarProtocolParams cs_params(double gamma, double n_n, int k) {
  if (!(gamma >= 0.0)) throw DomainError("cs_params: gamma must be >= 0");
  if (!(n_n > 0.0)) throw DomainError("cs_params: N_n must be > 0");
  if (k < 1) throw DomainError("cs_params: K must be >= 1");
  return {1.0, 2.0 * std::sqrt(gamma * n_n * k / (2.0 * n_n + 1.0)), Protocol::cs};
}

namespace detail {
inline void check_qi_args(const char* who, double gamma, double n_n, double eta, int k) {
  if (!(gamma > 0.0)) throw DomainError(std::string(who) + ": gamma must be > 0");
  if (!(n_n > 0.0)) throw DomainError(std::string(who) + ": N_n must be > 0");
  if (!(eta > 0.0 && eta < 1.0)) throw DomainError(std::string(who) + ": eta must lie in (0, 1)");
  if (k < 1) throw DomainError(std::string(who) + ": K must be >= 1");
}
}  // namespace detail

/// Closed forms as printed for the correlation-operator receiver (gamma = eta N_q / N_n).
inline RadarProtocolParams qi_params(double gamma, double n_n, double eta, int k) {
  detail::check_qi_args("qi_params", gamma, n_n, eta, k);
  const double tail = (eta / gamma) * (1.0 + 1.0 / n_n);
  const double a1 = std::sqrt(1.0 + (4.0 * gamma * n_n + 3.0 * eta) / (2.0 * n_n + 1.0 + tail));
  const double a2 =
      2.0 * std::sqrt((gamma * n_n + eta) * k / (8.0 * gamma * n_n + 7.0 * eta + 2.0 * n_n + 1.0 + tail));
  return {a1, a2, Protocol::qi};
}

/// Same moments, read through A1 = sigma0/sigma1 and A2 = mu1 sqrt(K)/sigma1.
inline RadarProtocolParams qi_params_moments(double gamma, double n_n, double eta, int k) {
  detail::check_qi_args("qi_params_moments", gamma, n_n, eta, k);
  const double tail = (eta / gamma) * (1.0 + 1.0 / n_n);
  const double a1 = 1.0 / std::sqrt(1.0 + (4.0 * gamma * n_n + 3.0 * eta) / (2.0 * n_n + 1.0 + tail));
  const double a2 =
      2.0 * std::sqrt((gamma * n_n + eta) * k / (4.0 * gamma * n_n + 3.0 * eta + 2.0 * n_n + 1.0 + tail));
  return {a1, a2, Protocol::qi_moments};
}

inline RadarProtocolParams qi_params_from_photons(double n_q, double eta, double n_n, int k) {
  if (!(n_q > 0.0)) throw DomainError("qi_params_from_photons: N_q must be > 0");
  if (!(n_n > 0.0)) throw DomainError("qi_params_from_photons: N_n must be > 0");
  return qi_params(eta * n_q / n_n, n_n, eta, k);
}

inline RadarProtocolParams protocol_params(Protocol p, double gamma, int k, double n_n, double eta) {
  switch (p) {
    case Protocol::cw: return cw_params(gamma, k);
    case Protocol::cs: return cs_params(gamma, n_n, k);
    case Protocol::qi: return qi_params(gamma, n_n, eta, k);
    case Protocol::qi_moments: return qi_params_moments(gamma, n_n, eta, k);
  }
  throw DomainError("protocol_params: unknown protocol");
}

// ---------------------------------------------------------------------------
// Gaussian moment oracle for the correlation operator c = x_r x_i - p_r p_i

struct QiMoments {
  double mean_h1 = 0.0;
  double var_h0 = 0.0;
  double var_h1 = 0.0;
  double second_moment_h1 = 0.0;
};

namespace detail {

// Covariance of (x_r, p_r, x_i, p_i) after the signal passes a thermal-loss
// channel of transmissivity eta that adds n_env photons on the return.
inline Eigen::Matrix4d received_covariance(double n_q, double eta, double n_env) {
  const Eigen::Matrix4d v = TMSVCovariance::from_photons(n_q).matrix();
  Eigen::Matrix4d x = Eigen::Matrix4d::Identity();
  x(0, 0) = x(1, 1) = std::sqrt(eta);
  Eigen::Matrix4d y = Eigen::Matrix4d::Zero();
  y(0, 0) = y(1, 1) = (1.0 - eta) * (2.0 * n_env + 1.0);
  return x * v * x.transpose() + y;
}

// <c> and <c^2> for a zero-mean Gaussian state, with operator ordering kept
// through G = V + i Omega (symmetrized covariance plus commutator).
inline std::pair<double, double> correlation_moments(const Eigen::Matrix4d& v) {
  using C = std::complex<double>;
  Eigen::Matrix4cd g = v.cast<C>();
  const C i1(0.0, 1.0);
  for (int m = 0; m < 2; ++m) {
    g(2 * m, 2 * m + 1) += i1;
    g(2 * m + 1, 2 * m) -= i1;
  }
  // c = sum_t s_t R_a(t) R_b(t), terms (x_r, x_i, +1) and (p_r, p_i, -1)
  const std::array<std::array<int, 2>, 2> idx{{{0, 2}, {1, 3}}};
  const std::array<double, 2> sign{1.0, -1.0};
  C mean = 0.0;
  C second = 0.0;
  for (int t = 0; t < 2; ++t) {
    mean += sign[t] * g(idx[t][0], idx[t][1]);
    for (int u = 0; u < 2; ++u) {
      const int a = idx[t][0], b = idx[t][1], c = idx[u][0], d = idx[u][1];
      second += sign[t] * sign[u] * (g(a, b) * g(c, d) + g(a, c) * g(b, d) + g(a, d) * g(b, c));
    }
  }
  return {mean.real(), second.real()};
}

}  // namespace detail

/// Moments of the correlation operator from the Gaussian state. Under H1 the
/// environment occupation is scaled to N_n / (1 - eta) so the return carries N_n
/// thermal photons; under H0 the return is pure background (eta = 0).
inline QiMoments qi_moment_oracle(double n_q, double eta, double n_n) {
  if (!(n_q >= 0.0 && n_n >= 0.0 && eta >= 0.0 && eta < 1.0)) {
    throw DomainError("qi_moment_oracle: need N_q >= 0, N_n >= 0, 0 <= eta < 1");
  }
  const auto [m1, s1] = detail::correlation_moments(detail::received_covariance(n_q, eta, n_n / (1.0 - eta)));
  const auto [m0, s0] = detail::correlation_moments(detail::received_covariance(n_q, 0.0, n_n));
  QiMoments out;
  out.mean_h1 = m1;
  out.second_moment_h1 = s1;
  out.var_h1 = s1 - m1 * m1;
  out.var_h0 = s0 - m0 * m0;
  return out;
}

// ---------------------------------------------------------------------------
// SINR inversion

class NonMonotoneError : public Error {
 public:
  using Error::Error;
};

class UnattainableError : public Error {
 public:
  using Error::Error;
};

/// Smallest gamma (linear) with roc_pd(params(gamma), pf) >= pd. The Pd curve is
/// scanned on a 0.25 dB grid over [-60, 60] dB before bisection; a decrease before
/// pd is reached raises NonMonotoneError.
inline double required_sinr(Protocol protocol, double pd, double pf, int k, double n_n, double eta) {
  if (!(pf > 0.0 && pf < 1.0)) throw DomainError("required_sinr: pf must lie in (0, 1)");
  if (!(pd > 0.0 && pd < 1.0)) throw DomainError("required_sinr: pd must lie in (0, 1)");
  auto pd_at = [&](double gamma) { return roc_pd(protocol_params(protocol, gamma, k, n_n, eta), pf); };
  if (pd <= pf) return 0.0;

  constexpr double lo_db = -60.0, hi_db = 60.0, step_db = 0.25;
  double prev_db = lo_db;
  double prev_pd = pd_at(db_to_linear(lo_db));
  if (prev_pd >= pd) {
    // Already met at the bottom of the bracket: refine in linear units toward 0.
    double lo = 0.0, hi = db_to_linear(lo_db);
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (pd_at(mid) >= pd ? hi : lo) = mid;
    }
    return hi;
  }
  const int steps = static_cast<int>(std::lround((hi_db - lo_db) / step_db));
  for (int i = 1; i <= steps; ++i) {
    const double g_db = lo_db + step_db * i;
    const double v = pd_at(db_to_linear(g_db));
    if (v < prev_pd) {
      throw NonMonotoneError(std::string("required_sinr: Pd decreases in gamma near ") + std::to_string(g_db) +
                             " dB for protocol " + to_string(protocol));
    }
    if (v >= pd) {
      double lo = prev_db, hi = g_db;
      while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        (pd_at(db_to_linear(mid)) >= pd ? hi : lo) = mid;
      }
      return db_to_linear(hi);
    }
    prev_db = g_db;
    prev_pd = v;
  }
  throw UnattainableError(std::string("required_sinr: Pd target not reached below 60 dB for protocol ") +
                          to_string(protocol));
}

/// Threshold (linear) implied by a detection spec, with N_n from the thermal model.
inline double derive_rho_s(const DetectionSpec& spec) {
  spec.validate();
  const double n_n = thermal_photons(spec.frequency_hz, spec.temperature_k);
  return required_sinr(spec.protocol, spec.pd_min, spec.pf_max, spec.k, n_n, spec.eta);
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct McResult {
  double pf_hat = 0.0;
  double pd_hat = 0.0;
  double pd_analytic = 0.0;
  double pd_sigma = 0.0;  // binomial standard deviation at pd_analytic
  std::uint64_t trials = 0;
};

/// Simulates the K-sample mean under both hypotheses with per-sample statistics
/// sigma1 = 1, sigma0 = A1, mu1 = A2 / sqrt(K), thresholded at sigma0/sqrt(K) Q^{-1}(pf).
/// Work is split into a fixed number of shards with their own generators, so the
/// result does not depend on the thread count.
inline McResult mc_validate(const RadarProtocolParams& prm, double pf, int k, std::uint64_t trials,
                            std::uint64_t seed, unsigned threads = 1) {
  if (!(pf > 0.0 && pf < 1.0)) throw DomainError("mc_validate: pf must lie in (0, 1)");
  if (k < 1 || trials < 1) throw DomainError("mc_validate: need K >= 1 and trials >= 1");
  constexpr std::uint32_t n_shards = 16;
  const double sk = std::sqrt(static_cast<double>(k));
  const double zeta = prm.a1 / sk * standard_normal_q_inv(pf);
  const double mu1 = prm.a2 / sk;

  std::array<std::uint64_t, n_shards> hits0{}, hits1{};
  auto run_shard = [&](std::uint32_t s) {
    const std::uint64_t n = trials / n_shards + (s < trials % n_shards ? 1 : 0);
    auto rng = make_rng(seed, RngStream::monte_carlo, s);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uint64_t h0 = 0, h1 = 0;
    for (std::uint64_t t = 0; t < n; ++t) {
      double sum0 = 0.0, sum1 = 0.0;
      for (int j = 0; j < k; ++j) sum0 += prm.a1 * nd(rng);
      for (int j = 0; j < k; ++j) sum1 += mu1 + nd(rng);
      h0 += sum0 / k > zeta;
      h1 += sum1 / k > zeta;
    }
    hits0[s] = h0;
    hits1[s] = h1;
  };

  threads = std::max(1u, std::min(threads, n_shards));
  if (threads == 1) {
    for (std::uint32_t s = 0; s < n_shards; ++s) run_shard(s);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::uint32_t s = w; s < n_shards; s += threads) run_shard(s);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::uint64_t c0 = 0, c1 = 0;
  for (std::uint32_t s = 0; s < n_shards; ++s) {
    c0 += hits0[s];
    c1 += hits1[s];
  }
  McResult r;
  r.trials = trials;
  r.pf_hat = static_cast<double>(c0) / static_cast<double>(trials);
  r.pd_hat = static_cast<double>(c1) / static_cast<double>(trials);
  r.pd_analytic = roc_pd(prm, pf);
  r.pd_sigma = std::sqrt(r.pd_analytic * (1.0 - r.pd_analytic) / static_cast<double>(trials));
  return r;
}

}  // namespace iqscc
