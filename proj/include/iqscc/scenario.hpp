#pragma once

// Array geometry, line-of-sight channels and the interference matrices of the
// full-duplex base station.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "iqscc/errors.hpp"
#include "iqscc/numerics.hpp"

namespace iqscc {

/// Named random sub-streams derived from one experiment seed.
enum class RngStream : std::uint32_t { channels = 1, monte_carlo = 2, validation = 3 };

inline std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream, std::uint32_t shard = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), shard};
  return std::mt19937_64(seq);
}

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct Interferer {
  double angle_deg = 0.0;
  cdouble amplitude{0.0, 0.0};  // beta_i
};

/// Physical configuration of one base-station snapshot. Powers in watts, angles in
/// degrees, gains linear.
struct Scenario {
  int n_tx = 16;
  int n_rx = 16;
  double bs_power_max = 1.0;   // P_b^max
  double ul_power_max = 0.2;   // P_u^max; 0 disables the uplink user
  double noise_power = 5e-12;  // sigma_n^2
  double target_angle_deg = 0.0;
  double target_reflectivity = 1e-11;  // |beta_0|^2
  std::vector<Interferer> interferers;
  double si_power = std::pow(10.0, -11.5);  // E||H_SI||_F^2
  double dl_angle_deg = 30.0;
  double dl_pathloss = std::pow(10.0, -9.5);
  double ul_angle_deg = -30.0;
  double ul_pathloss = std::pow(10.0, -9.5);
  std::uint64_t rng_seed = 1;

  double beta0() const { return std::sqrt(target_reflectivity); }

  /// Defaults for the 16x16 campaign: two interferers at -50 and +40 degrees with
  /// |beta_i|^2 = -65 dB, target broadside, DL user at +30, UL user at -30 degrees.
  static Scenario campaign_defaults() {
    Scenario s;
    const double amp = std::sqrt(std::pow(10.0, -6.5));
    s.interferers = {{-50.0, {amp, 0.0}}, {40.0, {amp, 0.0}}};
    return s;
  }

  void validate() const {
    auto angle_ok = [](double a) { return std::isfinite(a) && a > -90.0 && a < 90.0; };
    if (n_tx < 1) throw ConfigError("scenario.n_tx must be >= 1");
    if (n_rx < 1) throw ConfigError("scenario.n_rx must be >= 1");
    if (!(bs_power_max > 0.0)) throw ConfigError("scenario.bs_power_max_watt must be > 0");
    if (!(ul_power_max >= 0.0)) throw ConfigError("scenario.ul_power_max_watt must be >= 0");
    if (!(noise_power > 0.0)) throw ConfigError("scenario.noise_power_watt must be > 0");
    if (!(target_reflectivity > 0.0 && target_reflectivity < 1.0)) {
      throw ConfigError("scenario.target_reflectivity must lie in (0, 1)");
    }
    if (!(si_power >= 0.0)) throw ConfigError("scenario.si_power must be >= 0");
    if (!(dl_pathloss > 0.0)) throw ConfigError("scenario.dl_pathloss must be > 0");
    if (!(ul_pathloss > 0.0)) throw ConfigError("scenario.ul_pathloss must be > 0");
    if (!angle_ok(target_angle_deg)) throw ConfigError("scenario.target_angle_deg must lie in (-90, 90)");
    if (!angle_ok(dl_angle_deg)) throw ConfigError("scenario.dl_angle_deg must lie in (-90, 90)");
    if (!angle_ok(ul_angle_deg)) throw ConfigError("scenario.ul_angle_deg must lie in (-90, 90)");
    for (const auto& it : interferers) {
      if (!angle_ok(it.angle_deg)) throw ConfigError("scenario.interferers[].angle_deg must lie in (-90, 90)");
      if (!std::isfinite(it.amplitude.real()) || !std::isfinite(it.amplitude.imag())) {
        throw ConfigError("scenario.interferers[].amplitude must be finite");
      }
    }
  }
};

/// Channel realization. C = B + beta_0 A(theta_0).
struct ChannelSet {
  CVector g;     // DL channel, N_t
  CVector h;     // UL channel, N_r
  CMatrix h_si;  // residual self-interference, N_r x N_t
  CMatrix b;     // interferers + self-interference
  CMatrix c;     // b plus the target echo
  std::vector<std::string> warnings;

  Eigen::Index n_tx() const { return g.size(); }
  Eigen::Index n_rx() const { return h.size(); }

  /// All field amplitudes multiplied by s (powers by s^2).
  ChannelSet scaled(double s) const {
    ChannelSet out{g * s, h * s, h_si * s, b * s, c * s, warnings};
    return out;
  }
};

/// ULA steering vector with half-wavelength spacing: [e^{j pi k sin(theta)}]_k / sqrt(n).
inline CVector steering_vector(double theta_deg, int n) {
  if (n < 1) throw DomainError("steering_vector: antenna count must be >= 1");
  const double phase = std::numbers::pi * std::sin(deg_to_rad(theta_deg));
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  CVector a(n);
  for (int k = 0; k < n; ++k) a(k) = std::polar(norm, phase * k);
  return a;
}

inline CVector steering_rx(double theta_deg, int n_rx) { return steering_vector(theta_deg, n_rx); }
inline CVector steering_tx(double theta_deg, int n_tx) { return steering_vector(theta_deg, n_tx); }

/// A(theta) = a_r(theta) a_t(theta)^H
inline CMatrix response_matrix(double theta_deg, int n_rx, int n_tx) {
  return steering_rx(theta_deg, n_rx) * steering_tx(theta_deg, n_tx).adjoint();
}

inline ChannelSet build_channels(const Scenario& s) {
  s.validate();
  ChannelSet ch;
  ch.g = std::sqrt(s.dl_pathloss * s.n_tx) * steering_tx(s.dl_angle_deg, s.n_tx);
  ch.h = std::sqrt(s.ul_pathloss * s.n_rx) * steering_rx(s.ul_angle_deg, s.n_rx);

  ch.h_si = CMatrix::Zero(s.n_rx, s.n_tx);
  if (s.si_power > 0.0) {
    auto rng = make_rng(s.rng_seed, RngStream::channels);
    const double entry_var = s.si_power / (static_cast<double>(s.n_rx) * s.n_tx);
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5 * entry_var));
    // Column-major fill order keeps realizations stable.
    for (int j = 0; j < s.n_tx; ++j) {
      for (int i = 0; i < s.n_rx; ++i) {
        const double re = nd(rng);
        const double im = nd(rng);
        ch.h_si(i, j) = {re, im};
      }
    }
  }

  ch.b = ch.h_si;
  for (const auto& it : s.interferers) {
    if (it.angle_deg == s.target_angle_deg) {
      ch.warnings.push_back("interferer at " + std::to_string(it.angle_deg) +
                            " deg coincides with the target angle (degenerate geometry)");
    }
    ch.b += it.amplitude * response_matrix(it.angle_deg, s.n_rx, s.n_tx);
  }
  ch.c = ch.b + s.beta0() * response_matrix(s.target_angle_deg, s.n_rx, s.n_tx);
  return ch;
}

/// Psi = p h h^H + B V_t B^H + sigma^2 I
inline HermitianMatrix assemble_psi(double p, const HermitianMatrix& v_t, const ChannelSet& ch, double sigma2) {
  const CMatrix& b = ch.b;
  CMatrix m = p * ch.h * ch.h.adjoint() + b * v_t.matrix() * b.adjoint();
  m.diagonal().array() += sigma2;
  return HermitianMatrix(m);
}

/// Phi = C V_t C^H + sigma^2 I
inline HermitianMatrix assemble_phi(const HermitianMatrix& v_t, const ChannelSet& ch, double sigma2) {
  const CMatrix& c = ch.c;
  CMatrix m = c * v_t.matrix() * c.adjoint();
  m.diagonal().array() += sigma2;
  return HermitianMatrix(m);
}

}  // namespace iqscc
