#pragma once

// SINR evaluation for downlink, uplink and radar, and the closed-form optimal
// receive beamformers obtained from the generalized Rayleigh quotient.

#include <cmath>
#include <vector>

#include "iqscc/errors.hpp"
#include "iqscc/numerics.hpp"
#include "iqscc/scenario.hpp"

namespace iqscc {

/// Optimization variables: sensing covariance, communication covariance, UL power.
struct TransmitDesign {
  HermitianMatrix v_s;
  HermitianMatrix v_c;
  double p = 0.0;

  HermitianMatrix v_t() const { return v_s + v_c; }

  void validate(double bs_power_max, double ul_power_max) const {
    if (!v_s.is_psd()) throw DomainError("TransmitDesign: V_s is not PSD");
    if (!v_c.is_psd()) throw DomainError("TransmitDesign: V_c is not PSD");
    if (v_s.trace() + v_c.trace() > bs_power_max + 1e-9) {
      throw DomainError("TransmitDesign: Tr(V_s + V_c) exceeds the BS power budget");
    }
    if (p < 0.0 || p > ul_power_max + 1e-12) throw DomainError("TransmitDesign: UL power outside [0, P_u^max]");
  }
};

/// Which covariance drives the radar SINR numerator: V_t = V_s + V_c (conventional
/// ISAC) or V_s alone (quantum sensing, where the data signal does not contribute).
enum class RadarSinrMode { total, sensing_only };

/// gamma_d = g^H V_c g / (g^H V_s g + sigma^2)
inline double sinr_dl(const TransmitDesign& d, const ChannelSet& ch, double sigma2) {
  return d.v_c.quad(ch.g) / (d.v_s.quad(ch.g) + sigma2);
}

/// u* = Psi^{-1} a_r(theta_0), unnormalized.
inline CVector opt_rx_radar(const TransmitDesign& d, const ChannelSet& ch, double sigma2, double theta0_deg) {
  const HermitianMatrix psi = assemble_psi(d.p, d.v_t(), ch, sigma2);
  return hermitian_solve(psi, steering_rx(theta0_deg, static_cast<int>(ch.n_rx())));
}

/// w* = Phi^{-1} h, unnormalized.
inline CVector opt_rx_ul(const TransmitDesign& d, const ChannelSet& ch, double sigma2) {
  const HermitianMatrix phi = assemble_phi(d.v_t(), ch, sigma2);
  return hermitian_solve(phi, ch.h);
}

/// Radar SINR for an arbitrary receive beamformer u.
inline double sinr_radar(const CVector& u, const TransmitDesign& d, const ChannelSet& ch, double sigma2,
                         double theta0_deg, double beta0_sq) {
  if (u.size() != ch.n_rx()) throw DomainError("sinr_radar: beamformer dimension mismatch");
  if (u.squaredNorm() == 0.0) throw DomainError("sinr_radar: receive beamformer is the zero vector");
  const CMatrix a0 = response_matrix(theta0_deg, static_cast<int>(ch.n_rx()), static_cast<int>(ch.n_tx()));
  const CVector au = a0.adjoint() * u;
  const double num = beta0_sq * d.v_t().quad(au);
  const double den = assemble_psi(d.p, d.v_t(), ch, sigma2).quad(u);
  return num / den;
}

/// Uplink SINR for an arbitrary receive beamformer w.
inline double sinr_ul(const CVector& w, const TransmitDesign& d, const ChannelSet& ch, double sigma2) {
  if (w.size() != ch.n_rx()) throw DomainError("sinr_ul: beamformer dimension mismatch");
  if (w.squaredNorm() == 0.0) throw DomainError("sinr_ul: receive beamformer is the zero vector");
  const double num = d.p * std::norm(w.dot(ch.h));
  const double den = assemble_phi(d.v_t(), ch, sigma2).quad(w);
  return num / den;
}

/// Radar SINR at the optimal receive beamformer:
/// |beta_0|^2 (a_t^H V a_t)(a_r^H Psi^{-1} a_r), V = V_t or V_s per mode.
inline double sinr_radar_opt(const TransmitDesign& d, const ChannelSet& ch, double sigma2, double theta0_deg,
                             double beta0_sq, RadarSinrMode mode = RadarSinrMode::total) {
  const CVector a_r = steering_rx(theta0_deg, static_cast<int>(ch.n_rx()));
  const CVector a_t = steering_tx(theta0_deg, static_cast<int>(ch.n_tx()));
  const HermitianMatrix psi = assemble_psi(d.p, d.v_t(), ch, sigma2);
  const double whitened = a_r.dot(hermitian_solve(psi, a_r)).real();
  const double tx_gain = mode == RadarSinrMode::total ? d.v_t().quad(a_t) : d.v_s.quad(a_t);
  return beta0_sq * tx_gain * whitened;
}

/// gamma_UL = p h^H Phi^{-1} h
inline double sinr_ul_opt(const TransmitDesign& d, const ChannelSet& ch, double sigma2) {
  if (d.p == 0.0) return 0.0;
  const HermitianMatrix phi = assemble_phi(d.v_t(), ch, sigma2);
  return d.p * ch.h.dot(hermitian_solve(phi, ch.h)).real();
}

struct BeamGain {
  double angle_deg = 0.0;
  double gain = 0.0;     // linear, a_t^H V a_t
  double gain_db = 0.0;  // -inf when gain <= 0
};

inline std::vector<double> default_beampattern_grid(int points = 721) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = -90.0 + 180.0 * i / (points - 1);
  return grid;
}

/// Transmit beampattern a_t(theta)^H V a_t(theta) over an angle grid.
inline std::vector<BeamGain> beampattern_gain(const HermitianMatrix& v, const std::vector<double>& grid) {
  std::vector<BeamGain> out;
  out.reserve(grid.size());
  const int n = static_cast<int>(v.dim());
  for (double th : grid) {
    const double g = v.quad(steering_tx(th, n));
    out.push_back({th, g, linear_to_db(g)});
  }
  return out;
}

}  // namespace iqscc
