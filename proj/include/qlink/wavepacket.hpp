#pragma once

// Spectral photon wavepackets on the discrete mode grid: target shapes,
// predistortion phases, field reconstruction along the line, overlaps.
// Time-domain fields are expressed in the frame rotating at the carrier
// mode frequency.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qlink/common.hpp"
#include "qlink/linkmodel.hpp"

namespace qlink {

/// Normalized complex amplitudes psi_k over a mode grid, carrying the
/// per-mode wavenumbers/frequencies so it can be evaluated standalone.
struct SpectralWavepacket {
  std::vector<double> k;      // rad/m
  std::vector<double> omega;  // rad/ns, absolute
  std::size_t carrier_index = 0;
  double frame_omega = 0.0;  // rotating-frame frequency, rad/ns
  std::vector<cplx> psi;

  std::size_t size() const { return psi.size(); }

  double norm_sq() const {
    double s = 0.0;
    for (const cplx& a : psi) s += std::norm(a);
    return s;
  }

  void normalize() {
    const double n = std::sqrt(norm_sq());
    if (!(n > 0.0)) throw numerical_error("wavepacket: zero norm");
    for (cplx& a : psi) a /= n;
  }
};

/// sech-shaped spectral target centered at omega(k_c) + center_offset;
/// real positive amplitudes, unit norm on the grid.
inline SpectralWavepacket sech_target(double kappa, const ModeGrid& grid,
                                      const DispersionRelation& disp,
                                      double center_offset = 0.0) {
  if (!(kappa > 0.0)) throw config_error("sech_target: kappa must be > 0");
  SpectralWavepacket wp;
  wp.k = grid.k;
  wp.omega = mode_frequencies(grid, disp);
  wp.carrier_index = grid.carrier_index;
  wp.frame_omega = wp.omega[grid.carrier_index];
  const double center = wp.frame_omega + center_offset;
  wp.psi.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    wp.psi[i] = 1.0 / std::cosh(pi * (wp.omega[i] - center) / kappa);
  wp.normalize();
  double peak = 0.0;
  for (const cplx& a : wp.psi) peak = std::max(peak, std::abs(a));
  if (std::abs(wp.psi.front()) > 1e-6 * peak ||
      std::abs(wp.psi.back()) > 1e-6 * peak)
    throw config_error("sech_target: photon too broadband for this link");
  return wp;
}

/// Multiply amplitudes by exp(+i * omega_NL(k) * t_AB * share); moduli are
/// untouched.  share composes additively.
inline SpectralWavepacket predistort(const SpectralWavepacket& wp,
                                     const DispersionRelation& disp,
                                     double k_0, double t_ab, double share) {
  if (share < 0.0 || share > 1.0)
    throw config_error("predistort: share must lie in [0, 1]");
  SpectralWavepacket out = wp;
  for (std::size_t i = 0; i < wp.size(); ++i) {
    const double phase = nonlinear_residual(disp, wp.k[i], k_0) * t_ab * share;
    out.psi[i] *= std::polar(1.0, phase);
  }
  return out;
}

namespace detail {

/// Shared spectral sum: xi(x, t) = sum_k psi_k exp(ikx - i(omega_k - frame)t)
/// and, when slope is non-null, its exact time derivative.
inline void field_sum(const SpectralWavepacket& wp, double x,
                      const TimeGrid& times, TimeTrace* value,
                      TimeTrace* slope) {
  if (value) *value = TimeTrace(times);
  if (slope) *slope = TimeTrace(times);
  const std::size_t nm = wp.size();
  for (std::size_t m = 0; m < nm; ++m) {
    const double w = wp.omega[m] - wp.frame_omega;
    cplx phase = wp.psi[m] * std::polar(1.0, wp.k[m] * x - w * times.t0);
    const cplx step = std::polar(1.0, -w * times.dt);
    for (std::size_t i = 0; i < times.n; ++i) {
      if (value) value->v[i] += phase;
      if (slope) slope->v[i] += cplx(0.0, -w) * phase;
      phase *= step;
    }
  }
}

}  // namespace detail

/// Field at position x over the given times (carrier rotating frame).
inline TimeTrace field_at(const SpectralWavepacket& wp, double x,
                          const TimeGrid& times) {
  TimeTrace out;
  detail::field_sum(wp, x, times, &out, nullptr);
  return out;
}

/// Field and its exact time derivative (spectral, no finite differences).
inline std::pair<TimeTrace, TimeTrace> field_and_slope_at(
    const SpectralWavepacket& wp, double x, const TimeGrid& times) {
  TimeTrace val, sl;
  detail::field_sum(wp, x, times, &val, &sl);
  return {std::move(val), std::move(sl)};
}

/// |<a|b>|^2 over modes; both packets must live on the same grid.
inline double pulse_fidelity(const SpectralWavepacket& a,
                             const SpectralWavepacket& b) {
  if (a.size() != b.size())
    throw config_error("pulse_fidelity: packets on different grids");
  const double na = a.norm_sq(), nb = b.norm_sq();
  if (!(na > 0.0) || !(nb > 0.0))
    throw config_error("pulse_fidelity: zero-norm input");
  cplx z{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i)
    z += std::conj(a.psi[i]) * b.psi[i];
  return std::norm(z) / (na * nb);
}

/// |<a|b>|^2 over time samples, each trace normalized first.
inline double pulse_fidelity(const TimeTrace& a, const TimeTrace& b) {
  const double na = norm_sq(a), nb = norm_sq(b);
  if (!(na > 0.0) || !(nb > 0.0))
    throw config_error("pulse_fidelity: zero-norm input");
  return std::norm(inner(a, b)) / (na * nb);
}

/// Quadratic-phase distortion strength D = D2 * t_AB / (2 v_g^2), in ns^2.
inline double distortion_parameter(const DispersionRelation& disp, double k_0,
                                   double t_ab) {
  const double vg = disp.group_velocity(k_0);
  if (!(vg > 0.0))
    throw config_error("distortion_parameter: zero group velocity");
  return disp.curvature(k_0) * t_ab / (2.0 * vg * vg);
}

/// Leading-order overlap of a sech packet with its D-distorted copy.
inline double analytic_overlap_series(double D, double kappa) {
  const double x = D * kappa * kappa;
  return 1.0 - x * x / 45.0;
}

}  // namespace qlink
