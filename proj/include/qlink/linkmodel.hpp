#pragma once

// Waveguide mode grid, dispersion laws and resonator-waveguide couplings.
// Wavenumbers k_m = m*pi/L (rad/m), frequencies in rad/ns.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qlink/common.hpp"

namespace qlink {

/// Frequency law omega(k) with analytic first and second derivatives.
struct DispersionRelation {
  enum class Kind { linear, quadratic, rectangular_guide };

  Kind kind = Kind::linear;
  double vg = 0.0;       // linear / quadratic: slope (m/ns)
  double omega0 = 0.0;   // linear: intercept; quadratic: omega at k0 (rad/ns)
  double D2 = 0.0;       // quadratic: curvature (m^2/ns)
  double k0 = 0.0;       // quadratic: expansion wavenumber (rad/m)
  double c_light = 0.0;  // rectangular_guide: phase speed scale (m/ns)
  double width = 0.0;    // rectangular_guide: interior width l1 (m)

  static DispersionRelation linear(double v_g, double omega_0) {
    DispersionRelation d;
    d.kind = Kind::linear;
    d.vg = v_g;
    d.omega0 = omega_0;
    if (!(v_g > 0.0)) throw config_error("linear dispersion: v_g must be > 0");
    return d;
  }

  static DispersionRelation quadratic(double omega_c, double v_g, double D_2,
                                      double k_0) {
    DispersionRelation d;
    d.kind = Kind::quadratic;
    d.omega0 = omega_c;
    d.vg = v_g;
    d.D2 = D_2;
    d.k0 = k_0;
    if (!(v_g > 0.0))
      throw config_error("quadratic dispersion: v_g must be > 0");
    return d;
  }

  static DispersionRelation rectangular_guide(double c, double l1) {
    DispersionRelation d;
    d.kind = Kind::rectangular_guide;
    d.c_light = c;
    d.width = l1;
    if (!(c > 0.0) || !(l1 > 0.0))
      throw config_error("rectangular_guide: need c > 0 and l1 > 0");
    return d;
  }

  double cutoff() const { return c_light * pi / width; }

  double omega(double k) const {
    switch (kind) {
      case Kind::linear:
        return omega0 + vg * k;
      case Kind::quadratic: {
        const double dk = k - k0;
        return omega0 + vg * dk + 0.5 * D2 * dk * dk;
      }
      case Kind::rectangular_guide: {
        const double kc = pi / width;
        return c_light * std::sqrt(kc * kc + k * k);
      }
    }
    return 0.0;
  }

  double group_velocity(double k) const {
    switch (kind) {
      case Kind::linear:
        return vg;
      case Kind::quadratic:
        return vg + D2 * (k - k0);
      case Kind::rectangular_guide:
        return c_light * c_light * k / omega(k);
    }
    return 0.0;
  }

  double curvature(double k) const {
    switch (kind) {
      case Kind::linear:
        return 0.0;
      case Kind::quadratic:
        return D2;
      case Kind::rectangular_guide: {
        const double w = omega(k);
        const double c2 = c_light * c_light;
        return c2 / w - c2 * c2 * k * k / (w * w * w);
      }
    }
    return 0.0;
  }

  /// Smallest k with omega(k) = target, for monotone-increasing branches.
  double invert(double target) const {
    switch (kind) {
      case Kind::linear:
        return (target - omega0) / vg;
      case Kind::quadratic: {
        double k = k0 + (target - omega0) / vg;
        for (int it = 0; it < 60; ++it) {
          const double f = omega(k) - target;
          const double df = group_velocity(k);
          if (!(std::abs(df) > 0.0)) break;
          const double kn = k - f / df;
          if (std::abs(kn - k) < 1e-14 * std::max(1.0, std::abs(k))) {
            k = kn;
            break;
          }
          k = kn;
        }
        return k;
      }
      case Kind::rectangular_guide: {
        const double wc = cutoff();
        if (!(target > wc))
          throw config_error("rectangular_guide: frequency below cutoff");
        return std::sqrt(target * target - wc * wc) / c_light;
      }
    }
    return 0.0;
  }
};

/// omega(k) - omega(k0) - v_g(k0)*(k - k0): everything beyond the linear
/// part of the dispersion around k0.
inline double nonlinear_residual(const DispersionRelation& disp, double k,
                                 double k_0) {
  if (disp.kind == DispersionRelation::Kind::linear) return 0.0;
  return disp.omega(k) - disp.omega(k_0) -
         disp.group_velocity(k_0) * (k - k_0);
}

inline double group_velocity(const DispersionRelation& disp, double k_0) {
  return disp.group_velocity(k_0);
}

inline double curvature_D2(const DispersionRelation& disp, double k_0) {
  return disp.curvature(k_0);
}

inline double travel_time(const DispersionRelation& disp, double k_0,
                          double x_a, double x_b) {
  const double v = disp.group_velocity(k_0);
  if (!(v > 0.0))
    throw config_error("travel_time: cutoff carrier (zero group velocity)");
  return std::abs(x_b - x_a) / v;
}

/// Discrete waveguide modes k_m = m*pi/L for m in [m_min, m_max].
struct ModeGrid {
  double length = 0.0;  // L, meters
  long m_min = 0;
  long m_max = 0;
  std::size_t carrier_index = 0;  // offset of the working mode
  std::vector<double> k;          // rad/m, strictly increasing

  ModeGrid() = default;
  ModeGrid(double L, long mmin, long mmax, std::size_t carrier)
      : length(L), m_min(mmin), m_max(mmax), carrier_index(carrier) {
    if (!(L > 0.0)) throw config_error("ModeGrid: length must be > 0");
    if (mmin < 1) throw config_error("ModeGrid: mode indices must be >= 1");
    if (mmax <= mmin) throw config_error("ModeGrid: need at least two modes");
    const std::size_t n = std::size_t(mmax - mmin + 1);
    if (carrier == 0 || carrier + 1 >= n)
      throw config_error("ModeGrid: carrier mode must be strictly interior");
    k.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      k[i] = double(mmin + long(i)) * pi / L;
  }

  std::size_t size() const { return k.size(); }
  long mode_index(std::size_t i) const { return m_min + long(i); }
  double carrier_k() const { return k[carrier_index]; }
};

/// Window of n_modes consecutive modes centered on the mode whose
/// frequency is nearest omega_anchor.
inline ModeGrid make_mode_grid(double length, std::size_t n_modes,
                               const DispersionRelation& disp,
                               double omega_anchor) {
  if (n_modes < 3) throw config_error("make_mode_grid: need >= 3 modes");
  const double k_target = disp.invert(omega_anchor);
  long m_c = std::lround(k_target * length / pi);
  if (m_c < 1) m_c = 1;
  const double w_lo = disp.omega(double(m_c > 1 ? m_c - 1 : 1) * pi / length);
  const double w_mid = disp.omega(double(m_c) * pi / length);
  const double w_hi = disp.omega(double(m_c + 1) * pi / length);
  if (std::abs(w_lo - omega_anchor) < std::abs(w_mid - omega_anchor) &&
      m_c > 1)
    --m_c;
  else if (std::abs(w_hi - omega_anchor) < std::abs(w_mid - omega_anchor))
    ++m_c;
  const long half_lo = long((n_modes - 1) / 2);
  const long half_hi = long(n_modes) - 1 - half_lo;
  long mmin = m_c - half_lo;
  long mmax = m_c + half_hi;
  if (mmin < 1) {
    mmax += 1 - mmin;
    mmin = 1;
  }
  return ModeGrid(length, mmin, mmax, std::size_t(m_c - mmin));
}

inline std::vector<double> mode_frequencies(const ModeGrid& grid,
                                            const DispersionRelation& disp) {
  std::vector<double> w(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) w[i] = disp.omega(grid.k[i]);
  for (std::size_t i = 0; i + 1 < w.size(); ++i)
    if (!(w[i + 1] > w[i]))
      throw config_error(
          "mode_frequencies: non-monotone band (grid spans a band edge)");
  if (!(w.front() > 0.0))
    throw config_error("mode_frequencies: non-positive mode frequency");
  return w;
}

/// How the per-mode coupling magnitude depends on mode frequency.
/// sqrt_omega is the physical law; flat pins every mode to the carrier value.
enum class CouplingLaw { sqrt_omega, flat };

/// One node's resonator parameters and its coupling to every mode.
struct NodeCouplings {
  double kappa = 0.0;    // rad/ns
  double Omega_R = 0.0;  // resonator frequency, rad/ns
  double delta = 0.0;    // qubit splitting, rad/ns
  std::vector<double> G;  // rad/ns, signed per mode
};

/// G_{m,j} = sign * sqrt(kappa * v_g * omega(k_m) / (2 * Omega_R * L)),
/// sign = +1 for node 1 and (-1)^m for node 2; v_g at the carrier mode.
inline NodeCouplings couplings_from_kappa(const ModeGrid& grid,
                                          const DispersionRelation& disp,
                                          double kappa, double Omega_R,
                                          int node,
                                          CouplingLaw law = CouplingLaw::sqrt_omega) {
  if (!(kappa > 0.0)) throw config_error("couplings_from_kappa: kappa <= 0");
  if (!(Omega_R > 0.0))
    throw config_error("couplings_from_kappa: Omega_R <= 0");
  if (node != 1 && node != 2)
    throw config_error("couplings_from_kappa: node must be 1 or 2");
  const double v_g = disp.group_velocity(grid.carrier_k());
  if (!(v_g > 0.0))
    throw config_error("couplings_from_kappa: zero group velocity at carrier");
  NodeCouplings out;
  out.kappa = kappa;
  out.Omega_R = Omega_R;
  out.delta = Omega_R;
  out.G.resize(grid.size());
  const double flat_mag = std::sqrt(kappa * v_g / (2.0 * grid.length));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double mag;
    if (law == CouplingLaw::flat) {
      mag = flat_mag;
    } else {
      mag = std::sqrt(kappa * v_g * disp.omega(grid.k[i]) /
                      (2.0 * Omega_R * grid.length));
    }
    double sign = 1.0;
    if (node == 2 && (grid.mode_index(i) % 2 != 0)) sign = -1.0;
    out.G[i] = sign * mag;
  }
  return out;
}

}  // namespace qlink
