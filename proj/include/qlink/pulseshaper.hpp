#pragma once

// Inversion of the effective qubit-cavity model: given a target injected
// field xi(t) and the effective parameters (kappa, delta_omega, N), produce
// the complex control g(t) that emits it, check feasibility, and build the
// time-mirrored receiver control.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "qlink/common.hpp"
#include "qlink/numerics.hpp"

namespace qlink {

/// Effective-model parameters: decay rate, Lamb shift and the complex
/// first-order memory coefficient N (|N| < 1).
struct EffectiveModelParams {
  double kappa = 0.0;       // rad/ns
  double lamb_shift = 0.0;  // delta_omega, rad/ns
  cplx non_markov{0.0, 0.0};

  void validate() const {
    if (!(kappa > 0.0)) throw config_error("EffectiveModelParams: kappa <= 0");
    if (!(std::abs(non_markov) < 1.0))
      throw config_error("EffectiveModelParams: |N| must be < 1");
  }
};

enum class Provenance { markovian, non_markovian, analytic_sech };

/// Sampled complex control g(t) plus the parameters used to derive it.
struct ControlPulse {
  TimeGrid grid;
  std::vector<cplx> g;
  Provenance provenance = Provenance::markovian;
  EffectiveModelParams params;

  cplx at(double t) const {
    if (t < grid.t0 || t > grid.back()) return cplx{0.0, 0.0};
    return interp_catmull_rom(grid, g, t);
  }
};

/// Qubit/cavity amplitudes and their log/phase decompositions over time.
struct QubitCavityTrace {
  TimeGrid grid;
  std::vector<cplx> q, c;
  std::vector<double> r, theta, x, sigma;
  std::vector<double> population;  // |q|^2
};

struct SynthesisOptions {
  double q0_sq = 1.0;
  double guard_rel = 1e-8;        // |d| below this (rel) -> g = 0
  double sigma_guard_rel = 1e-6;  // |d| below this (rel) -> freeze sigma
  double feas_tol = 1e-9;
  double g_max = 0.0;            // 0 = unbounded
  double sigma_dot_cap = 1e4;    // |sigma_dot| above cap*kappa -> denominator
                                 // treated as vanished
};

struct SynthesisResult {
  ControlPulse pulse;
  QubitCavityTrace trace;
};

/// d(t) = -i xi(t) / sqrt(kappa).
inline TimeTrace cavity_from_field(const TimeTrace& xi, double kappa) {
  if (!(kappa > 0.0)) throw config_error("cavity_from_field: kappa <= 0");
  TimeTrace d(xi.grid);
  const double s = 1.0 / std::sqrt(kappa);
  for (std::size_t i = 0; i < xi.size(); ++i) d.v[i] = -iu * xi.v[i] * s;
  return d;
}

/// |q(t)|^2 under the corrected effective model, integrated cumulatively:
/// q0^2 - (2/kappa) Re[(1-N) int xi* xi_dot] - int |xi|^2.
/// Throws infeasible_pulse outside [-tol, 1 + tol].
inline std::vector<double> qubit_population(const TimeTrace& xi,
                                            const EffectiveModelParams& p,
                                            double q0_sq,
                                            const TimeTrace* xi_dot = nullptr,
                                            double feas_tol = 1e-9) {
  p.validate();
  if (q0_sq < 0.0 || q0_sq > 1.0)
    throw config_error("qubit_population: q0^2 outside [0, 1]");
  const std::size_t n = xi.size();
  std::vector<cplx> slope;
  if (xi_dot) {
    if (xi_dot->size() != n)
      throw config_error("qubit_population: xi_dot grid mismatch");
  } else {
    slope = derivative_c2(xi.v, xi.grid.dt);
  }
  const cplx* xd = xi_dot ? xi_dot->v.data() : slope.data();
  const cplx one_minus_n = 1.0 - p.non_markov;
  std::vector<double> rate(n);
  for (std::size_t i = 0; i < n; ++i)
    rate[i] = -(2.0 / p.kappa) * (one_minus_n * std::conj(xi.v[i]) * xd[i]).real() -
              std::norm(xi.v[i]);
  auto acc = cumint4(rate, xi.grid.dt);
  std::vector<double> pop(n);
  for (std::size_t i = 0; i < n; ++i) {
    pop[i] = q0_sq + acc[i];
    if (!std::isfinite(pop[i]) || pop[i] < -feas_tol || pop[i] > 1.0 + feas_tol)
      throw infeasible_pulse("qubit_population: |q|^2 = " +
                             std::to_string(pop[i]) + " at t = " +
                             std::to_string(xi.t(i)));
  }
  return pop;
}

/// Invert the effective model for the control g(t) that injects xi(t).
/// Passing the exact derivative of xi avoids finite-difference noise; when
/// absent, centered differences are used.
inline SynthesisResult control_from_field(const TimeTrace& xi,
                                          const EffectiveModelParams& p,
                                          const SynthesisOptions& opt = {},
                                          const TimeTrace* xi_dot = nullptr) {
  p.validate();
  const std::size_t n = xi.size();
  if (n < 8) throw config_error("control_from_field: grid too short");
  const double dt = xi.grid.dt;

  std::vector<cplx> slope;
  if (!xi_dot) slope = derivative_c2(xi.v, dt);
  const cplx* xd = xi_dot ? xi_dot->v.data() : slope.data();

  const double sqk = std::sqrt(p.kappa);
  std::vector<cplx> d(n), ddot(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = -iu * xi.v[i] / sqk;
    ddot[i] = -iu * xd[i] / sqk;
  }

  // Population and its exact derivative (the integrand itself).
  const cplx one_minus_n = 1.0 - p.non_markov;
  std::vector<double> rate(n);
  for (std::size_t i = 0; i < n; ++i)
    rate[i] = -(2.0 / p.kappa) * (one_minus_n * std::conj(xi.v[i]) * xd[i]).real() -
              std::norm(xi.v[i]);
  auto acc = cumint4(rate, dt);
  std::vector<double> pop(n);
  for (std::size_t i = 0; i < n; ++i) {
    pop[i] = opt.q0_sq + acc[i];
    if (!std::isfinite(pop[i]) || pop[i] < -opt.feas_tol ||
        pop[i] > 1.0 + opt.feas_tol)
      throw infeasible_pulse("control_from_field: |q|^2 = " +
                             std::to_string(pop[i]) + " at t = " +
                             std::to_string(xi.t(i)));
  }

  double maxd = 0.0;
  for (const cplx& v : d) maxd = std::max(maxd, std::abs(v));
  if (!(maxd > 0.0)) throw config_error("control_from_field: xi is zero");
  const double guard = opt.guard_rel * maxd;
  const double sigma_guard = opt.sigma_guard_rel * maxd;

  const double na = std::abs(p.non_markov);
  const double phi = std::arg(p.non_markov);
  const double a_cos = 1.0 - na * std::cos(phi);
  const double a_sin = na * std::sin(phi);
  constexpr double pop_floor = 1e-280;

  std::vector<double> rdot(n, 0.0), thdot(n, 0.0), xdot(n, 0.0),
      sdot(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double ad = std::abs(d[i]);
    xdot[i] = (pop[i] > pop_floor) ? rate[i] / (2.0 * pop[i]) : 0.0;
    if (ad < sigma_guard) continue;  // freeze phases where d is negligible
    const cplx logslope = ddot[i] / d[i];
    rdot[i] = logslope.real();
    thdot[i] = -logslope.imag();
    const double num = xdot[i] * (thdot[i] * a_cos + rdot[i] * a_sin);
    const double den = rdot[i] * a_cos - thdot[i] * a_sin + 0.5 * p.kappa;
    if (num == 0.0) continue;
    sdot[i] = -num / den;
    if (!std::isfinite(sdot[i]) ||
        std::abs(sdot[i]) > opt.sigma_dot_cap * p.kappa)
      throw denominator_vanishes(
          "control_from_field: phase-equation denominator vanished at t = " +
          std::to_string(xi.t(i)));
  }

  // First sample with usable |d|: phase anchor for the gauge choice that
  // makes the early-time control real and positive.
  std::size_t anchor = 0;
  while (anchor < n && std::abs(d[anchor]) < sigma_guard) ++anchor;
  if (anchor == n) throw config_error("control_from_field: xi below guard");

  auto sigma = cumint4(sdot, dt);
  auto theta = cumint4(thdot, dt);
  const double theta_anchor = -std::arg(d[anchor]);
  const double th_shift = theta_anchor - theta[anchor];
  const double sg_shift = (theta_anchor - pi) - sigma[anchor];
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] += th_shift;
    sigma[i] += sg_shift;
  }

  SynthesisResult out;
  out.pulse.grid = xi.grid;
  out.pulse.g.assign(n, cplx{0.0, 0.0});
  out.pulse.provenance = (na > 0.0) ? Provenance::non_markovian
                                    : Provenance::markovian;
  out.pulse.params = p;
  out.trace.grid = xi.grid;
  out.trace.q.resize(n);
  out.trace.c.resize(n);
  out.trace.r.resize(n);
  out.trace.theta = theta;
  out.trace.x.resize(n);
  out.trace.sigma = sigma;
  out.trace.population = pop;

  for (std::size_t i = 0; i < n; ++i) {
    const double x = 0.5 * std::log(std::max(pop[i], pop_floor));
    out.trace.x[i] = x;
    const cplx q = std::exp(cplx(x, -sigma[i]));
    out.trace.q[i] = q;
    out.trace.c[i] = iu * d[i];
    out.trace.r[i] = std::log(std::max(std::abs(d[i]), 1e-300));
    if (std::abs(d[i]) >= guard) {
      const cplx g = cplx(xdot[i], -sdot[i]) * q / d[i];
      if (!std::isfinite(g.real()) || !std::isfinite(g.imag()))
        throw numerical_error("control_from_field: non-finite control at t = " +
                              std::to_string(xi.t(i)));
      if (opt.g_max > 0.0 && std::abs(g) > opt.g_max)
        throw infeasible_pulse("control_from_field: |g| exceeds g_max at t = " +
                               std::to_string(xi.t(i)));
      out.pulse.g[i] = g;
    }
  }
  return out;
}

/// Closed-form control that injects the width-kappa sech photon under the
/// corrected model with real N; reduces to (kappa/2) sech(kappa t / 2) at
/// N = 0 and stays finite (kappa sqrt(N)/2) as t -> +inf.
inline ControlPulse analytic_sech_control(double kappa, double n_real,
                                          const TimeGrid& times) {
  if (!(kappa > 0.0)) throw config_error("analytic_sech_control: kappa <= 0");
  if (n_real < 0.0 || n_real >= 1.0)
    throw config_error("analytic_sech_control: need 0 <= N < 1");
  ControlPulse out;
  out.grid = times;
  out.g.resize(times.n);
  out.provenance = Provenance::analytic_sech;
  out.params.kappa = kappa;
  out.params.non_markov = cplx(n_real, 0.0);
  for (std::size_t i = 0; i < times.n; ++i) {
    const double t = times.t(i);
    // Stable split: g = (kappa/2) * (2 - N + N s) / ((sqrt(s) + 1/sqrt(s)) * sqrt(1 + N s))
    const double e_half = std::exp(0.5 * kappa * t);
    const double s = e_half * e_half;
    double val;
    if (kappa * t < 600.0) {
      val = 0.5 * kappa * (2.0 - n_real + n_real * s) /
            ((e_half + 1.0 / e_half) * std::sqrt(1.0 + n_real * s));
    } else {
      val = 0.5 * kappa * std::sqrt(n_real);
    }
    out.g[i] = cplx(val, 0.0);
  }
  return out;
}

/// Time-mirrored receiver control g2(t) = conj(g1(-t)); requires a window
/// symmetric about t = 0.
inline ControlPulse receiver_control(const ControlPulse& emit) {
  const double lo = emit.grid.t0;
  const double hi = emit.grid.back();
  if (std::abs(lo + hi) > 1e-9 * std::max(std::abs(lo), emit.grid.dt))
    throw config_error("receiver_control: emit window is not symmetric");
  ControlPulse out = emit;
  const std::size_t n = emit.g.size();
  for (std::size_t i = 0; i < n; ++i)
    out.g[i] = std::conj(emit.g[n - 1 - i]);
  return out;
}

/// Forward RK4 integration of the corrected effective model
///   q' = -i g c,   c' = (-i g* q - (kappa/2 + i dw) c) / (1 - N)
/// with the control interpolated between samples.
inline QubitCavityTrace integrate_effective(const ControlPulse& pulse,
                                            const EffectiveModelParams& p,
                                            cplx q0, cplx c0) {
  p.validate();
  const TimeGrid& gr = pulse.grid;
  QubitCavityTrace tr;
  tr.grid = gr;
  tr.q.resize(gr.n);
  tr.c.resize(gr.n);
  tr.population.resize(gr.n);
  const cplx inv = 1.0 / (1.0 - p.non_markov);
  const cplx damp(0.5 * p.kappa, p.lamb_shift);
  auto rhs = [&](cplx g, cplx q, cplx c, cplx& dq, cplx& dc) {
    dq = -iu * g * c;
    dc = (-iu * std::conj(g) * q - damp * c) * inv;
  };
  cplx q = q0, c = c0;
  const double dt = gr.dt;
  for (std::size_t i = 0; i < gr.n; ++i) {
    tr.q[i] = q;
    tr.c[i] = c;
    tr.population[i] = std::norm(q);
    if (i + 1 == gr.n) break;
    const double t = gr.t(i);
    const cplx g1 = pulse.at(t);
    const cplx gm = pulse.at(t + 0.5 * dt);
    const cplx g2 = pulse.at(t + dt);
    cplx k1q, k1c, k2q, k2c, k3q, k3c, k4q, k4c;
    rhs(g1, q, c, k1q, k1c);
    rhs(gm, q + 0.5 * dt * k1q, c + 0.5 * dt * k1c, k2q, k2c);
    rhs(gm, q + 0.5 * dt * k2q, c + 0.5 * dt * k2c, k3q, k3c);
    rhs(g2, q + dt * k3q, c + dt * k3c, k4q, k4c);
    q += (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
    c += (dt / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
  }
  return tr;
}

/// Largest distortion parameter whose packet a physical control can emit.
enum class DmaxMethod { scan, closed_form };

namespace detail {

/// Chirped sech packet in time: inverse transform of
/// f(w, D) = sqrt(pi/2kappa) sech(pi w / kappa) exp(-i w^2 D).
inline void chirped_packet(double kappa, double D, const TimeGrid& times,
                           TimeTrace& xi, TimeTrace& xi_dot) {
  const double w_span = 8.0 * kappa;
  const std::size_t nw = 1601;
  const double dw = 2.0 * w_span / double(nw - 1);
  xi = TimeTrace(times);
  xi_dot = TimeTrace(times);
  const double amp = std::sqrt(pi / (2.0 * kappa)) / std::sqrt(2.0 * pi);
  for (std::size_t j = 0; j < nw; ++j) {
    const double w = -w_span + double(j) * dw;
    const double weight = (j == 0 || j + 1 == nw) ? 0.5 : 1.0;
    const cplx fw = amp * weight * dw / std::cosh(pi * w / kappa) *
                    std::polar(1.0, -w * w * D);
    cplx phase = fw * std::polar(1.0, -w * times.t0);
    const cplx step = std::polar(1.0, -w * times.dt);
    for (std::size_t i = 0; i < times.n; ++i) {
      xi.v[i] += phase;
      xi_dot.v[i] += cplx(0.0, -w) * phase;
      phase *= step;
    }
  }
}

inline bool distortion_feasible(double kappa, double D, double feas_tol) {
  const double half = 30.0 / kappa;
  auto times = TimeGrid::spanning(-half, half, 3001);
  TimeTrace xi, xid;
  chirped_packet(kappa, D, times, xi, xid);
  EffectiveModelParams p;
  p.kappa = kappa;
  try {
    qubit_population(xi, p, 1.0, &xid, feas_tol);
  } catch (const infeasible_pulse&) {
    return false;
  }
  return true;
}

}  // namespace detail

inline double max_correctable_distortion(double kappa,
                                         DmaxMethod method = DmaxMethod::scan) {
  if (!(kappa > 0.0))
    throw config_error("max_correctable_distortion: kappa <= 0");
  if (method == DmaxMethod::closed_form)
    return 3.0 / (2.0 * std::sqrt(5.0) * kappa * kappa);
  double lo = 0.0;
  double hi = 3.0 / (std::sqrt(5.0) * kappa * kappa);  // 2x the closed form
  const double feas_tol = 1e-7;
  if (!detail::distortion_feasible(kappa, hi, feas_tol)) {
    for (int it = 0; it < 40 && (hi - lo) > 1e-3 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (detail::distortion_feasible(kappa, mid, feas_tol) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
  return hi;
}

}  // namespace qlink
