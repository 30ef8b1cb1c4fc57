#pragma once

// Shared aliases, error types and the uniform time grid used across the
// library.  Internal units everywhere: time ns, length m, angular
// frequency rad/ns.  Linewidths enter user-facing interfaces as
// kappa/(2*pi) in MHz and are converted once at the boundary.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlink {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx iu{0.0, 1.0};

// Vacuum speed of light in m/ns.
inline constexpr double c_vacuum = 0.299792458;

/// Invalid or inconsistent user configuration (CLI exit code 2).
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure while running an otherwise valid request (exit code 3).
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Requested pulse would need |q|^2 outside [0,1] somewhere in the window.
struct infeasible_pulse : numerical_error {
  using numerical_error::numerical_error;
};

/// The phase-equation denominator crossed zero inside the active window.
struct denominator_vanishes : numerical_error {
  using numerical_error::numerical_error;
};

/// Too few samples survive masking to form a meaningful estimate.
struct insufficient_data : numerical_error {
  using numerical_error::numerical_error;
};

/// Uniform time grid: t_i = t0 + i*dt, i = 0..n-1.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 1.0;
  std::size_t n = 0;

  TimeGrid() = default;
  TimeGrid(double t0_, double dt_, std::size_t n_) : t0(t0_), dt(dt_), n(n_) {
    if (!(dt > 0.0) || n < 2)
      throw config_error("TimeGrid: need dt > 0 and at least two samples");
  }

  static TimeGrid spanning(double a, double b, std::size_t n_) {
    if (!(b > a)) throw config_error("TimeGrid: empty span");
    return TimeGrid(a, (b - a) / double(n_ - 1), n_);
  }

  double t(std::size_t i) const { return t0 + double(i) * dt; }
  double back() const { return t(n - 1); }
  std::size_t size() const { return n; }
};

/// Complex samples on a uniform grid.
struct TimeTrace {
  TimeGrid grid;
  std::vector<cplx> v;

  TimeTrace() = default;
  explicit TimeTrace(TimeGrid g) : grid(g), v(g.n, cplx{0.0, 0.0}) {}
  TimeTrace(TimeGrid g, std::vector<cplx> vals) : grid(g), v(std::move(vals)) {
    if (v.size() != grid.n)
      throw config_error("TimeTrace: sample count does not match grid");
  }

  std::size_t size() const { return v.size(); }
  double t(std::size_t i) const { return grid.t(i); }
};

/// Discrete L2 inner product <a|b> = sum conj(a_i) b_i * dt.
inline cplx inner(const TimeTrace& a, const TimeTrace& b) {
  if (a.size() != b.size() || a.grid.dt != b.grid.dt)
    throw config_error("inner: traces live on different grids");
  cplx s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a.v[i]) * b.v[i];
  return s * a.grid.dt;
}

inline double norm_sq(const TimeTrace& a) {
  double s = 0.0;
  for (const cplx& z : a.v) s += std::norm(z);
  return s * a.grid.dt;
}

}  // namespace qlink
