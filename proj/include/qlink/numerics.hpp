#pragma once

// Small numerical kernels shared by the synthesis and analysis code:
// fourth-order cumulative integration, finite differences, Catmull-Rom
// interpolation and a least-squares line fit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qlink/common.hpp"

namespace qlink {

/// Trapezoid integral of uniformly sampled values.
template <typename T>
T trapz(const std::vector<T>& f, double h) {
  if (f.size() < 2) return T{};
  T s = (f.front() + f.back()) * 0.5;
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
  return s * h;
}

/// Cumulative integral F with F[0] = 0, fourth-order accurate.
/// Interior step uses the two-sided four-point rule, the first and last
/// steps use the one-sided four-point rule.
template <typename T>
std::vector<T> cumint4(const std::vector<T>& f, double h) {
  const std::size_t n = f.size();
  std::vector<T> F(n, T{});
  if (n < 2) return F;
  if (n < 4) {
    for (std::size_t i = 1; i < n; ++i)
      F[i] = F[i - 1] + (f[i - 1] + f[i]) * (0.5 * h);
    return F;
  }
  F[1] = (f[0] * 9.0 + f[1] * 19.0 - f[2] * 5.0 + f[3]) * (h / 24.0);
  for (std::size_t i = 1; i + 2 < n; ++i)
    F[i + 1] = F[i] + (f[i + 1] * 13.0 + f[i] * 13.0 - f[i - 1] - f[i + 2]) *
                          (h / 24.0);
  F[n - 1] = F[n - 2] + (f[n - 1] * 9.0 + f[n - 2] * 19.0 - f[n - 3] * 5.0 +
                         f[n - 4]) *
                            (h / 24.0);
  return F;
}

/// Centered second-order derivative; one-sided second order at the ends.
template <typename T>
std::vector<T> derivative_c2(const std::vector<T>& f, double h) {
  const std::size_t n = f.size();
  std::vector<T> d(n, T{});
  if (n < 3) {
    if (n == 2) d[0] = d[1] = (f[1] - f[0]) * (1.0 / h);
    return d;
  }
  d[0] = (f[0] * -3.0 + f[1] * 4.0 - f[2]) * (0.5 / h);
  for (std::size_t i = 1; i + 1 < n; ++i)
    d[i] = (f[i + 1] - f[i - 1]) * (0.5 / h);
  d[n - 1] = (f[n - 1] * 3.0 - f[n - 2] * 4.0 + f[n - 3]) * (0.5 / h);
  return d;
}

/// Catmull-Rom evaluation of a uniformly sampled trace at arbitrary t.
/// End segments use quadratically extrapolated phantom neighbours (keeps
/// quadratics exact up to the boundary); outside the grid the boundary
/// value is held.
inline cplx interp_catmull_rom(const TimeGrid& g, const std::vector<cplx>& v,
                               double t) {
  const double u = (t - g.t0) / g.dt;
  if (u <= 0.0) return v.front();
  if (u >= double(g.n - 1)) return v.back();
  const std::size_t i = std::min(std::size_t(u), g.n - 2);
  const double s = u - double(i);
  const cplx p1 = v[i];
  const cplx p2 = v[i + 1];
  const cplx p0 = (i == 0) ? p1 * 3.0 - p2 * 3.0 + v[i + 2] : v[i - 1];
  const cplx p3 = (i + 2 >= g.n) ? p2 * 3.0 - p1 * 3.0 + v[i - 1] : v[i + 2];
  const cplx a = p1 * 2.0;
  const cplx b = p2 - p0;
  const cplx c2 = p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3;
  const cplx c3 = p1 * 3.0 - p0 - p2 * 3.0 + p3;
  return (a + b * s + c2 * (s * s) + c3 * (s * s * s)) * 0.5;
}

inline cplx interp_catmull_rom(const TimeTrace& tr, double t) {
  return interp_catmull_rom(tr.grid, tr.v, t);
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = slope*x + intercept.
inline LineFit fit_line(const std::vector<double>& x,
                        const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double d = double(n) * sxx - sx * sx;
  LineFit out;
  out.slope = (double(n) * sxy - sx * sy) / d;
  out.intercept = (sy - out.slope * sx) / double(n);
  return out;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

inline double stdev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size()));
}

}  // namespace qlink
