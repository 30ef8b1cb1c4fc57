#pragma once

// Fixed-header CSV writers for controls, trajectories, mode snapshots and
// calibration traces.  All floating-point values are printed with %.17g so
// identical runs produce byte-identical files.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "qlink/common.hpp"
#include "qlink/pulseshaper.hpp"
#include "qlink/simulator.hpp"

namespace qlink {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open " + path + " for writing");
  return out;
}

inline std::string quote_csv(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

inline void write_control_csv(const std::string& path, const ControlPulse& p) {
  auto out = detail::open_csv(path);
  out << "t,re_g,im_g\n";
  for (std::size_t i = 0; i < p.grid.n; ++i)
    out << fmt17(p.grid.t(i)) << ',' << fmt17(p.g[i].real()) << ','
        << fmt17(p.g[i].imag()) << '\n';
}

/// One row per sample; the source-term columns refer to node 1.
inline void write_trajectory_csv(const std::string& path,
                                 const Trajectory& traj) {
  auto out = detail::open_csv(path);
  out << "t,re_q1,im_q1,re_c1,im_c1,re_q2,im_q2,re_c2,im_c2,norm,"
         "re_gamma,im_gamma,re_gamma_over_c,im_gamma_over_c\n";
  for (std::size_t i = 0; i < traj.grid.n; ++i) {
    const cplx c = traj.c1[i];
    const cplx goc = std::abs(c) > 0.0 ? traj.gamma1[i] / c : cplx{};
    out << fmt17(traj.grid.t(i)) << ',' << fmt17(traj.q1[i].real()) << ','
        << fmt17(traj.q1[i].imag()) << ',' << fmt17(c.real()) << ','
        << fmt17(c.imag()) << ',' << fmt17(traj.q2[i].real()) << ','
        << fmt17(traj.q2[i].imag()) << ',' << fmt17(traj.c2[i].real()) << ','
        << fmt17(traj.c2[i].imag()) << ',' << fmt17(traj.norm[i]) << ','
        << fmt17(traj.gamma1[i].real()) << ',' << fmt17(traj.gamma1[i].imag())
        << ',' << fmt17(goc.real()) << ',' << fmt17(goc.imag()) << '\n';
  }
}

inline void write_modes_csv(const std::string& path,
                            const std::vector<double>& k,
                            const std::vector<double>& omega,
                            const std::vector<cplx>& psi) {
  if (k.size() != omega.size() || k.size() != psi.size())
    throw config_error("write_modes_csv: column length mismatch");
  auto out = detail::open_csv(path);
  out << "k,omega,re_psi,im_psi\n";
  for (std::size_t i = 0; i < k.size(); ++i)
    out << fmt17(k[i]) << ',' << fmt17(omega[i]) << ','
        << fmt17(psi[i].real()) << ',' << fmt17(psi[i].imag()) << '\n';
}

/// Calibration traces: normalized source term 2*Gamma/(kappa*c) and the
/// pointwise memory estimate N(t) with its validity mask.
inline void write_calibration_csv(const std::string& path,
                                  const Trajectory& traj,
                                  const ParamEstimate& est, double kappa) {
  auto out = detail::open_csv(path);
  out << "t,re_2gamma_over_kappa_c,im_2gamma_over_kappa_c,"
         "abs_nonmarkov,arg_nonmarkov,mask\n";
  for (std::size_t i = 0; i < traj.grid.n; ++i) {
    const cplx c = traj.c1[i];
    const cplx g2kc =
        std::abs(c) > 0.0 ? 2.0 * traj.gamma1[i] / (kappa * c) : cplx{};
    const cplx n = est.n_trace.v[i];
    const int mask = est.n_mask[i] ? 1 : 0;
    out << fmt17(traj.grid.t(i)) << ',' << fmt17(g2kc.real()) << ','
        << fmt17(g2kc.imag()) << ',' << fmt17(std::abs(n)) << ','
        << fmt17(mask ? std::arg(n) : 0.0) << ',' << mask << '\n';
  }
}

}  // namespace qlink
