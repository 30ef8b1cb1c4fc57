#pragma once

// Numerically exact single-excitation dynamics of two qubit-cavity nodes
// coupled through the discrete modes of a shared waveguide, plus the
// source-term and kernel machinery used to calibrate the effective model.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qlink/common.hpp"
#include "qlink/linkmodel.hpp"
#include "qlink/pulseshaper.hpp"

namespace qlink {

struct LinkSystem {
  ModeGrid grid;
  DispersionRelation disp;
  NodeCouplings node1, node2;
  double frame_omega = 0.0;         // all diagonals are measured from here
  std::vector<double> omega_rot;    // omega(k) - frame_omega per mode

  std::size_t n_modes() const { return grid.k.size(); }
  const NodeCouplings& node(int j) const { return j == 0 ? node1 : node2; }
};

inline LinkSystem make_link_system(const ModeGrid& grid,
                                   const DispersionRelation& disp,
                                   NodeCouplings n1, NodeCouplings n2) {
  const std::size_t n = grid.k.size();
  if (n1.G.size() != n || n2.G.size() != n)
    throw config_error("node couplings do not match the mode grid");
  LinkSystem sys{grid, disp, std::move(n1), std::move(n2), 0.0, {}};
  sys.frame_omega = disp.omega(grid.carrier_k());
  sys.omega_rot.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    sys.omega_rot[k] = disp.omega(grid.k[k]) - sys.frame_omega;
  return sys;
}

// Single-node variant: the second node is present but fully decoupled.
inline LinkSystem make_link_system(const ModeGrid& grid,
                                   const DispersionRelation& disp,
                                   const NodeCouplings& n1) {
  NodeCouplings off = n1;
  std::fill(off.G.begin(), off.G.end(), 0.0);
  off.kappa = 0.0;
  return make_link_system(grid, disp, n1, off);
}

struct FullState {
  cplx q1{}, q2{}, c1{}, c2{};
  std::vector<cplx> psi;

  FullState() = default;
  explicit FullState(std::size_t n_modes) : psi(n_modes) {}

  double norm_sq() const {
    double s = std::norm(q1) + std::norm(q2) + std::norm(c1) + std::norm(c2);
    for (const cplx& a : psi) s += std::norm(a);
    return s;
  }
};

struct SimConfig {
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t steps = 0;      // intervals; the trajectory has steps+1 samples
  std::size_t mode_stride = 0;  // 0: keep only the final mode snapshot
  double expm_tol = 1e-15;    // relative cutoff of the coupling exponential

  void validate() const {
    if (steps < 2) throw config_error("SimConfig: step count must be >= 2");
    if (!(t_end > t_start)) throw config_error("SimConfig: empty time window");
  }
};

struct Trajectory {
  TimeGrid grid;
  std::vector<cplx> q1, q2, c1, c2;
  std::vector<double> norm;
  std::vector<cplx> gamma1, gamma2;   // source terms i*Om~*c + i*sum G psi
  std::vector<cplx> cdot1, cdot2;     // exact right-hand sides
  double gamma_mismatch = 0.0;        // max deviation between the two routes
  std::vector<std::size_t> psi_at;    // sample indices of mode snapshots
  std::vector<std::vector<cplx>> psi_snapshots;

  double norm_drift() const {
    double d = 0.0;
    for (double v : norm) d = std::max(d, std::abs(v - 1.0));
    return d;
  }
  const std::vector<cplx>& final_psi() const {
    if (psi_snapshots.empty()) throw config_error("no mode snapshots recorded");
    return psi_snapshots.back();
  }
  double final_psi_time() const {
    if (psi_at.empty()) throw config_error("no mode snapshots recorded");
    return grid.t(psi_at.back());
  }
};

namespace detail {

// One Strang step: exact diagonal phases around a coupling substep taken at
// the midpoint control value.  The coupling generator is Hermitian, so its
// exponential is evaluated by a scaled Taylor series to near machine
// precision, which keeps the total norm to rounding level.
class Stepper {
 public:
  Stepper(const LinkSystem& sys, const ControlPulse* g1, const ControlPulse* g2,
          double dt, double expm_tol)
      : sys_(sys), g1_(g1), g2_(g2), dt_(dt), tol_(expm_tol) {
    const std::size_t n = sys.n_modes();
    half_phase_.resize(n);
    for (std::size_t k = 0; k < n; ++k)
      half_phase_[k] = std::polar(1.0, -0.5 * sys.omega_rot[k] * dt);
    q_phase_[0] = std::polar(1.0, -0.5 * (sys.node1.delta - sys.frame_omega) * dt);
    q_phase_[1] = std::polar(1.0, -0.5 * (sys.node2.delta - sys.frame_omega) * dt);
    c_phase_[0] = std::polar(1.0, -0.5 * (sys.node1.Omega_R - sys.frame_omega) * dt);
    c_phase_[1] = std::polar(1.0, -0.5 * (sys.node2.Omega_R - sys.frame_omega) * dt);
    sum_g1_sq_ = sum_g2_sq_ = 0.0;
    for (double g : sys.node1.G) sum_g1_sq_ += g * g;
    for (double g : sys.node2.G) sum_g2_sq_ += g * g;
    term_.psi.resize(n);
    next_.psi.resize(n);
  }

  void advance(FullState& s, double t) const {
    rotate_half(s);
    const cplx g1v = g1_ ? g1_->at(t + 0.5 * dt_) : cplx{};
    const cplx g2v = g2_ ? g2_->at(t + 0.5 * dt_) : cplx{};
    apply_coupling(s, g1v, g2v, dt_);
    rotate_half(s);
  }

  cplx control(int node, double t) const {
    const ControlPulse* g = node == 0 ? g1_ : g2_;
    return g ? g->at(t) : cplx{};
  }

  // Source term from the coupling sum.
  cplx gamma(const FullState& s, int node) const {
    const NodeCouplings& nc = sys_.node(node);
    const cplx c = node == 0 ? s.c1 : s.c2;
    cplx acc{};
    for (std::size_t k = 0; k < s.psi.size(); ++k) acc += nc.G[k] * s.psi[k];
    return iu * ((nc.Omega_R - sys_.frame_omega) * c + acc);
  }

  // Exact cavity derivative from the full right-hand side.
  cplx cdot(const FullState& s, double t, int node) const {
    const NodeCouplings& nc = sys_.node(node);
    const cplx q = node == 0 ? s.q1 : s.q2;
    const cplx c = node == 0 ? s.c1 : s.c2;
    cplx acc{};
    for (std::size_t k = 0; k < s.psi.size(); ++k) acc += nc.G[k] * s.psi[k];
    return -iu * ((nc.Omega_R - sys_.frame_omega) * c +
                  std::conj(control(node, t)) * q + acc);
  }

  // Independent route: gamma = -(cdot + i g* q).
  cplx gamma_from_rhs(const FullState& s, double t, int node) const {
    const cplx q = node == 0 ? s.q1 : s.q2;
    return -(cdot(s, t, node) + iu * std::conj(control(node, t)) * q);
  }

 private:
  void rotate_half(FullState& s) const {
    s.q1 *= q_phase_[0];
    s.q2 *= q_phase_[1];
    s.c1 *= c_phase_[0];
    s.c2 *= c_phase_[1];
    for (std::size_t k = 0; k < s.psi.size(); ++k) s.psi[k] *= half_phase_[k];
  }

  void matvec(const FullState& in, const cplx& g1v, const cplx& g2v,
              FullState& out) const {
    const std::vector<double>& G1 = sys_.node1.G;
    const std::vector<double>& G2 = sys_.node2.G;
    out.q1 = g1v * in.c1;
    out.q2 = g2v * in.c2;
    cplx a1{}, a2{};
    for (std::size_t k = 0; k < in.psi.size(); ++k) {
      a1 += G1[k] * in.psi[k];
      a2 += G2[k] * in.psi[k];
      out.psi[k] = G1[k] * in.c1 + G2[k] * in.c2;
    }
    out.c1 = std::conj(g1v) * in.q1 + a1;
    out.c2 = std::conj(g2v) * in.q2 + a2;
  }

  void apply_coupling(FullState& s, const cplx& g1v, const cplx& g2v,
                      double dt) const {
    const double bound = std::sqrt(2.0 * (std::norm(g1v) + std::norm(g2v) +
                                          sum_g1_sq_ + sum_g2_sq_));
    std::size_t splits = 1;
    while (bound * dt / double(splits) > 0.6 && splits < (1u << 20)) splits *= 2;
    const cplx step = -iu * (dt / double(splits));
    for (std::size_t rep = 0; rep < splits; ++rep) {
      term_ = s;
      double acc_sq = s.norm_sq();
      for (int n = 1; n <= 64; ++n) {
        matvec(term_, g1v, g2v, next_);
        const cplx f = step / double(n);
        next_.q1 *= f;
        next_.q2 *= f;
        next_.c1 *= f;
        next_.c2 *= f;
        for (cplx& v : next_.psi) v *= f;
        std::swap(term_, next_);
        s.q1 += term_.q1;
        s.q2 += term_.q2;
        s.c1 += term_.c1;
        s.c2 += term_.c2;
        for (std::size_t k = 0; k < s.psi.size(); ++k) s.psi[k] += term_.psi[k];
        const double t_sq = term_.norm_sq();
        if (t_sq <= tol_ * tol_ * acc_sq) break;
        if (n == 64)
          throw numerical_error("coupling exponential failed to converge");
      }
    }
  }

  const LinkSystem& sys_;
  const ControlPulse* g1_;
  const ControlPulse* g2_;
  double dt_, tol_;
  std::vector<cplx> half_phase_;
  cplx q_phase_[2], c_phase_[2];
  double sum_g1_sq_ = 0.0, sum_g2_sq_ = 0.0;
  mutable FullState term_, next_;
};

}  // namespace detail

inline void step(FullState& s, double t, double dt, const LinkSystem& sys,
                 const ControlPulse* g1 = nullptr,
                 const ControlPulse* g2 = nullptr) {
  if (!(dt > 0.0)) throw config_error("step: dt must be positive");
  detail::Stepper st(sys, g1, g2, dt, 1e-15);
  st.advance(s, t);
}

inline Trajectory run_from(const SimConfig& cfg, const LinkSystem& sys,
                           FullState state, const ControlPulse* g1,
                           const ControlPulse* g2) {
  cfg.validate();
  if (state.psi.size() != sys.n_modes())
    throw config_error("initial state does not match the mode grid");

  Trajectory traj;
  traj.grid = TimeGrid{cfg.t_start, (cfg.t_end - cfg.t_start) / double(cfg.steps),
                       cfg.steps + 1};
  const std::size_t ns = traj.grid.n;
  traj.q1.resize(ns);
  traj.q2.resize(ns);
  traj.c1.resize(ns);
  traj.c2.resize(ns);
  traj.norm.resize(ns);
  traj.gamma1.resize(ns);
  traj.gamma2.resize(ns);
  traj.cdot1.resize(ns);
  traj.cdot2.resize(ns);

  detail::Stepper st(sys, g1, g2, traj.grid.dt, cfg.expm_tol);

  auto record = [&](std::size_t i, const FullState& s) {
    const double t = traj.grid.t(i);
    traj.q1[i] = s.q1;
    traj.q2[i] = s.q2;
    traj.c1[i] = s.c1;
    traj.c2[i] = s.c2;
    traj.norm[i] = s.norm_sq();
    if (!std::isfinite(traj.norm[i]))
      throw numerical_error("integration failure at t = " + std::to_string(t));
    traj.gamma1[i] = st.gamma(s, 0);
    traj.gamma2[i] = st.gamma(s, 1);
    traj.cdot1[i] = st.cdot(s, t, 0);
    traj.cdot2[i] = st.cdot(s, t, 1);
    traj.gamma_mismatch = std::max(
        {traj.gamma_mismatch, std::abs(traj.gamma1[i] - st.gamma_from_rhs(s, t, 0)),
         std::abs(traj.gamma2[i] - st.gamma_from_rhs(s, t, 1))});
    if (cfg.mode_stride && i % cfg.mode_stride == 0 && i + 1 < ns) {
      traj.psi_at.push_back(i);
      traj.psi_snapshots.push_back(s.psi);
    }
  };

  record(0, state);
  for (std::size_t i = 0; i < cfg.steps; ++i) {
    st.advance(state, traj.grid.t(i));
    record(i + 1, state);
  }
  traj.psi_at.push_back(ns - 1);
  traj.psi_snapshots.push_back(std::move(state.psi));
  return traj;
}

inline Trajectory run_emission(const SimConfig& cfg, const LinkSystem& sys,
                               const ControlPulse& g1) {
  FullState s(sys.n_modes());
  s.q1 = 1.0;
  return run_from(cfg, sys, std::move(s), &g1, nullptr);
}

inline Trajectory run_transfer(const SimConfig& cfg, const LinkSystem& sys,
                               const ControlPulse& g1, const ControlPulse& g2) {
  FullState s(sys.n_modes());
  s.q1 = 1.0;
  return run_from(cfg, sys, std::move(s), &g1, &g2);
}

inline double transfer_fidelity(const Trajectory& traj) {
  if (traj.q2.empty()) throw config_error("empty trajectory");
  return std::norm(traj.q2.back());
}

// Field reconstruction from the last recorded mode snapshot:
// xi(x, t) = sum_k psi_k(T) e^{i k x} e^{-i omega~(k) (t - T)}.
inline TimeTrace reconstruct_at(const Trajectory& traj, const LinkSystem& sys,
                                double x, const TimeGrid& times) {
  const std::vector<cplx>& psiT = traj.final_psi();
  const double T = traj.final_psi_time();
  TimeTrace out(times);
  for (std::size_t k = 0; k < psiT.size(); ++k) {
    const double w = sys.omega_rot[k];
    cplx ph = psiT[k] * std::polar(1.0, sys.grid.k[k] * x - w * (times.t0 - T));
    const cplx stepph = std::polar(1.0, -w * times.dt);
    for (std::size_t i = 0; i < times.n; ++i) {
      out.v[i] += ph;
      ph *= stepph;
    }
  }
  return out;
}

inline TimeTrace gamma_extract(const Trajectory& traj, int node = 0) {
  if (traj.gamma_mismatch > 1e-8)
    throw numerical_error("source-term consistency check failed: " +
                          std::to_string(traj.gamma_mismatch));
  TimeTrace out(traj.grid);
  out.v = node == 0 ? traj.gamma1 : traj.gamma2;
  return out;
}

// Analytic per-mode evaluation of the kernel integrals
//   K1(T) = int_0^T K(s) ds,   K2(T) = int_0^T s K(s) ds,
// with K(s) = sum_k G_k^2 e^{-i nu_k s}, nu_k = omega~(k) - delta_omega.
inline std::pair<cplx, cplx> kernel_integrals(const LinkSystem& sys, int node,
                                              double delta_omega, double t0,
                                              double t) {
  const NodeCouplings& nc = sys.node(node);
  const double T = t - t0;
  cplx K1{}, K2{};
  for (std::size_t k = 0; k < nc.G.size(); ++k) {
    const double G2 = nc.G[k] * nc.G[k];
    const double nu = sys.omega_rot[k] - delta_omega;
    const double xph = nu * T;
    cplx k1, k2;
    if (std::abs(xph) < 1e-4) {
      k1 = T * cplx(1.0 - xph * xph / 6.0, -0.5 * xph);
      k2 = T * T * cplx(0.5 - xph * xph / 8.0, -xph / 3.0);
    } else {
      const cplx e = std::polar(1.0, -xph);
      k1 = (1.0 - e) / (iu * nu);
      k2 = -(1.0 - e) / (nu * nu) + iu * T * e / nu;
    }
    K1 += G2 * k1;
    K2 += G2 * k2;
  }
  return {K1, K2};
}

struct ParamEstimate {
  EffectiveModelParams params;  // refined, self-consistent values
  double kappa_raw = 0.0;       // 2 * mean Re(Gamma/c) over the |c| mask
  double lamb_raw = 0.0;        // mean Im(Gamma/c) over the |c| mask
  double n_rel_std = 0.0;       // dispersion of N(t) over its plateau
  std::size_t c_samples = 0, n_samples = 0;
  TimeTrace n_trace;            // N(t); zero where masked out
  std::vector<unsigned char> n_mask;
};

// Recovers (kappa, delta_omega, N) from a recorded emission.  The plain
// masked averages of Gamma/c are kept as reported values; the returned
// parameters additionally solve the coupled relations
//   <Gamma/c> = kappa/2 + i dw - N <cdot/c + i dw>
//   N(t)      = -(Gamma/c - kappa/2 - i dw) / (cdot/c + i dw)
// by fixed-point iteration (the first iterate is the plain formula).
inline ParamEstimate estimate_params(const Trajectory& traj, int node = 0) {
  const std::vector<cplx>& c = node == 0 ? traj.c1 : traj.c2;
  const std::vector<cplx>& cd = node == 0 ? traj.cdot1 : traj.cdot2;
  const std::vector<cplx>& gm = node == 0 ? traj.gamma1 : traj.gamma2;
  if (traj.gamma_mismatch > 1e-8)
    throw numerical_error("source-term consistency check failed: " +
                          std::to_string(traj.gamma_mismatch));
  const std::size_t ns = c.size();

  double cmax = 0.0;
  for (const cplx& v : c) cmax = std::max(cmax, std::abs(v));
  std::vector<std::size_t> on_c;
  for (std::size_t i = 0; i < ns; ++i)
    if (std::abs(c[i]) > 1e-3 * cmax) on_c.push_back(i);
  if (on_c.size() < 10)
    throw insufficient_data("fewer than 10 samples above the |c| threshold");

  cplx A{}, B{};
  for (std::size_t i : on_c) {
    A += gm[i] / c[i];
    B += cd[i] / c[i];
  }
  A /= double(on_c.size());
  B /= double(on_c.size());

  ParamEstimate est;
  est.kappa_raw = 2.0 * A.real();
  est.lamb_raw = A.imag();
  est.c_samples = on_c.size();
  est.n_trace = TimeTrace(traj.grid);
  est.n_mask.assign(ns, 0);

  cplx K = A;  // kappa/2 + i dw
  cplx N{};
  std::vector<cplx> n_of_t;
  for (int it = 0; it < 8; ++it) {
    const double dw = K.imag();
    double cdmax = 0.0;
    for (std::size_t i = 0; i < ns; ++i)
      cdmax = std::max(cdmax, std::abs(cd[i] + iu * dw * c[i]));
    n_of_t.clear();
    std::fill(est.n_mask.begin(), est.n_mask.end(), 0);
    std::fill(est.n_trace.v.begin(), est.n_trace.v.end(), cplx{});
    cplx acc{};
    for (std::size_t i = 0; i < ns; ++i) {
      const cplx cds = cd[i] + iu * dw * c[i];
      if (std::abs(cds) <= 1e-2 * cdmax || std::abs(c[i]) <= 1e-3 * cmax)
        continue;
      const cplx ni = -(gm[i] / c[i] - K) * c[i] / cds;
      n_of_t.push_back(ni);
      est.n_mask[i] = 1;
      est.n_trace.v[i] = ni;
      acc += ni;
    }
    if (n_of_t.size() < 10)
      throw insufficient_data("fewer than 10 samples above the |cdot| threshold");
    N = acc / double(n_of_t.size());
    const cplx K_next = A + N * (B + iu * dw);
    if (std::abs(K_next - K) < 1e-14 * std::abs(K)) {
      K = K_next;
      break;
    }
    K = K_next;
  }

  double var = 0.0;
  for (const cplx& ni : n_of_t) var += std::norm(ni - N);
  est.n_rel_std = std::abs(N) > 0.0
                      ? std::sqrt(var / double(n_of_t.size())) / std::abs(N)
                      : 0.0;
  est.n_samples = n_of_t.size();
  est.params.kappa = 2.0 * K.real();
  est.params.lamb_shift = K.imag();
  est.params.non_markov = N;
  return est;
}

}  // namespace qlink
