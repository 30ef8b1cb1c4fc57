#pragma once

// Declarative experiment runner: JSON scenario configs, the three control
// strategies, single-point runs, batch kappa sweeps and calibration reports.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qlink/common.hpp"
#include "qlink/csvio.hpp"
#include "qlink/linkmodel.hpp"
#include "qlink/pulseshaper.hpp"
#include "qlink/simulator.hpp"
#include "qlink/units.hpp"
#include "qlink/wavepacket.hpp"

namespace qlink {

enum class Strategy { ideal_sech, markov_corrected, nonmarkov_corrected };
enum class ProtocolKind { emission, transfer };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::ideal_sech: return "ideal_sech";
    case Strategy::markov_corrected: return "markov_corrected";
    case Strategy::nonmarkov_corrected: return "nonmarkov_corrected";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "ideal_sech") return Strategy::ideal_sech;
  if (s == "markov_corrected") return Strategy::markov_corrected;
  if (s == "nonmarkov_corrected") return Strategy::nonmarkov_corrected;
  throw config_error("unknown strategy '" + s + "'");
}

inline const char* kind_name(ProtocolKind k) {
  return k == ProtocolKind::emission ? "emission" : "transfer";
}

inline ProtocolKind parse_kind(const std::string& s) {
  if (s == "emission") return ProtocolKind::emission;
  if (s == "transfer") return ProtocolKind::transfer;
  throw config_error("unknown protocol kind '" + s + "'");
}

struct LinkConfig {
  double length = 5.0;  // m
  std::string dispersion = "rectangular_guide";  // linear|quadratic|rectangular_guide
  std::size_t n_modes = 351;
  double carrier_ghz = 8.6;
  double v_g = 0.194;            // m/ns, linear and quadratic variants
  double guide_width = 0.02286;  // m, rectangular_guide interior width
  double d2 = 0.0;               // m^2/ns, quadratic curvature
  std::string coupling_law = "sqrt_omega";  // flat | sqrt_omega
};

struct NodeConfig {
  double kappa_mhz = 200.0;
  std::string omega_r = "carrier";  // carrier | explicit
  double omega_r_ghz = 0.0;
};

struct CalibrationConfig {
  std::string mode = "pilot";  // pilot | explicit_values | none
  double window = 12.0;        // half-window of the pilot emission, 1/kappa
  std::size_t steps = 5000;
  double delta_omega = 0.0;  // rad/ns, explicit_values
  double n_re = 0.0, n_im = 0.0;
};

struct ProtocolConfig {
  ProtocolKind kind = ProtocolKind::transfer;
  double window = 40.0;  // half-window, 1/kappa units
  std::size_t steps = 2000;
  double share = 0.5;  // fraction of the link distortion undone at emission
  std::vector<Strategy> strategies{Strategy::ideal_sech,
                                   Strategy::markov_corrected,
                                   Strategy::nonmarkov_corrected};
  CalibrationConfig calibration;
};

struct SweepConfig {
  std::vector<double> kappa_mhz;
};

struct OutputConfig {
  bool controls = false;
  bool trajectory = false;
  bool modes = false;
  bool calibration = false;
  bool check_half_step = true;
};

struct ScenarioConfig {
  int schema_version = 1;
  std::string id = "scenario";
  LinkConfig link;
  NodeConfig node;
  ProtocolConfig protocol;
  SweepConfig sweep;
  OutputConfig outputs;

  void validate() const;
  nlohmann::json to_json() const;
  static ScenarioConfig from_json(const nlohmann::json& j);
  static ScenarioConfig load(const std::string& path);
};

namespace detail {

inline void expect_keys(const nlohmann::json& j,
                        std::initializer_list<const char*> allowed,
                        const char* where) {
  if (!j.is_object())
    throw config_error(std::string(where) + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw config_error("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace detail

inline void ScenarioConfig::validate() const {
  if (schema_version != 1) throw config_error("unsupported schema_version");
  if (!(link.length > 0.0)) throw config_error("link.length_m must be > 0");
  if (link.n_modes < 3) throw config_error("link.n_modes must be >= 3");
  if (link.dispersion != "linear" && link.dispersion != "quadratic" &&
      link.dispersion != "rectangular_guide")
    throw config_error("unknown dispersion '" + link.dispersion + "'");
  if (!(link.carrier_ghz > 0.0))
    throw config_error("link.carrier_ghz must be > 0");
  if (link.dispersion != "rectangular_guide" && !(link.v_g > 0.0))
    throw config_error("link.v_g_m_per_ns must be > 0");
  if (link.dispersion == "rectangular_guide" && !(link.guide_width > 0.0))
    throw config_error("link.guide_width_m must be > 0");
  if (link.coupling_law != "flat" && link.coupling_law != "sqrt_omega")
    throw config_error("unknown coupling law '" + link.coupling_law + "'");
  if (!(node.kappa_mhz > 0.0)) throw config_error("node.kappa_mhz must be > 0");
  if (node.omega_r != "carrier" && node.omega_r != "explicit")
    throw config_error("node.omega_r must be 'carrier' or 'explicit'");
  if (node.omega_r == "explicit" && !(node.omega_r_ghz > 0.0))
    throw config_error("node.omega_r_ghz must be > 0");
  if (!(protocol.window > 0.0))
    throw config_error("protocol.window_inv_kappa must be > 0");
  if (protocol.steps < 2) throw config_error("protocol.steps must be >= 2");
  if (protocol.share < 0.0 || protocol.share > 1.0)
    throw config_error("protocol.share must lie in [0, 1]");
  if (protocol.strategies.empty())
    throw config_error("protocol.strategies must not be empty");
  const std::string& cm = protocol.calibration.mode;
  if (cm != "pilot" && cm != "explicit_values" && cm != "none")
    throw config_error("unknown calibration mode '" + cm + "'");
  if (!(protocol.calibration.window > 0.0) || protocol.calibration.steps < 2)
    throw config_error("invalid calibration window or step count");
  const bool wants_nm =
      std::count(protocol.strategies.begin(), protocol.strategies.end(),
                 Strategy::nonmarkov_corrected) > 0;
  if (wants_nm && cm == "none")
    throw config_error(
        "nonmarkov_corrected requires calibration mode 'pilot' or "
        "'explicit_values'");
  for (double k : sweep.kappa_mhz)
    if (!(k > 0.0)) throw config_error("sweep kappa values must be > 0");
}

inline ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
  try {
    detail::expect_keys(j,
                        {"schema_version", "id", "link", "node", "protocol",
                         "sweep", "outputs"},
                        "scenario");
    ScenarioConfig c;
    c.schema_version = j.value("schema_version", 1);
    c.id = j.value("id", std::string("scenario"));
    if (j.contains("link")) {
      const auto& l = j.at("link");
      detail::expect_keys(l,
                          {"length_m", "dispersion", "n_modes", "carrier_ghz",
                           "v_g_m_per_ns", "guide_width_m",
                           "curvature_m2_per_ns", "coupling_law"},
                          "link");
      c.link.length = l.value("length_m", c.link.length);
      c.link.dispersion = l.value("dispersion", c.link.dispersion);
      c.link.n_modes = l.value("n_modes", c.link.n_modes);
      c.link.carrier_ghz = l.value("carrier_ghz", c.link.carrier_ghz);
      c.link.v_g = l.value("v_g_m_per_ns", c.link.v_g);
      c.link.guide_width = l.value("guide_width_m", c.link.guide_width);
      c.link.d2 = l.value("curvature_m2_per_ns", c.link.d2);
      c.link.coupling_law = l.value("coupling_law", c.link.coupling_law);
    }
    if (j.contains("node")) {
      const auto& n = j.at("node");
      detail::expect_keys(n, {"kappa_mhz", "omega_r", "omega_r_ghz"}, "node");
      c.node.kappa_mhz = n.value("kappa_mhz", c.node.kappa_mhz);
      c.node.omega_r = n.value("omega_r", c.node.omega_r);
      c.node.omega_r_ghz = n.value("omega_r_ghz", c.node.omega_r_ghz);
    }
    if (j.contains("protocol")) {
      const auto& p = j.at("protocol");
      detail::expect_keys(p,
                          {"kind", "window_inv_kappa", "steps", "share",
                           "strategies", "calibration"},
                          "protocol");
      c.protocol.kind = parse_kind(p.value("kind", std::string("transfer")));
      c.protocol.window = p.value("window_inv_kappa", c.protocol.window);
      c.protocol.steps = p.value("steps", c.protocol.steps);
      c.protocol.share = p.value("share", c.protocol.share);
      if (p.contains("strategies")) {
        c.protocol.strategies.clear();
        for (const auto& s : p.at("strategies"))
          c.protocol.strategies.push_back(parse_strategy(s.get<std::string>()));
      }
      if (p.contains("calibration")) {
        const auto& cal = p.at("calibration");
        detail::expect_keys(cal,
                            {"mode", "window_inv_kappa", "steps",
                             "delta_omega_rad_ns", "n_re", "n_im"},
                            "calibration");
        auto& cc = c.protocol.calibration;
        cc.mode = cal.value("mode", cc.mode);
        cc.window = cal.value("window_inv_kappa", cc.window);
        cc.steps = cal.value("steps", cc.steps);
        cc.delta_omega = cal.value("delta_omega_rad_ns", cc.delta_omega);
        cc.n_re = cal.value("n_re", cc.n_re);
        cc.n_im = cal.value("n_im", cc.n_im);
      }
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      detail::expect_keys(s, {"kappa_mhz"}, "sweep");
      if (s.contains("kappa_mhz"))
        c.sweep.kappa_mhz = s.at("kappa_mhz").get<std::vector<double>>();
    }
    if (j.contains("outputs")) {
      const auto& o = j.at("outputs");
      detail::expect_keys(o,
                          {"controls", "trajectory", "modes", "calibration",
                           "check_half_step"},
                          "outputs");
      c.outputs.controls = o.value("controls", c.outputs.controls);
      c.outputs.trajectory = o.value("trajectory", c.outputs.trajectory);
      c.outputs.modes = o.value("modes", c.outputs.modes);
      c.outputs.calibration = o.value("calibration", c.outputs.calibration);
      c.outputs.check_half_step =
          o.value("check_half_step", c.outputs.check_half_step);
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config parse: ") + e.what());
  }
}

inline ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config parse: ") + e.what());
  }
  return from_json(j);
}

inline nlohmann::json ScenarioConfig::to_json() const {
  nlohmann::json j;
  j["schema_version"] = schema_version;
  j["id"] = id;
  j["link"] = {{"length_m", link.length},
               {"dispersion", link.dispersion},
               {"n_modes", link.n_modes},
               {"carrier_ghz", link.carrier_ghz},
               {"v_g_m_per_ns", link.v_g},
               {"guide_width_m", link.guide_width},
               {"curvature_m2_per_ns", link.d2},
               {"coupling_law", link.coupling_law}};
  j["node"] = {{"kappa_mhz", node.kappa_mhz},
               {"omega_r", node.omega_r},
               {"omega_r_ghz", node.omega_r_ghz}};
  nlohmann::json strat = nlohmann::json::array();
  for (Strategy s : protocol.strategies) strat.push_back(strategy_name(s));
  j["protocol"] = {
      {"kind", kind_name(protocol.kind)},
      {"window_inv_kappa", protocol.window},
      {"steps", protocol.steps},
      {"share", protocol.share},
      {"strategies", strat},
      {"calibration",
       {{"mode", protocol.calibration.mode},
        {"window_inv_kappa", protocol.calibration.window},
        {"steps", protocol.calibration.steps},
        {"delta_omega_rad_ns", protocol.calibration.delta_omega},
        {"n_re", protocol.calibration.n_re},
        {"n_im", protocol.calibration.n_im}}}};
  j["sweep"] = {{"kappa_mhz", sweep.kappa_mhz}};
  j["outputs"] = {{"controls", outputs.controls},
                  {"trajectory", outputs.trajectory},
                  {"modes", outputs.modes},
                  {"calibration", outputs.calibration},
                  {"check_half_step", outputs.check_half_step}};
  return j;
}

struct ResultRecord {
  std::string scenario_id;
  double kappa_mhz = 0.0;
  double kappa = 0.0;  // rad/ns
  Strategy strategy = Strategy::ideal_sech;
  ProtocolKind kind = ProtocolKind::transfer;
  double f_pulse = 0.0;
  double f_transfer = 0.0;
  double infidelity = 1.0;
  EffectiveModelParams estimated;
  bool calibrated = false;
  double distortion = 0.0;  // full-link D, ns^2
  double d_max = 0.0;       // closed-form feasibility bound, ns^2
  double share = 0.5;
  bool feasible = true;
  double norm_drift = 0.0;
  double half_step_delta = 0.0;
  double wall_ms = 0.0;  // serialized to the JSON sidecar only
  std::string note;
};

/// Link assembled for one kappa: dispersion, mode window and derived scales.
struct LinkHandle {
  DispersionRelation disp;
  ModeGrid grid;
  CouplingLaw law = CouplingLaw::sqrt_omega;
  double kappa = 0.0;
  double omega_r = 0.0;
  double t_ab = 0.0;    // one-way travel time, ns
  double d_link = 0.0;  // full-link distortion, ns^2
  double band_lo = 0.0, band_hi = 0.0;  // mode band edges, rad/ns
};

inline LinkHandle build_link(const ScenarioConfig& cfg, double kappa) {
  const LinkConfig& L = cfg.link;
  DispersionRelation disp =
      L.dispersion == "linear"
          ? DispersionRelation::linear(L.v_g, 0.0)
          : L.dispersion == "quadratic"
                ? DispersionRelation::quadratic(omega_from_ghz(L.carrier_ghz),
                                                L.v_g, L.d2,
                                                omega_from_ghz(L.carrier_ghz) /
                                                    L.v_g)
                : DispersionRelation::rectangular_guide(c_vacuum,
                                                        L.guide_width);
  LinkHandle h;
  h.grid = make_mode_grid(L.length, L.n_modes, disp, omega_from_ghz(L.carrier_ghz));
  h.disp = disp;
  h.law = L.coupling_law == "flat" ? CouplingLaw::flat
                                   : CouplingLaw::sqrt_omega;
  h.kappa = kappa;
  const double k_c = h.grid.carrier_k();
  h.omega_r = cfg.node.omega_r == "carrier"
                  ? disp.omega(k_c)
                  : omega_from_ghz(cfg.node.omega_r_ghz);
  h.t_ab = travel_time(disp, k_c, 0.0, L.length);
  h.d_link = distortion_parameter(disp, k_c, h.t_ab);
  h.band_lo = disp.omega(h.grid.k.front());
  h.band_hi = disp.omega(h.grid.k.back());
  return h;
}

/// Both-node (transfer) or single-node (emission) system; delta_offset is
/// the qubit retune added on top of the Omega_R placement.
inline LinkSystem assemble(const LinkHandle& h, bool two_nodes,
                           double delta_offset) {
  NodeCouplings n1 =
      couplings_from_kappa(h.grid, h.disp, h.kappa, h.omega_r, 1, h.law);
  n1.delta += delta_offset;
  if (!two_nodes) return make_link_system(h.grid, h.disp, n1);
  NodeCouplings n2 =
      couplings_from_kappa(h.grid, h.disp, h.kappa, h.omega_r, 2, h.law);
  n2.delta += delta_offset;
  return make_link_system(h.grid, h.disp, n1, n2);
}

namespace detail {

/// Continuum target field at a node, in the calibrated rotating frame:
///   xi(t) = (1/2pi) int A(nu) e^{i chirp_share NL(nu) t_ab}
///                    e^{-i nu (t - t_center)} dnu,
/// A(nu) = (pi/sqrt(kappa)) sech(pi nu / kappa), NL the beyond-linear part
/// of the dispersion at omega_carrier + dw + nu.  Unit L2 norm; building it
/// from the continuum rather than the discrete modes avoids the spurious
/// 2L-periodic images of the mode sum inside wide windows.
inline void emitter_field(const LinkHandle& h, double dw, double chirp_share,
                          double kappa, double t_center, const TimeGrid& times,
                          TimeTrace& xi, TimeTrace& xi_dot) {
  const double k_c = h.grid.carrier_k();
  const double omega_ref = h.disp.omega(k_c) + dw;
  const double nu_b = 6.9 * kappa;  // sech(pi 6.9) ~ 8e-10: negligible tails
  if (omega_ref - nu_b < h.band_lo || omega_ref + nu_b > h.band_hi)
    throw config_error("photon too broadband for this link's mode window");

  // Keep the quadrature's alias images well outside the window, chirp
  // group delay included.
  double reach = std::max(std::abs(times.t0 - t_center),
                          std::abs(times.back() - t_center));
  reach += 2.0 * std::abs(chirp_share * h.d_link) * nu_b;
  std::size_t n_nu =
      std::max<std::size_t>(4001, std::size_t(nu_b * 2.5 * reach / pi) + 1);
  if (n_nu % 2 == 0) ++n_nu;
  const double dnu = 2.0 * nu_b / double(n_nu - 1);

  xi = TimeTrace(times);
  xi_dot = TimeTrace(times);
  const double amp0 = std::sqrt(pi * pi / kappa) * dnu / (2.0 * pi);
  for (std::size_t j = 0; j < n_nu; ++j) {
    const double nu = -nu_b + double(j) * dnu;
    const double wgt = (j == 0 || j + 1 == n_nu) ? 0.5 : 1.0;
    const double nl =
        nonlinear_residual(h.disp, h.disp.invert(omega_ref + nu), k_c);
    const cplx a = amp0 * wgt / std::cosh(pi * nu / kappa) *
                   std::polar(1.0, chirp_share * nl * h.t_ab);
    cplx ph = a * std::polar(1.0, -nu * (times.t0 - t_center));
    const cplx st = std::polar(1.0, -nu * times.dt);
    for (std::size_t i = 0; i < times.n; ++i) {
      xi.v[i] += ph;
      xi_dot.v[i] += cplx(0.0, -nu) * ph;
      ph *= st;
    }
  }
}

inline ControlPulse sech_control_centered(double kappa, double t_c,
                                          const TimeGrid& cg) {
  ControlPulse p;
  p.grid = cg;
  p.g.resize(cg.n);
  p.provenance = Provenance::analytic_sech;
  p.params.kappa = kappa;
  for (std::size_t i = 0; i < cg.n; ++i)
    p.g[i] = 0.5 * kappa / std::cosh(0.5 * kappa * (cg.t(i) - t_c));
  return p;
}

}  // namespace detail

/// Pilot emission with the analytic Markov control; the estimate feeds the
/// nonmarkov_corrected strategy and the calibration report.  The window is
/// clamped under half the round-trip recurrence so the reflected front
/// cannot re-enter the node while the estimator is still sampling.
inline std::pair<ParamEstimate, Trajectory> run_pilot(
    const LinkHandle& h, const CalibrationConfig& cal) {
  const double period =
      2.0 * h.grid.length / h.disp.group_velocity(h.grid.carrier_k());
  const double wp = std::min(cal.window / h.kappa, 0.45 * period);
  ControlPulse gp = analytic_sech_control(
      h.kappa, 0.0, TimeGrid::spanning(-wp, wp, 2 * cal.steps + 1));
  LinkSystem sys = assemble(h, false, 0.0);
  Trajectory traj = run_emission(SimConfig{-wp, wp, cal.steps}, sys, gp);
  ParamEstimate est = estimate_params(traj, 0);
  return {std::move(est), std::move(traj)};
}

struct StrategyPlan {
  ControlPulse g1, g2;  // g2 unused for emission-kind protocols
  EffectiveModelParams estimated;
  bool calibrated = false;
  double delta_offset = 0.0;  // qubit retune, rad/ns
  double target_dw = 0.0;     // carrier offset of the designed packet
};

/// The protocol window is fixed in 1/kappa units, so sweeping below the
/// reference kappa stretches it in absolute time.  Scale the step count to
/// keep dt constant; otherwise low-kappa points are integrator-limited.
inline std::size_t effective_steps(const ScenarioConfig& cfg,
                                   double kappa_mhz) {
  const double scale = std::max(1.0, cfg.node.kappa_mhz / kappa_mhz);
  return std::size_t(std::ceil(double(cfg.protocol.steps) * scale));
}

inline StrategyPlan plan_strategy(const LinkHandle& h,
                                  const ScenarioConfig& cfg, Strategy strat) {
  const ProtocolConfig& pr = cfg.protocol;
  const double kappa = h.kappa;
  const double W = pr.window / kappa;
  const bool transfer = pr.kind == ProtocolKind::transfer;
  if (transfer && W < 0.5 * h.t_ab + 5.0 / kappa)
    throw config_error(
        "protocol window too short for the link travel time plus pulse tails");
  const double t_c = transfer ? -0.5 * h.t_ab : 0.0;
  const std::size_t steps = effective_steps(cfg, kappa_to_mhz(kappa));
  TimeGrid cg =
      TimeGrid::spanning(-W, W, std::max<std::size_t>(2 * steps, 4000) + 1);

  StrategyPlan plan;
  plan.estimated = EffectiveModelParams{kappa, 0.0, cplx{}};
  if (strat == Strategy::nonmarkov_corrected) {
    const CalibrationConfig& cal = pr.calibration;
    if (cal.mode == "pilot") {
      plan.estimated = run_pilot(h, cal).first.params;
    } else if (cal.mode == "explicit_values") {
      plan.estimated =
          EffectiveModelParams{kappa, cal.delta_omega, cplx(cal.n_re, cal.n_im)};
    } else {
      throw config_error("nonmarkov_corrected requires calibration");
    }
    plan.calibrated = true;
    plan.delta_offset = plan.estimated.lamb_shift;
    plan.target_dw = plan.estimated.lamb_shift;
  }

  if (strat == Strategy::ideal_sech) {
    plan.g1 = detail::sech_control_centered(kappa, t_c, cg);
    if (transfer) plan.g2 = receiver_control(plan.g1);
    return plan;
  }

  // Corrected strategies synthesize the control from a designed packet;
  // the synthesis model runs in the frame already shifted by the estimated
  // resonance offset, so only kappa and the memory number enter here.
  const cplx n_used = strat == Strategy::nonmarkov_corrected
                          ? plan.estimated.non_markov
                          : cplx{};
  const EffectiveModelParams synth{kappa, 0.0, n_used};
  auto make = [&](double chirp_share) {
    TimeTrace xi, xid;
    detail::emitter_field(h, plan.target_dw, chirp_share, kappa, t_c, cg, xi,
                          xid);
    return control_from_field(xi, synth, {}, &xid).pulse;
  };
  plan.g1 = make(pr.share);
  if (transfer) {
    // Time-reversing the absorption maps the catch design onto the same
    // builder with the complementary distortion share.
    plan.g2 = receiver_control(std::abs(pr.share - 0.5) < 1e-12
                                   ? plan.g1
                                   : make(1.0 - pr.share));
  }
  return plan;
}

/// Fidelity of an emitted packet against its design shape, measured at the
/// guide midpoint on the first full passage after the recorded snapshot.
inline double midpoint_pulse_fidelity(const Trajectory& traj,
                                      const LinkSystem& sys,
                                      const LinkHandle& h, double dw) {
  const double T = traj.final_psi_time();
  const double vg = h.disp.group_velocity(h.grid.carrier_k());
  const double period = 2.0 * h.grid.length / vg;
  const double x0 = 0.5 * h.grid.length;
  const double half = std::min(18.0 / h.kappa, 0.45 * period);
  double t_star = x0 / vg;
  while (t_star < T + half) t_star += period;
  TimeGrid rg = TimeGrid::spanning(t_star - half, t_star + half, 4001);
  TimeTrace xi = reconstruct_at(traj, sys, x0, rg);
  TimeTrace target(rg);
  for (std::size_t i = 0; i < rg.n; ++i) {
    const double tau = rg.t(i) - t_star;
    target.v[i] =
        std::polar(1.0 / std::cosh(0.5 * h.kappa * tau), -dw * tau);
  }
  return pulse_fidelity(xi, target);
}

inline ResultRecord run_point(const ScenarioConfig& cfg, double kappa_mhz,
                              Strategy strat, const std::string& out_dir = "") {
  const auto tic = std::chrono::steady_clock::now();
  ResultRecord rec;
  rec.scenario_id = cfg.id;
  rec.kappa_mhz = kappa_mhz;
  rec.kappa = kappa_from_mhz(kappa_mhz);
  rec.strategy = strat;
  rec.kind = cfg.protocol.kind;
  rec.share = cfg.protocol.share;
  rec.estimated = EffectiveModelParams{rec.kappa, 0.0, cplx{}};
  try {
    LinkHandle h = build_link(cfg, rec.kappa);
    rec.distortion = h.d_link;
    rec.d_max =
        max_correctable_distortion(rec.kappa, DmaxMethod::closed_form);
    StrategyPlan plan = plan_strategy(h, cfg, strat);
    rec.estimated = plan.calibrated
                        ? plan.estimated
                        : EffectiveModelParams{rec.kappa, 0.0, cplx{}};
    rec.calibrated = plan.calibrated;

    const double W = cfg.protocol.window / rec.kappa;
    const bool transfer = cfg.protocol.kind == ProtocolKind::transfer;
    Trajectory kept;
    auto fidelity_at = [&](std::size_t steps, bool keep) {
      LinkSystem sys = assemble(h, transfer, plan.delta_offset);
      SimConfig sc{-W, W, steps};
      Trajectory traj = transfer ? run_transfer(sc, sys, plan.g1, plan.g2)
                                 : run_emission(sc, sys, plan.g1);
      const double F =
          transfer ? transfer_fidelity(traj)
                   : midpoint_pulse_fidelity(traj, sys, h, plan.target_dw);
      if (keep) {
        rec.norm_drift = traj.norm_drift();
        kept = std::move(traj);
      }
      return F;
    };

    const std::size_t steps = effective_steps(cfg, kappa_mhz);
    const double F = fidelity_at(steps, true);
    (transfer ? rec.f_transfer : rec.f_pulse) = F;
    rec.infidelity = 1.0 - F;
    if (cfg.outputs.check_half_step)
      rec.half_step_delta = std::abs(F - fidelity_at(2 * steps, false));

    if (!out_dir.empty()) {
      namespace fs = std::filesystem;
      fs::create_directories(out_dir);
      const std::string tag = out_dir + "/" + cfg.id + "_" +
                              fmt17(kappa_mhz) + "MHz_" +
                              strategy_name(strat);
      if (cfg.outputs.controls) {
        write_control_csv(tag + "_control_emit.csv", plan.g1);
        if (transfer) write_control_csv(tag + "_control_catch.csv", plan.g2);
      }
      if (cfg.outputs.trajectory)
        write_trajectory_csv(tag + "_trajectory.csv", kept);
      if (cfg.outputs.modes)
        write_modes_csv(tag + "_modes.csv", h.grid.k,
                        mode_frequencies(h.grid, h.disp), kept.final_psi());
    }
  } catch (const infeasible_pulse& e) {
    rec.feasible = false;
    rec.note = e.what();
    rec.infidelity = 1.0;
  } catch (const denominator_vanishes& e) {
    rec.feasible = false;
    rec.note = e.what();
    rec.infidelity = 1.0;
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - tic)
                    .count();
  return rec;
}

inline void write_results_csv(const std::string& path,
                              const std::vector<ResultRecord>& recs) {
  auto out = detail::open_csv(path);
  out << "scenario,kappa_mhz,kappa,strategy,kind,f_pulse,f_transfer,"
         "infidelity,est_kappa,est_delta_omega,re_est_nonmarkov,"
         "im_est_nonmarkov,calibrated,distortion,d_max,share,feasible,"
         "norm_drift,half_step_delta,note\n";
  for (const ResultRecord& r : recs) {
    out << r.scenario_id << ',' << fmt17(r.kappa_mhz) << ',' << fmt17(r.kappa)
        << ',' << strategy_name(r.strategy) << ',' << kind_name(r.kind) << ','
        << fmt17(r.f_pulse) << ',' << fmt17(r.f_transfer) << ','
        << fmt17(r.infidelity) << ',' << fmt17(r.estimated.kappa) << ','
        << fmt17(r.estimated.lamb_shift) << ','
        << fmt17(r.estimated.non_markov.real()) << ','
        << fmt17(r.estimated.non_markov.imag()) << ','
        << (r.calibrated ? 1 : 0) << ',' << fmt17(r.distortion) << ','
        << fmt17(r.d_max) << ',' << fmt17(r.share) << ','
        << (r.feasible ? 1 : 0) << ',' << fmt17(r.norm_drift) << ','
        << fmt17(r.half_step_delta) << ',' << detail::quote_csv(r.note)
        << '\n';
  }
}

/// Wall-clock timings and the resolved config live here, not in the CSV,
/// so result tables are byte-identical across reruns.
inline void write_sidecar_json(const std::string& path,
                               const ScenarioConfig& cfg,
                               const std::vector<ResultRecord>& recs) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open " + path + " for writing");
  nlohmann::json j;
  j["schema_version"] = 1;
  j["config"] = cfg.to_json();
  nlohmann::json rows = nlohmann::json::array();
  for (const ResultRecord& r : recs)
    rows.push_back({{"kappa_mhz", r.kappa_mhz},
                    {"strategy", strategy_name(r.strategy)},
                    {"feasible", r.feasible},
                    {"wall_ms", r.wall_ms},
                    {"note", r.note}});
  j["records"] = rows;
  out << j.dump(2) << '\n';
}

/// Single-kappa pipeline: one record per configured strategy.
inline std::vector<ResultRecord> run_scenario(const ScenarioConfig& cfg,
                                              const std::string& out_dir = "") {
  cfg.validate();
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  std::vector<ResultRecord> out;
  for (Strategy s : cfg.protocol.strategies)
    out.push_back(run_point(cfg, cfg.node.kappa_mhz, s, out_dir));
  if (!out_dir.empty()) {
    write_results_csv(out_dir + "/results.csv", out);
    write_sidecar_json(out_dir + "/results_meta.json", cfg, out);
  }
  return out;
}

/// Batch sweep over the configured kappa grid.  Points run concurrently up
/// to `workers`; each completed record is streamed to its own file, and the
/// final table is assembled in grid order regardless of completion order.
inline std::vector<ResultRecord> sweep_kappa(const ScenarioConfig& cfg,
                                             const std::string& out_dir = "",
                                             std::size_t workers = 1) {
  cfg.validate();
  if (cfg.sweep.kappa_mhz.empty())
    throw config_error("sweep requires at least one kappa value");
  std::vector<std::pair<double, Strategy>> points;
  for (double k : cfg.sweep.kappa_mhz)
    for (Strategy s : cfg.protocol.strategies) points.emplace_back(k, s);

  const bool to_disk = !out_dir.empty();
  if (to_disk)
    std::filesystem::create_directories(out_dir + "/points");

  std::vector<ResultRecord> records(points.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) break;
      ResultRecord rec;
      try {
        rec = run_point(cfg, points[i].first, points[i].second);
      } catch (const std::exception& e) {
        rec.scenario_id = cfg.id;
        rec.kappa_mhz = points[i].first;
        rec.kappa = kappa_from_mhz(points[i].first);
        rec.strategy = points[i].second;
        rec.kind = cfg.protocol.kind;
        rec.share = cfg.protocol.share;
        rec.feasible = false;
        rec.note = e.what();
      }
      if (to_disk) {
        std::lock_guard<std::mutex> lock(io);
        write_results_csv(out_dir + "/points/" + cfg.id + "_" +
                              fmt17(points[i].first) + "MHz_" +
                              strategy_name(points[i].second) + ".csv",
                          {rec});
      }
      records[i] = std::move(rec);
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    const std::size_t n = std::min(workers, points.size());
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  if (to_disk) {
    write_results_csv(out_dir + "/results.csv", records);
    write_sidecar_json(out_dir + "/results_meta.json", cfg, records);
  }
  return records;
}

struct CalibrationReport {
  ParamEstimate estimate;
  Trajectory trajectory;
  double kappa = 0.0;
};

/// Pilot emission at the configured node kappa plus the panel traces
/// (normalized source term and pointwise memory estimate) as CSV.
inline CalibrationReport calibration_report(const ScenarioConfig& cfg,
                                            const std::string& out_dir = "") {
  cfg.validate();
  const double kappa = kappa_from_mhz(cfg.node.kappa_mhz);
  LinkHandle h = build_link(cfg, kappa);
  auto [est, traj] = run_pilot(h, cfg.protocol.calibration);
  CalibrationReport rep{std::move(est), std::move(traj), kappa};
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_calibration_csv(out_dir + "/calibration.csv", rep.trajectory,
                          rep.estimate, kappa);
  }
  return rep;
}

}  // namespace qlink
