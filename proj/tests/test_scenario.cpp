#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qlink/csvio.hpp"
#include "qlink/scenario.hpp"
#include "qlink/units.hpp"

using namespace qlink;
namespace fs = std::filesystem;

namespace {

ScenarioConfig flat_cfg() {
  ScenarioConfig c;
  c.id = "flat_test";
  c.link.length = 5.0;
  c.link.dispersion = "linear";
  c.link.v_g = 0.194;
  c.link.n_modes = 151;
  c.link.carrier_ghz = 8.6;
  c.link.coupling_law = "flat";
  c.node.kappa_mhz = 200.0;
  c.protocol.kind = ProtocolKind::transfer;
  c.protocol.window = 24.0;
  c.protocol.steps = 800;
  c.protocol.share = 0.5;
  c.protocol.calibration.window = 10.0;
  c.protocol.calibration.steps = 1500;
  c.outputs.check_half_step = false;
  return c;
}

ScenarioConfig chirped_cfg(double d2) {
  ScenarioConfig c = flat_cfg();
  c.id = "chirp_test";
  c.link.dispersion = "quadratic";
  c.link.d2 = d2;
  c.link.n_modes = 221;
  c.link.coupling_law = "sqrt_omega";
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path p;
  explicit TempDir(const std::string& name)
      : p(fs::temp_directory_path() / name) {
    fs::remove_all(p);
    fs::create_directories(p);
  }
  ~TempDir() { fs::remove_all(p); }
  std::string str() const { return p.string(); }
};

}  // namespace

TEST_CASE("scenario config survives a json round trip") {
  ScenarioConfig a = chirped_cfg(0.0015);
  a.sweep.kappa_mhz = {100.0, 200.0, 300.0};
  a.node.omega_r = "explicit";
  a.node.omega_r_ghz = 8.61;
  a.protocol.strategies = {Strategy::markov_corrected,
                           Strategy::nonmarkov_corrected};
  a.protocol.calibration.mode = "explicit_values";
  a.protocol.calibration.delta_omega = -0.02;
  a.protocol.calibration.n_re = 0.05;
  a.protocol.calibration.n_im = -0.01;
  a.outputs.controls = true;

  ScenarioConfig b = ScenarioConfig::from_json(a.to_json());
  CHECK(b.id == a.id);
  CHECK(b.link.dispersion == a.link.dispersion);
  CHECK(b.link.d2 == a.link.d2);
  CHECK(b.link.n_modes == a.link.n_modes);
  CHECK(b.link.coupling_law == a.link.coupling_law);
  CHECK(b.node.omega_r_ghz == a.node.omega_r_ghz);
  CHECK(b.protocol.kind == a.protocol.kind);
  CHECK(b.protocol.window == a.protocol.window);
  CHECK(b.protocol.share == a.protocol.share);
  CHECK(b.protocol.strategies == a.protocol.strategies);
  CHECK(b.protocol.calibration.mode == a.protocol.calibration.mode);
  CHECK(b.protocol.calibration.delta_omega ==
        a.protocol.calibration.delta_omega);
  CHECK(b.sweep.kappa_mhz == a.sweep.kappa_mhz);
  CHECK(b.outputs.controls == a.outputs.controls);
  CHECK(b.outputs.check_half_step == a.outputs.check_half_step);
}

TEST_CASE("scenario config rejects malformed input") {
  nlohmann::json good = flat_cfg().to_json();

  SECTION("unknown keys anywhere") {
    for (const char* where : {"", "link", "node", "protocol", "sweep",
                              "outputs"}) {
      nlohmann::json j = good;
      (*where ? j.at(where) : j)["surprise"] = 1;
      CHECK_THROWS_AS(ScenarioConfig::from_json(j), config_error);
    }
  }
  SECTION("bad enum strings") {
    nlohmann::json j = good;
    j["protocol"]["strategies"] = {"ideal_sech", "heroic_guess"};
    CHECK_THROWS_AS(ScenarioConfig::from_json(j), config_error);
    j = good;
    j["protocol"]["kind"] = "teleport";
    CHECK_THROWS_AS(ScenarioConfig::from_json(j), config_error);
    j = good;
    j["link"]["dispersion"] = "cubic";
    CHECK_THROWS_AS(ScenarioConfig::from_json(j), config_error);
  }
  SECTION("out-of-range values") {
    nlohmann::json j = good;
    j["protocol"]["share"] = 1.5;
    CHECK_THROWS_AS(ScenarioConfig::from_json(j), config_error);
    j = good;
    j["node"]["kappa_mhz"] = 0.0;
    CHECK_THROWS_AS(ScenarioConfig::from_json(j), config_error);
    j = good;
    j["sweep"]["kappa_mhz"] = {100.0, -5.0};
    CHECK_THROWS_AS(ScenarioConfig::from_json(j), config_error);
  }
  SECTION("memory correction without a calibration source") {
    ScenarioConfig c = flat_cfg();
    c.protocol.strategies = {Strategy::nonmarkov_corrected};
    c.protocol.calibration.mode = "none";
    CHECK_THROWS_AS(c.validate(), config_error);
  }
  SECTION("unreadable or unparseable files") {
    CHECK_THROWS_AS(ScenarioConfig::load("/nonexistent/cfg.json"),
                    config_error);
    TempDir dir("qlink_cfg_parse");
    const std::string bad = dir.str() + "/bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK_THROWS_AS(ScenarioConfig::load(bad), config_error);
  }
}

TEST_CASE("designed field reduces to the plain envelope without dispersion") {
  ScenarioConfig cfg = flat_cfg();
  const double kappa = kappa_from_mhz(cfg.node.kappa_mhz);
  LinkHandle h = build_link(cfg, kappa);
  const double t_c = -0.5 * h.t_ab;
  TimeGrid tg = TimeGrid::spanning(-20.0, 20.0, 4001);
  TimeTrace xi, xid;
  detail::emitter_field(h, 0.0, 0.5, kappa, t_c, tg, xi, xid);

  const double a0 = std::sqrt(kappa / 4.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < tg.n; ++i) {
    const cplx want = a0 / std::cosh(0.5 * kappa * (tg.t(i) - t_c));
    worst = std::max(worst, std::abs(xi.v[i] - want));
  }
  CHECK(worst < 1e-6 * a0);

  TimeTrace centered, centered_dot;
  detail::emitter_field(h, 0.0, 0.5, kappa, 0.0, tg, centered, centered_dot);
  CHECK(norm_sq(centered) == Catch::Approx(1.0).epsilon(1e-8));

  double slope_err = 0.0, slope_max = 0.0;
  for (std::size_t i = 1; i + 1 < tg.n; ++i) {
    const cplx fd = (xi.v[i + 1] - xi.v[i - 1]) / (2.0 * tg.dt);
    slope_err = std::max(slope_err, std::abs(fd - xid.v[i]));
    slope_max = std::max(slope_max, std::abs(xid.v[i]));
  }
  CHECK(slope_err < 1e-3 * slope_max);
}

TEST_CASE("designed field carries the dispersion predistortion") {
  ScenarioConfig cfg = chirped_cfg(0.0015);
  const double kappa = kappa_from_mhz(cfg.node.kappa_mhz);
  LinkHandle h = build_link(cfg, kappa);
  REQUIRE(h.d_link > 0.3);
  TimeGrid tg = TimeGrid::spanning(-20.0, 20.0, 4001);
  TimeTrace plain, chirped, xid;
  detail::emitter_field(h, 0.0, 0.0, kappa, 0.0, tg, plain, xid);
  detail::emitter_field(h, 0.0, 1.0, kappa, 0.0, tg, chirped, xid);

  CHECK(norm_sq(chirped) == Catch::Approx(1.0).epsilon(1e-6));
  CHECK(pulse_fidelity(chirped, plain) < 0.995);
  double slope_err = 0.0, slope_max = 0.0;
  for (std::size_t i = 1; i + 1 < tg.n; ++i) {
    const cplx fd = (chirped.v[i + 1] - chirped.v[i - 1]) / (2.0 * tg.dt);
    slope_err = std::max(slope_err, std::abs(fd - xid.v[i]));
    slope_max = std::max(slope_max, std::abs(xid.v[i]));
  }
  CHECK(slope_err < 2e-3 * slope_max);

  TimeTrace narrow_band_probe, unused;
  ScenarioConfig tiny = cfg;
  tiny.link.n_modes = 21;
  LinkHandle h_tiny = build_link(tiny, kappa);
  CHECK_THROWS_AS(detail::emitter_field(h_tiny, 0.0, 0.5, kappa, 0.0, tg,
                                        narrow_band_probe, unused),
                  config_error);
}

TEST_CASE("strategy plans center the emitter pulse and mirror the catch") {
  ScenarioConfig cfg = chirped_cfg(0.0015);
  const double kappa = kappa_from_mhz(cfg.node.kappa_mhz);
  LinkHandle h = build_link(cfg, kappa);

  StrategyPlan plan = plan_strategy(h, cfg, Strategy::markov_corrected);
  REQUIRE(plan.g1.grid.n == plan.g2.grid.n);
  CHECK_FALSE(plan.calibrated);

  std::size_t peak = 0;
  for (std::size_t i = 0; i < plan.g1.grid.n; ++i)
    if (std::abs(plan.g1.g[i]) > std::abs(plan.g1.g[peak])) peak = i;
  CHECK(std::abs(plan.g1.grid.t(peak) + 0.5 * h.t_ab) < 0.5);

  double mirror_err = 0.0;
  for (std::size_t i = 0; i < plan.g1.grid.n; ++i)
    mirror_err = std::max(
        mirror_err,
        std::abs(plan.g2.g[i] -
                 std::conj(plan.g1.g[plan.g1.grid.n - 1 - i])));
  CHECK(mirror_err < 1e-14 * kappa);

  SECTION("window too short for the flight time") {
    ScenarioConfig tight = cfg;
    tight.protocol.window = 10.0;
    LinkHandle ht = build_link(tight, kappa);
    CHECK_THROWS_AS(plan_strategy(ht, tight, Strategy::ideal_sech),
                    config_error);
  }
}

TEST_CASE("memory-corrected emission beats the bare markov design") {
  ScenarioConfig cfg = flat_cfg();
  cfg.protocol.kind = ProtocolKind::emission;
  cfg.protocol.steps = 1200;
  ResultRecord orange =
      run_point(cfg, cfg.node.kappa_mhz, Strategy::markov_corrected);
  ResultRecord green =
      run_point(cfg, cfg.node.kappa_mhz, Strategy::nonmarkov_corrected);

  REQUIRE(orange.feasible);
  REQUIRE(green.feasible);
  CHECK(green.calibrated);
  CHECK_FALSE(orange.calibrated);
  CHECK(std::abs(green.estimated.non_markov) > 1e-3);
  CHECK(orange.f_pulse > 0.9);
  CHECK(green.f_pulse > orange.f_pulse);
  CHECK(green.norm_drift < 1e-9);
  CHECK(orange.note.empty());
}

TEST_CASE("transfer run produces matched records and optional dumps") {
  TempDir dir("qlink_scn_single");
  ScenarioConfig cfg = chirped_cfg(0.0015);
  cfg.protocol.strategies = {Strategy::ideal_sech, Strategy::markov_corrected};
  cfg.protocol.steps = 600;
  cfg.outputs.controls = true;
  cfg.outputs.trajectory = true;
  cfg.outputs.modes = true;

  std::vector<ResultRecord> recs = run_scenario(cfg, dir.str());
  REQUIRE(recs.size() == 2);
  for (const ResultRecord& r : recs) {
    CHECK(r.feasible);
    CHECK(r.kind == ProtocolKind::transfer);
    CHECK(r.f_transfer > 0.5);
    CHECK(r.infidelity == Catch::Approx(1.0 - r.f_transfer));
    CHECK(r.distortion == Catch::Approx(build_link(cfg, r.kappa).d_link));
    CHECK(r.d_max > 0.0);
  }
  CHECK(recs[1].f_transfer > recs[0].f_transfer);

  CHECK(fs::exists(dir.p / "results.csv"));
  CHECK(fs::exists(dir.p / "results_meta.json"));
  CHECK(fs::exists(dir.p / "chirp_test_200MHz_ideal_sech_control_emit.csv"));
  CHECK(fs::exists(dir.p /
                   "chirp_test_200MHz_markov_corrected_control_catch.csv"));
  CHECK(fs::exists(dir.p / "chirp_test_200MHz_ideal_sech_trajectory.csv"));
  CHECK(fs::exists(dir.p / "chirp_test_200MHz_ideal_sech_modes.csv"));

  const std::string meta = slurp((dir.p / "results_meta.json").string());
  nlohmann::json j = nlohmann::json::parse(meta);
  CHECK(j.at("config").at("id") == "chirp_test");
  CHECK(j.at("records").size() == 2);
  CHECK(j.at("records").at(0).at("wall_ms").get<double>() > 0.0);

  const std::string table = slurp((dir.p / "results.csv").string());
  CHECK(table.find("wall") == std::string::npos);
  CHECK(table.find("ideal_sech") != std::string::npos);
}

TEST_CASE("single-point sweep matches the direct run byte for byte") {
  TempDir da("qlink_scn_a"), db("qlink_scn_b"), dc("qlink_scn_c");
  ScenarioConfig cfg = chirped_cfg(0.0015);
  cfg.protocol.strategies = {Strategy::markov_corrected};
  cfg.protocol.steps = 500;
  cfg.sweep.kappa_mhz = {200.0};

  std::vector<ResultRecord> direct = run_scenario(cfg, da.str());
  std::vector<ResultRecord> swept = sweep_kappa(cfg, db.str());
  REQUIRE(direct.size() == 1);
  REQUIRE(swept.size() == 1);
  CHECK(direct[0].f_transfer == swept[0].f_transfer);
  CHECK(direct[0].norm_drift == swept[0].norm_drift);
  CHECK(slurp(da.str() + "/results.csv") == slurp(db.str() + "/results.csv"));

  cfg.sweep.kappa_mhz = {150.0, 200.0};
  std::vector<ResultRecord> one = sweep_kappa(cfg, dc.str(), 1);
  const std::string table_one = slurp(dc.str() + "/results.csv");
  std::vector<ResultRecord> two = sweep_kappa(cfg, dc.str(), 2);
  const std::string table_two = slurp(dc.str() + "/results.csv");
  REQUIRE(one.size() == 2);
  CHECK(one[0].kappa_mhz == 150.0);
  CHECK(one[1].kappa_mhz == 200.0);
  CHECK(table_one == table_two);
  for (std::size_t i = 0; i < one.size(); ++i)
    CHECK(one[i].f_transfer == two[i].f_transfer);
  CHECK(fs::exists(dc.p / "points" /
                   "chirp_test_150MHz_markov_corrected.csv"));
}

TEST_CASE("uncorrectable distortion is flagged rather than fatal") {
  ScenarioConfig cfg = chirped_cfg(0.0005);
  cfg.link.n_modes = 361;
  cfg.protocol.share = 1.0;
  cfg.protocol.window = 60.0;
  cfg.protocol.steps = 400;
  cfg.protocol.strategies = {Strategy::markov_corrected};
  cfg.sweep.kappa_mhz = {400.0};

  LinkHandle h = build_link(cfg, kappa_from_mhz(400.0));
  REQUIRE(h.d_link >
          max_correctable_distortion(kappa_from_mhz(400.0),
                                     DmaxMethod::closed_form));
  std::vector<ResultRecord> recs = sweep_kappa(cfg);
  REQUIRE(recs.size() == 1);
  CHECK_FALSE(recs[0].feasible);
  CHECK(recs[0].infidelity == 1.0);
  CHECK_FALSE(recs[0].note.empty());
}

TEST_CASE("calibration report recovers the decay rate and writes the panel") {
  TempDir dir("qlink_scn_cal");
  ScenarioConfig cfg = flat_cfg();
  CalibrationReport rep = calibration_report(cfg, dir.str());
  const double kappa = kappa_from_mhz(cfg.node.kappa_mhz);
  CHECK(rep.estimate.params.kappa ==
        Catch::Approx(kappa).epsilon(0.05));
  CHECK(std::abs(rep.estimate.params.lamb_shift) < 0.05 * kappa);
  CHECK(rep.estimate.n_samples > 100);

  const std::string panel = slurp((dir.p / "calibration.csv").string());
  std::size_t lines = 0;
  for (char ch : panel)
    if (ch == '\n') ++lines;
  CHECK(lines == cfg.protocol.calibration.steps + 2);
  CHECK(panel.rfind("t,re_2gamma_over_kappa_c", 0) == 0);
}

TEST_CASE("csv helpers format and quote deterministically") {
  CHECK(fmt17(0.1) == "0.10000000000000001");
  CHECK(fmt17(200.0) == "200");
  CHECK(detail::quote_csv("plain") == "\"plain\"");
  CHECK(detail::quote_csv("a,\"b\"") == "\"a,\"\"b\"\"\"");

  TempDir dir("qlink_scn_csv");
  ResultRecord r;
  r.scenario_id = "x";
  r.note = "population left [0, 1], check \"share\"";
  write_results_csv(dir.str() + "/r.csv", {r});
  const std::string body = slurp(dir.str() + "/r.csv");
  CHECK(body.find("\"population left [0, 1], check \"\"share\"\"\"") !=
        std::string::npos);
}
