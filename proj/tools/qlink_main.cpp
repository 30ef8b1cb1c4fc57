// Command-line front end: pulse synthesis, emission and transfer runs,
// kappa sweeps and feasibility scans driven by JSON scenario configs.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qlink/csvio.hpp"
#include "qlink/scenario.hpp"
#include "qlink/units.hpp"

namespace {

using namespace qlink;

void print_records(const std::vector<ResultRecord>& recs) {
  for (const ResultRecord& r : recs) {
    std::printf(
        "%s kappa/2pi=%g MHz %s %s", r.scenario_id.c_str(), r.kappa_mhz,
        strategy_name(r.strategy), kind_name(r.kind));
    if (!r.feasible) {
      std::printf(" INFEASIBLE D=%.4g D_max=%.4g share=%.3g note=%s\n",
                  r.distortion, r.d_max, r.share, r.note.c_str());
      continue;
    }
    if (r.kind == ProtocolKind::transfer)
      std::printf(" F_transfer=%.9g", r.f_transfer);
    else
      std::printf(" F_pulse=%.9g", r.f_pulse);
    std::printf(" 1-F=%.4g drift=%.3g", r.infidelity, r.norm_drift);
    if (r.half_step_delta > 0.0)
      std::printf(" dF_half=%.3g", r.half_step_delta);
    if (r.calibrated)
      std::printf(" est: dw=%.4g |N|=%.4g", r.estimated.lamb_shift,
                  std::abs(r.estimated.non_markov));
    std::printf("\n");
  }
}

int run_pulse(const ScenarioConfig& cfg, const std::string& out,
              const std::string& strategy_override) {
  Strategy strat = strategy_override.empty()
                       ? cfg.protocol.strategies.front()
                       : parse_strategy(strategy_override);
  LinkHandle h = build_link(cfg, kappa_from_mhz(cfg.node.kappa_mhz));
  StrategyPlan plan = plan_strategy(h, cfg, strat);
  std::filesystem::create_directories(out);
  write_control_csv(out + "/control_emit.csv", plan.g1);
  std::printf("%s: wrote %s/control_emit.csv (%zu samples)\n",
              strategy_name(strat), out.c_str(), plan.g1.grid.n);
  if (cfg.protocol.kind == ProtocolKind::transfer) {
    write_control_csv(out + "/control_catch.csv", plan.g2);
    std::printf("%s: wrote %s/control_catch.csv (%zu samples)\n",
                strategy_name(strat), out.c_str(), plan.g2.grid.n);
  }
  if (plan.calibrated)
    std::printf("calibration: dw=%.6g rad/ns  N=%.6g%+.6gi\n",
                plan.estimated.lamb_shift, plan.estimated.non_markov.real(),
                plan.estimated.non_markov.imag());
  return 0;
}

int run_emit(ScenarioConfig cfg, const std::string& out) {
  cfg.protocol.kind = ProtocolKind::emission;
  CalibrationReport rep = calibration_report(cfg, out);
  std::printf(
      "pilot estimate: kappa=%.6g rad/ns (%.6g MHz)  dw=%.6g rad/ns  "
      "N=%.6g%+.6gi  (%zu samples)\n",
      rep.estimate.params.kappa, kappa_to_mhz(rep.estimate.params.kappa),
      rep.estimate.params.lamb_shift, rep.estimate.params.non_markov.real(),
      rep.estimate.params.non_markov.imag(), rep.estimate.n_samples);
  print_records(run_scenario(cfg, out));
  return 0;
}

int run_dmax(const ScenarioConfig& cfg, const std::string& out) {
  std::vector<double> grid = cfg.sweep.kappa_mhz;
  if (grid.empty()) grid.push_back(cfg.node.kappa_mhz);
  std::string rows = "kappa_mhz,kappa,d_max_scan,d_max_closed\n";
  for (double mhz : grid) {
    const double kappa = kappa_from_mhz(mhz);
    const double scan = max_correctable_distortion(kappa, DmaxMethod::scan);
    const double closed =
        max_correctable_distortion(kappa, DmaxMethod::closed_form);
    rows += fmt17(mhz) + "," + fmt17(kappa) + "," + fmt17(scan) + "," +
            fmt17(closed) + "\n";
    std::printf("kappa/2pi=%g MHz: D_max(scan)=%.6g ns^2  "
                "D_max(closed)=%.6g ns^2  ratio=%.4f\n",
                mhz, scan, closed, scan / closed);
  }
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    auto f = detail::open_csv(out + "/dmax.csv");
    f << rows;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Control pulse design and exact verification for photon links"};
  app.require_subcommand(1);

  std::string config_path, out_dir, strategy_override;
  std::size_t steps_override = 0, workers = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "scenario config (JSON)")
        ->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--steps", steps_override,
                    "override protocol step count");
  };

  CLI::App* s_pulse = app.add_subcommand(
      "pulse", "synthesize the control(s) for one strategy and dump as CSV");
  add_common(s_pulse);
  s_pulse->add_option("--strategy", strategy_override,
                      "ideal_sech | markov_corrected | nonmarkov_corrected");

  CLI::App* s_emit = app.add_subcommand(
      "emit", "single-node emission: calibration report plus fidelity records");
  add_common(s_emit);

  CLI::App* s_transfer =
      app.add_subcommand("transfer", "full two-node transfer protocol");
  add_common(s_transfer);

  CLI::App* s_sweep =
      app.add_subcommand("sweep", "run every configured kappa and strategy");
  add_common(s_sweep);
  s_sweep->add_option("--workers", workers, "concurrent sweep points");

  CLI::App* s_dmax = app.add_subcommand(
      "dmax", "scan the correctable-distortion bound over the kappa grid");
  add_common(s_dmax);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    qlink::ScenarioConfig cfg = qlink::ScenarioConfig::load(config_path);
    if (steps_override > 0) cfg.protocol.steps = steps_override;
    cfg.validate();

    if (*s_pulse) return run_pulse(cfg, out_dir.empty() ? "." : out_dir,
                                   strategy_override);
    if (*s_emit) return run_emit(cfg, out_dir);
    if (*s_transfer) {
      cfg.protocol.kind = qlink::ProtocolKind::transfer;
      print_records(qlink::run_scenario(cfg, out_dir));
      return 0;
    }
    if (*s_sweep) {
      print_records(qlink::sweep_kappa(cfg, out_dir, workers));
      return 0;
    }
    if (*s_dmax) return run_dmax(cfg, out_dir);
    return 2;
  } catch (const qlink::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
