#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "flybatt/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"flying-battery mission simulator"};
  app.require_subcommand(1);

  flybatt::RunOptions run;
  std::string run_out;
  std::optional<std::uint64_t> run_seed;
  std::optional<double> run_duration;
  auto* run_cmd = app.add_subcommand("run", "fly a scenario and write telemetry and a summary");
  run_cmd->add_option("--scenario", run.scenario, "scenario file or bundled name")->required();
  run_cmd->add_option("--out", run_out, "output directory (default: $FLYBATT_OUT_DIR or .)");
  run_cmd->add_option("--seed", run_seed, "override the scenario seed");
  run_cmd->add_option("--duration", run_duration, "override the simulated-time cap (s)");

  flybatt::AnalyzeOptions analyze;
  std::optional<double> observed;
  auto* analyze_cmd = app.add_subcommand("analyze", "hover endurance versus battery mass fraction");
  analyze_cmd->add_option("--m0", analyze.m0, "mass without battery (kg)")->capture_default_str();
  analyze_cmd->add_option("--phi", analyze.phi, "battery mass fraction")->capture_default_str();
  analyze_cmd->add_option("--gamma", analyze.gamma, "pack energy density (Wh/kg)")->capture_default_str();
  analyze_cmd->add_option("--kp", analyze.k_p, "powertrain constant (W/kg^1.5)")->capture_default_str();
  analyze_cmd->add_option("--observed", observed, "observed flight time at phi (s), for calibration");
  analyze_cmd->add_option("--curve", analyze.curve_csv, "write the normalized curve to this CSV");

  flybatt::SweepOptions sweep;
  std::string sweep_out;
  std::optional<std::uint64_t> sweep_seed;
  auto* sweep_cmd = app.add_subcommand("sweep", "run one mission per parameter value");
  sweep_cmd->add_option("--scenario", sweep.scenario, "scenario file or bundled name")->required();
  sweep_cmd->add_option("--param", sweep.parameter, "scenario key, e.g. docking.contact_failure_probability")
      ->required();
  sweep_cmd->add_option("--range", sweep.range, "values: a,b,c or lo:hi:count")->required();
  sweep_cmd->add_option("--out", sweep_out, "output directory (default: $FLYBATT_OUT_DIR or .)");
  sweep_cmd->add_option("--seed", sweep_seed, "override the scenario seed");
  sweep_cmd->add_option("--threads", sweep.threads, "worker threads (0: one per core)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : flybatt::kExitConfig;
  }

  if (*run_cmd) {
    run.out_dir = run_out;
    run.seed = run_seed;
    run.duration = run_duration;
    return flybatt::cmd_run(run, std::cout, std::cerr);
  }
  if (*analyze_cmd) {
    analyze.observed_time = observed;
    return flybatt::cmd_analyze(analyze, std::cout, std::cerr);
  }
  sweep.out_dir = sweep_out;
  sweep.seed = sweep_seed;
  return flybatt::cmd_sweep(sweep, std::cout, std::cerr);
}
