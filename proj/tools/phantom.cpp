// phantom: command-line front end for the cavity-fiber-cavity simulator.
//
//   phantom run --config scenario.ini --out results/
//   phantom sweep --set sweep.variable=geometry.L_m --set sweep.values=0.01,0.1,1
//   phantom figure 3 --out fig3/

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "phantom/errors.hpp"
#include "phantom/experiments.hpp"

using namespace phantom;

namespace {

void print_report(const RunReport& r) {
  const double two_pi = 2 * std::numbers::pi;
  std::printf("kappa_c/2pi     %.6g Hz\n", r.kappa_c / two_pi);
  std::printf("|t|^2           %.6g\n", r.t2);
  std::printf("L_eff           %.6g m\n", r.L_eff);
  std::printf("F_c             %.6g\n", r.F_c);
  std::printf("fiber length    %.10g m\n", r.fiber_length);
  std::printf("modes           %zu\n", r.mode_count);
  std::printf("Omega0 A, B     %.6g, %.6g rad/s\n", r.Omega0_A, r.Omega0_B);
  std::printf("detuning        %.6g rad/s (%.4g kappa_c)\n", r.detuning, r.detuning / r.kappa_c);
  std::printf("G_max/2pi       %.6g Hz\n", r.G_max / two_pi);
  std::printf("P               %.10g\n", r.P);
  std::printf("R               %.6g\n", r.R);
  std::printf("P1              %.10g\n", r.P1);
  if (r.convergence_checked)
    std::printf("converged       %s (window doubling dP = %.3g)\n", r.converged ? "yes" : "no",
                r.window_delta_P);
  else
    std::printf("converged       %s (window check skipped)\n", r.converged ? "yes" : "no");
  if (r.evaluations) std::printf("evaluations     %ld\n", r.evaluations);
  std::printf("wall time       %.3f s\n", r.wall_seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-state transfer between two cavities joined by a fiber"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", convention;
  std::vector<std::string> overrides;
  double modes_window = -1.0;
  app.add_option("--config", config_path, "INI scenario file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--set", overrides, "override, section.key=value")->take_all();
  app.add_option("--modes-window", modes_window, "mode window half-width (rad/s)");
  app.add_option("--loss-convention", convention, "loss amplitude convention")
      ->check(CLI::IsMember({"half", "full"}));

  auto* modes = app.add_subcommand("modes", "solve the mode spectrum, write modes.csv");
  auto* run = app.add_subcommand("run", "single scenario run");
  auto* sweep = app.add_subcommand("sweep", "sweep one configuration key");
  auto* optimize = app.add_subcommand("optimize", "optimize Omega0 and detuning, then run");
  auto* figure = app.add_subcommand("figure", "figure pipeline");
  for (auto* sub : {modes, run, sweep, optimize, figure}) sub->fallthrough();
  int figure_id = 0;
  figure->add_option("id", figure_id, "figure number")->required()->check(CLI::Range(1, 4));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    KeyValues kv = config_path.empty() ? default_key_values() : load_config_file(config_path);
    for (const auto& o : overrides) apply_override(kv, o);
    if (modes_window >= 0.0) set_value(kv, "modes.window_rad_s", std::to_string(modes_window));
    if (!convention.empty()) set_value(kv, "loss.convention", convention);
    if (*optimize) set_value(kv, "optimizer.enabled", "true");
    const ScenarioConfig cfg = parse_config(kv);

    if (*modes) {
      const ModeTable t = run_modes(cfg, out_dir);
      std::printf("%zu modes written to %s/modes.csv\n", t.size(), out_dir.c_str());
    } else if (*run || *optimize) {
      const RunReport r = run_single(cfg, out_dir);
      print_report(r);
      if (!r.converged) std::fprintf(stderr, "warning: run did not meet the convergence check\n");
    } else if (*sweep) {
      const auto rows = run_sweep(cfg, out_dir);
      long failed = 0;
      for (const auto& row : rows) {
        if (row.ok)
          std::printf("%-14.6g P=%.8f R=%.4g P1=%.8f modes=%zu%s\n", row.value, row.report.P,
                      row.report.R, row.report.P1, row.report.mode_count,
                      row.report.converged ? "" : " (unconverged)");
        else
          std::printf("%-14.6g failed: %s\n", row.value, row.error.c_str()), ++failed;
      }
      std::printf("%zu points, %ld failed, written to %s/sweep.csv\n", rows.size(), failed,
                  out_dir.c_str());
    } else if (*figure) {
      const FigureResult res = run_figure(figure_id, cfg, out_dir);
      for (const auto& a : res.assertions)
        std::printf("%s %s: %s\n", a.pass ? "PASS" : "FAIL", a.name.c_str(), a.detail.c_str());
      for (const auto& f : res.files) std::printf("wrote %s/%s\n", out_dir.c_str(), f.c_str());
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
