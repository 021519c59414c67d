#pragma once

// Scenario execution: single runs, sweeps and the figure pipelines.

#include <functional>
#include <string>
#include <vector>

#include "phantom/config.hpp"
#include "phantom/csv.hpp"
#include "phantom/optimizer.hpp"

namespace phantom {

struct RunReport {
  // derived from the primitive config fields
  double kappa_c = 0.0;  // rad/s
  double t2 = 0.0;
  double L_eff = 0.0;  // m
  double F_c = 0.0;
  double fiber_length = 0.0;  // m, after tuning
  double T = 0.0, tau = 0.0;  // s

  double k_selected = 0.0;
  double selected_cavity_fraction = 0.0;
  double Omega0_A = 0.0, Omega0_B = 0.0;  // rad/s
  double detuning = 0.0;                  // rad/s from the selected mode
  double G_max = 0.0;                     // |g_sel| Omega0_A / (2 Delta), rad/s

  std::size_t mode_count = 0;
  bool converged = false;  // window doubling moved P by less than the tolerance
  bool convergence_checked = false;
  double window_delta_P = 0.0;
  bool hit_cap = false;

  double P = 0.0, R = 0.0, P1 = 0.0;
  double final_norm = 0.0;
  long evaluations = 0;
  long steps = 0;
  std::string kernel;
  double wall_seconds = 0.0;
};

/// Mode solve, loss build, optional optimization, integration, report.
/// With a non-empty out_dir, writes trajectory.csv, modes.csv, report.txt
/// and, when optimized, optimizer_trace.csv.
RunReport run_single(const ScenarioConfig& config, const std::string& out_dir = {});

void write_report(const std::string& path, const RunReport& report);

/// modes.csv for the scenario's mode window.
ModeTable run_modes(const ScenarioConfig& config, const std::string& out_dir);

struct SweepRow {
  double value = 0.0;
  bool ok = false;
  std::string error;
  double T_per_kappa = 0.0;
  RunReport report;
};

/// Rows in axis order; a failing point is recorded and the sweep continues.
/// Writes sweep.csv when out_dir is non-empty.
std::vector<SweepRow> run_sweep(const ScenarioConfig& config, const std::string& out_dir = {});

/// Runs kv with key set to each value. Each point is re-parsed, so derived
/// quantities follow the swept key. adapt(kv, value) may set further keys.
std::vector<SweepRow> sweep_points(
    const KeyValues& kv, const std::string& key, const std::vector<double>& values,
    const std::string& csv_path,
    const std::function<void(KeyValues&, double)>& adapt = nullptr);

/// Axis, P, R, P1, mode_count, converged, then auxiliary columns.
void write_sweep_header(csv::Writer& w, const std::string& axis);
void write_sweep_row(csv::Writer& w, const SweepRow& row);

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct FigureResult {
  std::vector<std::string> files;
  std::vector<Assertion> assertions;
};

/// Figure pipelines 1-4; writes the CSVs and assertions.txt to out_dir.
FigureResult run_figure(int figure, const ScenarioConfig& config, const std::string& out_dir);

void write_assertions(const std::string& path, const std::vector<Assertion>& assertions);

/// Pulse width in kappa_c^-1 for the figure pipelines: the configured value
/// up to L_eff, the long value beyond it.
double figure_T_per_kappa(const ScenarioConfig& config, double L);

}  // namespace phantom
