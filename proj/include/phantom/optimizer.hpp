#pragma once

// Laser amplitude and detuning optimization of the transfer probability.

#include <functional>
#include <string>
#include <vector>

#include "phantom/atom_field_coupling.hpp"
#include "phantom/dynamics.hpp"
#include "phantom/mode_solver.hpp"

namespace phantom {

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
  double span() const { return hi - lo; }
};

/// Index of the selected mode. neighbor_same_parity is the next mode of the
/// same parity above the most cavity-like one.
std::size_t resolve_mode_index(const ModeTable& modes, const ModeSelector& selector);
const Mode& resolve_mode_selector(const ModeTable& modes, const ModeSelector& selector);

/// Mode set for a scenario: the selector is resolved in a window around the
/// carrier, then modes are collected within the rate window of every laser
/// frequency in [c k_sel + det_lo, c k_sel + det_hi].
struct ScenarioModes {
  ModeTable table;
  double k_selected = 0.0;
  double spacing = 0.0;      // distance to the nearest other mode (rad/s)
  double half_window = 0.0;  // rate half-window actually used (rad/s)
};

/// Rate half-window in rad/s: mode_window or 200 kappa_c, at least 1.5 free
/// spectral ranges, times scale.
double rate_half_window(const SystemParams& params, double scale = 1.0);

ScenarioModes prepare_modes(const SystemParams& params, double det_lo, double det_hi,
                            double window_scale = 1.0);

struct OptimizationProblem {
  SystemParams base;
  bool free_omega = true;
  bool free_detuning = true;
  bool independent_omegas = false;
  Bounds omega0;    // rad/s
  Bounds detuning;  // offset from the selected mode (rad/s)
  int grid = 9;
  int max_evals = 400;       // refinement budget after the grid
  double simplex_tol = 1e-4; // relative to the bound span
  double window_scale = 1.0;
  /// Lossless problems only: after maximizing P, minimize the dwell ratio R
  /// over points with P >= best P - dwell_tolerance, starting from up to three
  /// grid points and sharing a further max_evals budget. 0 disables.
  double dwell_tolerance = 1e-4;
  DynamicsOptions dynamics;
};

/// Omega0 in [0.02, 1] Delta; detuning within 3 min(spacing, kappa_c) of the
/// selected mode.
OptimizationProblem default_problem(const SystemParams& base);

struct TracePoint {
  long eval = 0;
  double Omega0_A = 0.0, Omega0_B = 0.0, detuning = 0.0;
  double P = 0.0;
  double R = 0.0;  // NaN when undefined
  int stage = 1;   // 1: maximize P, 2: minimize R at near-maximal P
  bool ok = true;
  std::string error;
};

/// best_* is the largest P in the trace; chosen_* the point to run, equal to
/// best_* unless the dwell stage found a point with smaller R.
struct OptimizationResult {
  SystemParams best_params;
  double best_Omega0_A = 0.0, best_Omega0_B = 0.0, best_detuning = 0.0;
  double best_P = 0.0;
  SystemParams chosen_params;
  double chosen_P = 0.0, chosen_R = 0.0;
  bool dwell_stage = false;
  long evaluations = 0;
  std::vector<TracePoint> trace;
};

OptimizationResult optimize_transfer(const OptimizationProblem& problem);

/// Generic bounded maximizer used by optimize_transfer: a grid over the
/// given points, then a simplex refinement from the best one. f may throw;
/// failures count as evaluations and score zero.
struct MaximizeResult {
  std::vector<double> best_x;
  double best_f = 0.0;
  std::vector<std::vector<double>> xs;
  std::vector<double> fs;
  std::vector<std::string> errors;  // empty string on success
};

MaximizeResult maximize(const std::function<double(const std::vector<double>&)>& f,
                        const std::vector<Bounds>& bounds,
                        const std::vector<std::vector<double>>& grid_points, int max_evals,
                        double simplex_tol, double initial_step);

/// optimizer_trace.csv: eval, Omega0_rad_s, detuning_rad_s, P, R, stage
/// [, Omega0_B_rad_s]
void write_optimizer_trace_csv(const std::string& path, const OptimizationResult& result);

}  // namespace phantom
