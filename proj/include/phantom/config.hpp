#pragma once

// Scenario configuration: an INI file with [section] key = value lines, SI
// units in the key names. Every key has a default; unknown keys are rejected.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phantom/atom_field_coupling.hpp"
#include "phantom/dynamics.hpp"
#include "phantom/loss_model.hpp"

namespace phantom {

using KeyValues = std::map<std::string, std::string>;

/// Every recognised key with its default value.
const KeyValues& default_key_values();

/// Defaults overlaid with the file's entries.
KeyValues load_config_file(const std::string& path);

/// Applies "section.key=value".
void apply_override(KeyValues& kv, const std::string& assignment);
void set_value(KeyValues& kv, const std::string& key, const std::string& value);

struct OptimizerSettings {
  enum class Mode { automatic, on, off };
  Mode mode = Mode::automatic;  // automatic: optimize when pulses.Omega0_rad_s is 0
  int grid = 9;
  int max_evals = 400;
  double simplex_tol = 1e-4;
  double dwell_tolerance = 1e-4;
  bool independent_omegas = false;
  bool free_detuning = true;
  double omega_min_per_Delta = 0.02;
  double omega_max_per_Delta = 1.0;
  double detuning_halfwidth = 0.0;  // rad/s, 0 selects the default
};

struct SweepAxis {
  std::string key;
  std::vector<double> values;
};

struct FigureSettings {
  double fig1_n_halfwidth = 100;
  double fig2_L_min = 1e-3, fig2_L_max = 10.0;
  int fig2_points = 9;
  double T_long_per_kappa = 40.0;
  double fig3_gamma_min = 1e5, fig3_gamma_max = 1e9;
  int fig3_points = 9;
  double fig4_gamma_min = 1e4, fig4_gamma_max = 1e8;
  int fig4_points = 5;
  std::vector<double> fig4_L_set{0.01, 1.0, 8.0};
};

struct ScenarioConfig {
  KeyValues source;
  SystemParams system;
  double T_per_kappa = 20.0;
  double tau_per_T = 1.2;
  LossConvention convention = LossConvention::half;
  DynamicsOptions dynamics;
  OptimizerSettings optimizer;
  bool check_convergence = true;
  double convergence_tol = 1e-4;
  long n_reference = 0;
  std::optional<SweepAxis> sweep;
  FigureSettings figure;

  bool wants_optimization() const;
};

/// Validates and resolves all fields; derived quantities (kappa_c, pulse
/// widths, atom positions) are recomputed from the primitive keys. Errors
/// name the offending key.
ScenarioConfig parse_config(const KeyValues& kv);

/// Log- or linearly spaced points, inclusive of both ends.
std::vector<double> spaced(double from, double to, int points, bool log);

}  // namespace phantom
