#pragma once

// Atom-mode couplings, effective two-photon couplings, Gaussian pulses and the
// physical scenario record.

#include <cmath>
#include <numbers>

#include "phantom/mode_solver.hpp"

namespace phantom {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

enum class Side { A, B };

struct AtomParams {
  double s = 0.0;      // distance from the cavity's perfect end mirror (m)
  double g_max = 0.0;  // peak coupling to a pure single-cavity mode (rad/s)
  double Delta = 0.0;  // laser detuning from the excited state (rad/s)
  Side side = Side::A;
};

/// Peak-time relation between the two pulses.
///   delayed_A: A peaks tau - L/c after B (receiving pulse first for L < c tau)
///   literal:   A peaks L/c - tau after B
enum class PulseOrdering { delayed_A, literal };

struct PulseSchedule {
  double Omega0_A = 0.0;  // rad/s
  double Omega0_B = 0.0;  // rad/s
  double T = 0.0;         // Gaussian width, Omega0 exp(-t^2/T^2) (s)
  double tau = 0.0;       // effective delay (s)
  double t_peak_B = 0.0;  // s
  double transit = 0.0;   // L/c (s)
  bool phase_compensation = true;
  PulseOrdering ordering = PulseOrdering::delayed_A;

  double t_peak(Side side) const;
  double Omega0(Side side) const { return side == Side::A ? Omega0_A : Omega0_B; }
};

/// Which mode the laser is tuned to before the detuning offset is applied.
struct ModeSelector {
  enum class Kind { most_cavity_like, neighbor_same_parity, explicit_index };
  Kind kind = Kind::most_cavity_like;
  long index = 0;  // position in the ModeTable for explicit_index
};

/// nominal: the fiber length is used as given.
/// resonant: shifted by less than half a wavelength so that the two-sheet
/// fiber section transmits fully at the carrier.
enum class FiberTuning { nominal, resonant };

struct SystemParams {
  double lambda = 852e-9;  // nominal wavelength (m)
  double l = 1e-5;         // cavity length (m)
  double L = 0.01;         // nominal fiber length (m)
  FiberTuning fiber_tuning = FiberTuning::resonant;
  double mu_k = 500.0;     // dimensionless mirror strength at the carrier
  double gamma_c = 0.0;    // 1/s
  double gamma_f = 0.0;    // 1/s
  double laser_detuning_offset = 0.0;  // omega_L - c k_selected (rad/s)
  double mode_window = 0.0;            // half-width in rad/s; 0 selects 200 kappa_c
  ModeSelector selector;
  AtomParams atom_A{0.0, 2 * std::numbers::pi * 100e6, 2 * std::numbers::pi * 500e6, Side::A};
  AtomParams atom_B{0.0, 2 * std::numbers::pi * 100e6, 2 * std::numbers::pi * 500e6, Side::B};
  PulseSchedule pulses;

  /// Cavity resonance nearest 2 pi / lambda, k l = m pi + atan(1 / mu_k).
  double carrier_k() const;
  double mu() const { return mu_k / carrier_k(); }
  /// Fiber length after tuning.
  double fiber_length() const;
  Geometry geometry() const { return {l, fiber_length(), mu()}; }
  /// |t|^2 at the carrier.
  double t2() const;
  double kappa_c() const { return kSpeedOfLight * t2() / (2 * l); }
  double L_eff() const { return l / t2(); }
  double F_c() const { return kappa_c() / (kappa_c() + gamma_c); }
};

/// Default operating point: lossless, L = 1 cm, T = 20 / kappa_c, tau = 1.2 T,
/// atoms at the cavity antinode nearest l/2, pulses not yet set (Omega0 = 0).
SystemParams default_system();

/// Atom position at the antinode of the carrier nearest the cavity center.
double antinode_position(double l, double k);

/// Recomputes the derived parts of the schedule (transit, atom positions)
/// after L, l or the mirror strength changed.
void refresh_derived(SystemParams& p);

/// g = g_max sqrt(2l) sigma sin(k s) / sqrt(N); sigma is -1 only for atom B
/// on odd modes.
double coupling_g(const Mode& mode, const AtomParams& atom, double l);

double effective_G(double g, double Omega, double Delta);
double effective_G(const Mode& mode, const AtomParams& atom, double l, double Omega);

/// Omega^2 / (4 Delta).
double stark_shift(double Omega, double Delta);

double pulse_value(const PulseSchedule& schedule, Side side, double t);

/// omega_L - c k.
double mode_detuning(const Mode& mode, double omega_L);

}  // namespace phantom
