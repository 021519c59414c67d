#pragma once

// Normal modes of the closed cavity-fiber-cavity box: perfect mirrors at
// z = +-Z, thin-sheet mirrors at z = +-L/2, Z = L/2 + l.

#include <complex>
#include <string>
#include <vector>

#include "phantom/mirror_optics.hpp"

namespace phantom {

enum class Parity { even, odd };

inline int parity_sign(Parity p) { return p == Parity::even ? 1 : -1; }
inline const char* parity_name(Parity p) { return p == Parity::even ? "even" : "odd"; }

struct Geometry {
  double l = 0.0;   // cavity length (m)
  double L = 0.0;   // fiber length (m)
  double mu = 0.0;  // sheet parameter (m)

  double Z() const { return 0.5 * L + l; }
  MirrorModel mirror() const { return {mu}; }
  /// Same-parity mode spacing in wavenumber, pi / Z.
  double free_spectral_range() const;
};

struct Mode {
  long double k = 0.0L;  // extended precision keeps the phase residual below 1e-9 rad for L ~ 10 m
  Parity parity = Parity::even;
  long index_n = 0;  // round(k L / pi) - reference
  double n = 0.0;    // k L / pi - reference, the non-rounded axis value
  double N_c = 0.0;  // single-cavity norm contribution (m)
  double N_f = 0.0;  // fiber norm contribution (m)
  double N = 0.0;    // 2 N_c + N_f (m)
  double cavity_fraction = 0.0;
  double residual = 0.0;  // |mode-condition phase| at k (rad)

  double fiber_fraction() const { return N_f / N; }
};

struct KWindow {
  double k_min = 0.0;
  double k_max = 0.0;
};

enum class ParitySelection { even, odd, both };

struct ModeTable {
  std::vector<Mode> modes;  // ascending k
  KWindow window;
  Geometry geometry;
  long n_reference = 0;

  std::size_t size() const { return modes.size(); }
  bool empty() const { return modes.empty(); }
  const Mode& operator[](std::size_t i) const { return modes[i]; }
  auto begin() const { return modes.begin(); }
  auto end() const { return modes.end(); }
};

/// Branch-tracked mode-condition phase of the given parity. It is twice the
/// Pruefer angle at z = 0 of the field that vanishes at z = -Z (minus pi for
/// even parity), so it is continuous, strictly increasing in k, and the modes
/// sit exactly at its zeros mod 2 pi.
double characteristic_phase(const Geometry& geom, Parity parity, double k);
long double characteristic_phase_ext(const Geometry& geom, Parity parity, long double k);

/// The two-sheet form of the mode condition, -exp(-2ikl) / (+-T - R) with
/// (T, R) from composite_tr; equal to 1 on a mode. Throws NumericalError if
/// |+-T - R| departs from 1 by more than 1e-6.
std::complex<double> mode_condition_ratio(const Geometry& geom, Parity parity, double k);

/// All mode wavenumbers of the selected parity inside the window.
ModeTable find_modes(const Geometry& geom, KWindow window, ParitySelection parity,
                     long n_reference = 0);

struct NormFactors {
  double N_c = 0.0;
  double N_f = 0.0;
  bool modal = false;  // k solves the mode condition to within 1e-6 rad
};

/// Closed-form cavity and fiber norm contributions of the mode function with
/// cavity amplitude 2 sin[k(z + Z)]:
///   N_c = 2l - sin(2kl)/k
///   N_f = 2 [L +- sin(kL)/k] |t|^2 / |1 +- r exp(ikL)|^2
/// Also evaluated for non-modal k, where it traces the Airy envelope.
NormFactors norm_factors(const Geometry& geom, long double k, Parity parity);

/// Normalized mode function V(z) on [-Z, Z].
double mode_function(const Geometry& geom, const Mode& mode, double z);

/// Builds a Mode record (norms, fractions, residual) for a given root.
Mode make_mode(const Geometry& geom, long double k, Parity parity, long n_reference);

/// Writes modes.csv: n, parity, k_per_m, N_c_m, N_f_m, cavity_fraction.
void write_modes_csv(const std::string& path, const ModeTable& table);

}  // namespace phantom
