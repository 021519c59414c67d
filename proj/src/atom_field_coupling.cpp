#include "phantom/atom_field_coupling.hpp"

#include <cmath>

#include "phantom/errors.hpp"

namespace phantom {

double PulseSchedule::t_peak(Side side) const {
  if (side == Side::B) return t_peak_B;
  return ordering == PulseOrdering::delayed_A ? t_peak_B + tau - transit
                                              : t_peak_B + transit - tau;
}

double SystemParams::carrier_k() const {
  if (!(lambda > 0.0) || !(l > 0.0) || !(mu_k > 0.0))
    throw ValidationError("carrier: lambda, l and mu_k must be positive");
  const double k0 = 2 * std::numbers::pi / lambda;
  const double m = std::max(1.0, std::round(k0 * l / std::numbers::pi));
  return (m * std::numbers::pi + std::atan(1.0 / mu_k)) / l;
}

double SystemParams::fiber_length() const {
  if (!(L > 0.0)) throw ValidationError("fiber length L must be positive");
  if (fiber_tuning == FiberTuning::nominal) return L;
  // Full transmission of the section at k L = m pi + atan(2 / (mu k)).
  const double k = carrier_k();
  const double pi = std::numbers::pi;
  const double target = std::atan(2.0 / mu_k);
  double d = std::remainder(target - k * L, pi);
  double tuned = L + d / k;
  if (tuned <= 0.0) tuned += pi / k;
  return tuned;
}

double SystemParams::t2() const { return 4.0 / (4.0 + mu_k * mu_k); }

double antinode_position(double l, double k) {
  const double pi = std::numbers::pi;
  const double j = std::round((k * l / 2 - pi / 2) / pi);
  double s = (pi / 2 + j * pi) / k;
  if (s <= 0.0) s += pi / k;
  if (s >= l) s -= pi / k;
  if (!(s > 0.0 && s < l)) throw ValidationError("cavity too short to hold an antinode");
  return s;
}

void refresh_derived(SystemParams& p) {
  const double k = p.carrier_k();
  p.atom_A.s = antinode_position(p.l, k);
  p.atom_B.s = p.atom_A.s;
  p.atom_A.side = Side::A;
  p.atom_B.side = Side::B;
  p.pulses.transit = p.fiber_length() / kSpeedOfLight;
}

SystemParams default_system() {
  SystemParams p;
  refresh_derived(p);
  const double kappa = p.kappa_c();
  p.pulses.T = 20.0 / kappa;
  p.pulses.tau = 1.2 * p.pulses.T;
  p.pulses.t_peak_B = 0.0;
  p.pulses.Omega0_A = 0.0;
  p.pulses.Omega0_B = 0.0;
  return p;
}

double coupling_g(const Mode& mode, const AtomParams& atom, double l) {
  if (!(l > 0.0)) throw ValidationError("coupling: cavity length must be positive");
  if (!(atom.s > 0.0 && atom.s < l)) throw ValidationError("coupling: atom outside its cavity");
  if (!(mode.N > 0.0)) throw ValidationError("coupling: mode has no norm");
  const double sigma = (atom.side == Side::B && mode.parity == Parity::odd) ? -1.0 : 1.0;
  const double k = double(mode.k);
  return atom.g_max * std::sqrt(2 * l) * sigma * std::sin(k * atom.s) / std::sqrt(mode.N);
}

double effective_G(double g, double Omega, double Delta) {
  if (Delta == 0.0) throw ValidationError("effective coupling: Delta must be non-zero");
  return g * Omega / (2 * Delta);
}

double effective_G(const Mode& mode, const AtomParams& atom, double l, double Omega) {
  return effective_G(coupling_g(mode, atom, l), Omega, atom.Delta);
}

double stark_shift(double Omega, double Delta) {
  if (Delta == 0.0) throw ValidationError("Stark shift: Delta must be non-zero");
  return Omega * Omega / (4 * Delta);
}

double pulse_value(const PulseSchedule& schedule, Side side, double t) {
  if (!(schedule.T > 0.0)) throw ValidationError("pulse width T must be positive");
  const double x = (t - schedule.t_peak(side)) / schedule.T;
  return schedule.Omega0(side) * std::exp(-x * x);
}

double mode_detuning(const Mode& mode, double omega_L) {
  return omega_L - kSpeedOfLight * double(mode.k);
}

}  // namespace phantom
