#pragma once

// Per-mode decay rates and same-parity cross couplings from cavity and fiber
// absorption.

#include <complex>
#include <vector>

#include "phantom/mode_solver.hpp"

namespace phantom {

struct LossParams {
  double gamma_c = 0.0;  // 1/s
  double gamma_f = 0.0;  // 1/s
};

/// Population-rate convention of the mode decay.
///   half: amplitudes decay at gamma/2, populations at gamma
///   full: amplitudes decay at gamma
enum class LossConvention { half, full };

inline double amplitude_factor(LossConvention c) { return c == LossConvention::half ? 0.5 : 1.0; }

/// gamma_i = f_i gamma_c + (1 - f_i) gamma_f and, for same-parity i != j,
/// C_ij = i (gamma_f - gamma_c) sqrt(f_i f_j), f the cavity fraction.
///
/// C is rank one per parity, so it is kept in factored form:
/// C_ij = i (gamma_f - gamma_c) s_i s_j with s_i = sqrt(f_i).
struct LossMatrix {
  std::vector<double> gamma;   // 1/s
  std::vector<double> s;       // sqrt(cavity_fraction)
  std::vector<Parity> parity;
  double gamma_c = 0.0;
  double gamma_f = 0.0;

  std::size_t size() const { return gamma.size(); }
  /// Dense entry, zero on the diagonal and across parities.
  std::complex<double> C(std::size_t i, std::size_t j) const;
  bool cross_coupled() const { return gamma_c != gamma_f; }
};

LossMatrix build_loss(const ModeTable& modes, const LossParams& params);

}  // namespace phantom
