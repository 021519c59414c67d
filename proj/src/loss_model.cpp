#include "phantom/loss_model.hpp"

#include <algorithm>
#include <cmath>

#include "phantom/errors.hpp"

namespace phantom {

std::complex<double> LossMatrix::C(std::size_t i, std::size_t j) const {
  if (i >= size() || j >= size()) throw ValidationError("loss matrix index out of range");
  if (i == j || parity[i] != parity[j]) return {0.0, 0.0};
  return {0.0, (gamma_f - gamma_c) * (s[i] * s[j])};
}

LossMatrix build_loss(const ModeTable& modes, const LossParams& params) {
  if (!(params.gamma_c >= 0.0) || !(params.gamma_f >= 0.0))
    throw ValidationError("loss rates must be non-negative");
  LossMatrix m;
  m.gamma_c = params.gamma_c;
  m.gamma_f = params.gamma_f;
  m.gamma.reserve(modes.size());
  m.s.reserve(modes.size());
  m.parity.reserve(modes.size());
  for (const auto& mode : modes) {
    const double f = std::clamp(mode.cavity_fraction, 0.0, 1.0);
    m.gamma.push_back(params.gamma_c == params.gamma_f
                          ? params.gamma_c
                          : f * params.gamma_c + (1.0 - f) * params.gamma_f);
    m.s.push_back(std::sqrt(f));
    m.parity.push_back(mode.parity);
  }
  return m;
}

}  // namespace phantom
