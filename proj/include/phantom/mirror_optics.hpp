#pragma once

// Thin dielectric sheet mirrors and the two-sheet section that separates the
// cavities from the fiber.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace phantom {

using cplx = std::complex<double>;

/// Thin-sheet mirror of vanishing thickness d and dielectric constant eps,
/// with mu = d * eps held fixed (meters).
struct MirrorModel {
  double mu = 0.0;
};

/// Transmission t(k) = 2 / (2 - i mu k).
cplx mirror_t(const MirrorModel& model, double k);

/// Reflection r(k) = 1 - t(k). This is the sign convention of the reflected
/// amplitude used throughout the project; the physical field reflection of
/// the sheet is -r.
cplx mirror_r(const MirrorModel& model, double k);

/// Two identical sheets at z = -L/2 and z = +L/2.
///
/// T is referenced from the input plane z = -L/2 to the output plane z = +L/2,
/// R is referenced to z = -L/2 and uses the same sign convention as mirror_r,
/// so an empty section gives T = exp(ikL), R = 0 and the L -> 0 limit is a
/// single sheet with parameter 2 mu.
struct CompositeScattering {
  cplx T;
  cplx R;
  double k = 0.0;
  double L = 0.0;
};

CompositeScattering composite_tr(const MirrorModel& model, double k, double L);

namespace detail {

/// Real 2x2 transfer matrix acting on (psi, psi'/k).
template <class Real>
using Transfer = std::array<Real, 4>;  // row-major

template <class Real>
Transfer<Real> mul(const Transfer<Real>& a, const Transfer<Real>& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

/// Free propagation over distance d.
template <class Real>
Transfer<Real> propagation(Real k, Real d) {
  using std::cos;
  using std::sin;
  const Real c = cos(k * d), s = sin(k * d);
  return {c, s, -s, c};
}

/// Crossing a sheet: psi continuous, psi' jumps by -k^2 mu psi.
template <class Real>
Transfer<Real> sheet(Real k, Real mu) {
  return {Real(1), Real(0), -k * mu, Real(1)};
}

/// sheet(+L/2) * propagation(L) * sheet(-L/2)
template <class Real>
Transfer<Real> sheet_pair(Real mu, Real k, Real L) {
  return mul(sheet(k, mu), mul(propagation(k, L), sheet(k, mu)));
}

/// Scattering coefficients of a section with transfer matrix m, in the
/// conventions of CompositeScattering.
template <class Real>
std::pair<std::complex<Real>, std::complex<Real>> scattering_from_transfer(
    const Transfer<Real>& m) {
  using C = std::complex<Real>;
  const C i(0, 1);
  // Left: e^{ikz} + R_phys e^{-ikz}; right: T e^{ikz}.
  const C a = C(m[2]) - i * m[0];
  const C b = C(-m[1]) - i * m[3];
  const C r_phys = (b - a) / (a + b);
  const C t = m[0] * (Real(1) + r_phys) + i * m[1] * (Real(1) - r_phys);
  return {t, -r_phys};
}

}  // namespace detail
}  // namespace phantom
