#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "phantom/mirror_optics.hpp"

using namespace phantom;

namespace {

constexpr double pi = std::numbers::pi;

// Multiple-reflection sum for two sheets with physical amplitudes t and
// rho = -r, truncated once the terms are negligible.
CompositeScattering series_tr(double mu, double k, double L, int terms) {
  const cplx t = mirror_t({mu}, k);
  const cplx rho = -mirror_r({mu}, k);
  const cplx e = std::exp(cplx(0, k * L));
  cplx T = 0.0, Rphys = rho, round = 1.0;
  for (int n = 0; n < terms; ++n) {
    T += t * t * e * round;
    Rphys += t * t * rho * e * e * round;
    round *= rho * rho * e * e;
  }
  return {T, -Rphys, k, L};
}

}  // namespace

TEST_CASE("sheet transmission and reflection follow the thin-sheet formulas") {
  const MirrorModel m{2e-4};
  for (double k : {1.0, 1e3, 7.2e6}) {
    const cplx t = mirror_t(m, k);
    CHECK(std::abs(t - 2.0 / cplx(2.0, -m.mu * k)) < 1e-15);
    CHECK(std::abs(mirror_r(m, k) - (1.0 - t)) < 1e-15);
  }
  CHECK(mirror_t({0.0}, 5.0) == cplx(1.0, 0.0));
  CHECK(mirror_r({0.0}, 5.0) == cplx(0.0, 0.0));
}

TEST_CASE("sheet unitarity holds to 1e-10 over a wide k range") {
  for (double muk : {1e-3, 0.5, 2.0, 50.0, 500.0, 1e5}) {
    const double k = 7.37e6;
    const MirrorModel m{muk / k};
    const cplx t = mirror_t(m, k), r = mirror_r(m, k);
    CHECK(std::norm(t) + std::norm(r) == doctest::Approx(1.0).epsilon(1e-10));
    // Energy conservation also fixes the relative phase of t and r.
    CHECK(std::abs((t * std::conj(r)).real()) < 1e-10);
  }
}

TEST_CASE("mu k = 500 gives |t|^2 = 1.6e-5") {
  const double k = 2 * pi / 852e-9;
  const MirrorModel m{500.0 / k};
  CHECK(std::norm(mirror_t(m, k)) == doctest::Approx(1.6e-5).epsilon(1e-3));
}

TEST_CASE("composite section agrees with the multiple-reflection series") {
  const double k = 3.1e6;
  for (double muk : {0.3, 1.0, 2.0}) {
    for (double L : {1e-6, 3.3e-5, 1.234e-3}) {
      const double mu = muk / k;
      const CompositeScattering closed = composite_tr({mu}, k, L);
      const CompositeScattering series = series_tr(mu, k, L, 400);
      CHECK(std::abs(closed.T - series.T) < 1e-12);
      CHECK(std::abs(closed.R - series.R) < 1e-12);
    }
  }
}

TEST_CASE("composite section is unitary") {
  const double k = 7.37e6;
  for (double muk : {0.1, 10.0, 500.0, 5e4}) {
    for (double L : {1e-5, 0.01, 8.0}) {
      const CompositeScattering s = composite_tr({muk / k}, k, L);
      CHECK(std::norm(s.T) + std::norm(s.R) == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("composite section limits") {
  const double k = 4.0e6;
  const CompositeScattering empty = composite_tr({0.0}, k, 2.5e-4);
  CHECK(std::abs(empty.T - std::exp(cplx(0, k * 2.5e-4))) < 1e-13);
  CHECK(std::abs(empty.R) < 1e-15);

  const double mu = 1.7 / k;
  const CompositeScattering merged = composite_tr({mu}, k, 1e-16);
  CHECK(std::abs(merged.T - mirror_t({2 * mu}, k)) < 1e-9);
  CHECK(std::abs(merged.R - mirror_r({2 * mu}, k)) < 1e-9);
}

TEST_CASE("two-sheet section transmits fully at k L = atan(2 / (mu k)) mod pi") {
  const double k = 7.37e6;
  const double muk = 500.0;
  for (int m : {1, 17, 1000}) {
    const double L = (m * pi + std::atan(2.0 / muk)) / k;
    const CompositeScattering s = composite_tr({muk / k}, k, L);
    CHECK(std::norm(s.T) == doctest::Approx(1.0).epsilon(1e-9));
  }
}
