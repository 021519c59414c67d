#include "phantom/mode_solver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "phantom/csv.hpp"
#include "phantom/errors.hpp"

namespace phantom {

namespace {

// k L reaches 1e8 rad for the longest fibers; the phase is evaluated in
// extended precision.
using ld = long double;
constexpr ld kPi = 3.141592653589793238462643383279502884L;
constexpr ld kTwoPi = 2 * kPi;

void validate(const Geometry& g) {
  if (!(g.l > 0.0)) throw ValidationError("geometry: cavity length l must be positive");
  if (!(g.L > 0.0)) throw ValidationError("geometry: fiber length L must be positive");
  if (!(g.mu >= 0.0)) throw ValidationError("geometry: mirror parameter mu must be non-negative");
}

// Pruefer angle theta with (psi, psi'/k) = rho (sin theta, cos theta), for the
// solution starting at psi(-Z) = 0, followed to z = 0. Free propagation adds
// k d; the sheet shears psi'/k by -k mu psi and keeps the sign of psi, so the
// lifted angle stays in the same half-turn.
ld pruefer_angle(const Geometry& g, ld k) {
  const ld theta = k * ld(g.l);
  const ld q = std::floor(theta / kPi);
  const ld beta = theta - q * kPi;
  const ld s = std::sin(beta), c = std::cos(beta);
  const ld sheared = std::atan2(s, c - k * ld(g.mu) * s);
  return q * kPi + sheared + k * ld(g.L) / 2;
}

ld phase_of(const Geometry& g, Parity p, ld k) {
  // even: psi'(0) = 0  <=>  theta = pi/2 mod pi
  // odd:  psi(0) = 0   <=>  theta = 0 mod pi
  return 2 * pruefer_angle(g, k) - (p == Parity::even ? kPi : ld(0));
}

ld bisect_phase(const Geometry& g, Parity p, ld a, ld b, ld target) {
  for (int it = 0; it < 256; ++it) {
    const ld mid = 0.5L * (a + b);
    if (mid <= a || mid >= b) break;
    if (phase_of(g, p, mid) < target)
      a = mid;
    else
      b = mid;
  }
  const ld ra = std::fabs(phase_of(g, p, a) - target);
  const ld rb = std::fabs(phase_of(g, p, b) - target);
  return ra <= rb ? a : b;
}

std::vector<Mode> roots_for_parity(const Geometry& g, Parity p, KWindow w, long n_ref) {
  const ld kmin = w.k_min, kmax = w.k_max;
  const ld lo = phase_of(g, p, kmin), hi = phase_of(g, p, kmax);
  const auto m_first = static_cast<long long>(std::ceil(lo / kTwoPi));
  const auto m_last = static_cast<long long>(std::floor(hi / kTwoPi));
  std::vector<Mode> modes;
  if (m_last < m_first) return modes;
  modes.reserve(static_cast<std::size_t>(m_last - m_first + 1));
  // The phase is monotone, so each multiple of 2 pi in range is exactly one
  // root; brackets shrink as roots are found in order.
  ld left = kmin;
  for (long long m = m_first; m <= m_last; ++m) {
    const ld target = kTwoPi * ld(m);
    const ld root = bisect_phase(g, p, left, kmax, target);
    modes.push_back(make_mode(g, root, p, n_ref));
    left = root;
  }
  return modes;
}

// Flags a spacing jump that is not explained by a cavity resonance nearby.
void check_missed_roots(const std::vector<Mode>& modes) {
  if (modes.size() < 4) return;
  std::vector<double> fr;
  fr.reserve(modes.size());
  for (const auto& m : modes) fr.push_back(m.cavity_fraction);
  std::nth_element(fr.begin(), fr.begin() + fr.size() / 2, fr.end());
  const double median = fr[fr.size() / 2];
  for (std::size_t i = 0; i + 2 < modes.size(); ++i) {
    const double s1 = double(modes[i + 1].k - modes[i].k);
    const double s2 = double(modes[i + 2].k - modes[i + 1].k);
    const double ratio = std::max(s1, s2) / std::min(s1, s2);
    if (ratio <= 1.5) continue;
    double fmax = 0.0;
    for (std::size_t j = (i > 0 ? i - 1 : 0); j < std::min(i + 4, modes.size()); ++j)
      fmax = std::max(fmax, modes[j].cavity_fraction);
    if (fmax > 0.05 || fmax > 4.0 * median) continue;
    throw NumericalError("suspected missed root near k = " +
                         std::to_string(double(modes[i + 1].k)) + " (adjacent spacings differ by " +
                         std::to_string(ratio) + "x)");
  }
}

}  // namespace

double Geometry::free_spectral_range() const { return M_PI / Z(); }

long double characteristic_phase_ext(const Geometry& geom, Parity parity, long double k) {
  validate(geom);
  if (!(k > 0)) throw ValidationError("characteristic_phase: k must be positive");
  return phase_of(geom, parity, k);
}

double characteristic_phase(const Geometry& geom, Parity parity, double k) {
  return double(characteristic_phase_ext(geom, parity, k));
}

std::complex<double> mode_condition_ratio(const Geometry& geom, Parity parity, double k_in) {
  validate(geom);
  if (!(k_in > 0.0)) throw ValidationError("mode_condition_ratio: k must be positive");
  const ld k = k_in;
  const auto m = detail::sheet_pair<ld>(ld(geom.mu), k, ld(geom.L));
  const auto [T, R] = detail::scattering_from_transfer(m);
  const std::complex<ld> D = ld(parity_sign(parity)) * T - R;
  const ld mag = std::abs(D);
  if (std::fabs(mag - 1) > 1e-6L) {
    throw NumericalError("mode condition: |+-T - R| = " + std::to_string(double(mag)) +
                         " is not unimodular");
  }
  const std::complex<ld> q = -std::polar<ld>(1, -2 * k * ld(geom.l)) / D;
  return {double(q.real()), double(q.imag())};
}

NormFactors norm_factors(const Geometry& geom, long double k, Parity parity) {
  validate(geom);
  if (!(k > 0)) throw ValidationError("norm_factors: k must be positive");
  const ld l = geom.l, L = geom.L, mu = geom.mu;
  const ld sigma = parity_sign(parity);
  const std::complex<ld> t = ld(2) / std::complex<ld>(2, -mu * k);
  const std::complex<ld> r = ld(1) - t;
  const ld N_c = 2 * l - std::sin(2 * k * l) / k;
  const ld airy = std::norm(t) / std::norm(ld(1) + sigma * r * std::polar<ld>(1, k * L));
  const ld N_f = 2 * (L + sigma * std::sin(k * L) / k) * airy;
  const ld ph = phase_of(geom, parity, k);
  const bool modal = std::fabs(ph - kTwoPi * std::nearbyint(ph / kTwoPi)) < 1e-6L;
  return {double(N_c), double(N_f), modal};
}

Mode make_mode(const Geometry& geom, long double k, Parity parity, long n_reference) {
  const auto nf = norm_factors(geom, k, parity);
  Mode m;
  m.k = k;
  m.parity = parity;
  const ld kl_pi = k * ld(geom.L) / kPi;
  m.index_n = std::lround(double(kl_pi)) - n_reference;
  m.n = double(kl_pi - ld(n_reference));
  m.N_c = nf.N_c;
  m.N_f = nf.N_f;
  m.N = 2.0 * nf.N_c + nf.N_f;
  m.cavity_fraction = 2.0 * nf.N_c / m.N;
  const ld ph = phase_of(geom, parity, k);
  m.residual = double(std::fabs(ph - kTwoPi * std::nearbyint(ph / kTwoPi)));
  return m;
}

ModeTable find_modes(const Geometry& geom, KWindow window, ParitySelection parity,
                     long n_reference) {
  validate(geom);
  if (!(window.k_min > 0.0) || !(window.k_max > window.k_min))
    throw ValidationError("find_modes: need 0 < k_min < k_max");
  if (window.k_max - window.k_min < geom.free_spectral_range())
    throw ValidationError("find_modes: window is narrower than one free spectral range");

  ModeTable table;
  table.window = window;
  table.geometry = geom;
  table.n_reference = n_reference;
  for (Parity p : {Parity::even, Parity::odd}) {
    if (parity == ParitySelection::even && p != Parity::even) continue;
    if (parity == ParitySelection::odd && p != Parity::odd) continue;
    auto modes = roots_for_parity(geom, p, window, n_reference);
    check_missed_roots(modes);
    table.modes.insert(table.modes.end(), modes.begin(), modes.end());
  }
  std::sort(table.modes.begin(), table.modes.end(),
            [](const Mode& a, const Mode& b) { return a.k < b.k; });
  return table;
}

double mode_function(const Geometry& geom, const Mode& mode, double z_in) {
  const ld Z = geom.Z();
  const ld tol = 1e-12L * Z;
  if (ld(z_in) < -Z - tol || ld(z_in) > Z + tol)
    throw ValidationError("mode_function: z outside [-Z, Z]");
  const ld sigma = parity_sign(mode.parity);
  ld z = z_in;
  ld sign = 1;
  if (z > 0) {
    z = -z;
    sign = sigma;
  }
  const ld k = mode.k, l = geom.l, L = geom.L;
  const ld A = 2 / std::sqrt(ld(mode.N));
  if (z <= -L / 2) return double(sign * A * std::sin(k * (z + Z)));
  // Continue (psi, psi'/k) through the sheet at -L/2 into the fiber.
  const ld psi0 = A * std::sin(k * l);
  const ld dpsi0 = A * std::cos(k * l) - k * ld(geom.mu) * psi0;
  const ld u = z + L / 2;
  return double(sign * (psi0 * std::cos(k * u) + dpsi0 * std::sin(k * u)));
}

void write_modes_csv(const std::string& path, const ModeTable& table) {
  csv::Writer w(path);
  w.row({"n", "parity", "k_per_m", "N_c_m", "N_f_m", "cavity_fraction"});
  for (const auto& m : table.modes) {
    w.row({csv::num(m.n), parity_name(m.parity), csv::num(double(m.k)), csv::num(m.N_c),
           csv::num(m.N_f), csv::num(m.cavity_fraction)});
  }
}

}  // namespace phantom
