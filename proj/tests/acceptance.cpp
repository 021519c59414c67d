// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "phantom/experiments.hpp"
#include "phantom/mirror_optics.hpp"

using namespace phantom;
using cx = std::complex<double>;

namespace {

constexpr double pi = std::numbers::pi;
int failures = 0;

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

// Runs the configured scenario; failures are reported and yield nullopt.
struct Outcome {
  bool ok = false;
  RunReport r;
  std::string error;
};

Outcome run(std::initializer_list<std::pair<std::string, std::string>> settings) {
  Outcome o;
  try {
    KeyValues kv = default_key_values();
    for (const auto& [k, v] : settings) set_value(kv, k, v);
    o.r = run_single(parse_config(kv));
    o.ok = true;
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  return o;
}

std::string summary(const Outcome& o) {
  if (!o.ok) return "error: " + o.error;
  return "P=" + fmt(o.r.P, 8) + " R=" + fmt(o.r.R, 4) + " P1=" + fmt(o.r.P1, 8) +
         " modes=" + std::to_string(o.r.mode_count) + (o.r.converged ? "" : " unconverged");
}

double T_for(double L) {
  return figure_T_per_kappa(parse_config(default_key_values()), L);
}

void identities() {
  const SystemParams p = default_system();
  report("identities.t2", std::fabs(p.t2() / 1.6e-5 - 1) < 1e-3, "|t|^2 = " + fmt(p.t2()));
  const double k2pi = p.kappa_c() / (2 * pi);
  report("identities.kappa_c", std::fabs(k2pi / 38e6 - 1) < 0.01, "kappa_c/2pi = " + fmt(k2pi) + " Hz");
  SystemParams q = p;
  q.gamma_c = 2e-6 * kSpeedOfLight / (2 * q.l);
  const double ratio = q.kappa_c() / q.gamma_c;
  report("identities.kappa_over_gamma_c", std::fabs(ratio / 8 - 1) < 1e-3, "kappa_c/gamma_c = " + fmt(ratio));
  report("identities.L_eff", std::fabs(p.L_eff() / 0.625 - 1) < 1e-3 && std::fabs(p.L_eff() - 0.6) < 0.05,
         "L_eff = " + fmt(p.L_eff()) + " m");
}

RunReport lossless_transfer() {
  const auto t0 = std::chrono::steady_clock::now();
  const Outcome o = run({});
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report("lossless_transfer.L_0.01", o.ok && o.r.P >= 0.99 && o.r.converged,
         summary(o) + ", Omega0=" + fmt(o.r.Omega0_A) + " rad/s, detuning=" + fmt(o.r.detuning) + " rad/s");
  report("lossless_transfer.runtime", o.ok && wall < 60, fmt(wall, 3) + " s");
  return o.r;
}

Outcome dwell_run(double L) {
  return run({{"geometry.L_m", fmt(L, 17)}, {"pulses.T_per_kappa", fmt(T_for(L), 17)}});
}

void dwell_ratio() {
  const Outcome a = dwell_run(0.01);
  report("dwell_ratio.L_0.01", a.ok && a.r.converged && a.r.R < 0.5, summary(a));
  const Outcome b = dwell_run(5.0);
  report("dwell_ratio.L_5", b.ok && b.r.converged && b.r.R >= 0.8 && b.r.R <= 1.3,
         summary(b) + ", T=" + fmt(T_for(5.0)) + "/kappa_c");
  const std::vector<double> Ls = spaced(0.2, 2.0, 5, true);
  bool inc = true;
  double prev = -1.0;
  std::string d;
  for (double L : Ls) {
    const Outcome o = dwell_run(L);
    const double R = o.ok ? o.r.R : std::nan("");
    inc = inc && o.ok && o.r.converged && R > prev;
    prev = R;
    d += (d.empty() ? "" : ", ") + std::string("L=") + fmt(L, 4) + " R=" + (o.ok ? fmt(R, 4) : o.error);
  }
  report("dwell_ratio.increasing_0.2_to_2", inc, d);
}

void cavity_loss() {
  const Outcome cav = run({{"loss.gamma_c_per_s", "3e7"}});
  const Outcome nb = run({{"loss.gamma_c_per_s", "3e7"}, {"laser.selector", "neighbor"}});
  const double P1 = cav.ok ? cav.r.P1 : 0.0;
  report("cavity_loss.P1", cav.ok && std::fabs(P1 - 0.790) < 1e-3, "P1 = " + fmt(P1, 8));
  report("cavity_loss.cavity_like_above_P1", cav.ok && cav.r.P > P1 + 1e-3, "cavity-like " + summary(cav));
  report("cavity_loss.neighbor_above_cavity_like", nb.ok && cav.ok && nb.r.P > cav.r.P + 1e-3,
         "neighbor " + summary(nb) + "; cavity-like P=" + fmt(cav.r.P, 8));
}

void intermediate() {
  for (double L : {0.01, 8.0}) {
    for (double g : spaced(1e5, 1e7, 3, true)) {
      const Outcome o = run({{"geometry.L_m", fmt(L, 17)},
                             {"pulses.T_per_kappa", fmt(T_for(L), 17)},
                             {"loss.gamma_c_per_s", fmt(g, 17)},
                             {"loss.gamma_f_per_s", fmt(g, 17)}});
      const std::string name = "intermediate.L_" + fmt(L) + ".gamma_" + fmt(g, 3);
      if (L < 1.0) {
        report(name + ".P_above_P1", o.ok && o.r.converged && o.r.P > o.r.P1 + 1e-3,
               summary(o) + ", margin " + fmt(o.r.P - o.r.P1, 3));
      } else {
        const double dl = o.ok ? std::fabs(std::log10(o.r.P) - std::log10(o.r.P1)) : 1.0;
        report(name + ".on_P1", o.ok && o.r.converged && dl < 0.05,
               summary(o) + ", |dlog10| = " + fmt(dl, 3));
      }
    }
  }
}

void fiber_no_gain() {
  for (double gf : {1e6, 1e7, 1e8}) {
    const Outcome o = run({{"loss.gamma_f_per_s", fmt(gf, 17)}});
    const double bound = std::exp(-gf * (o.ok ? o.r.fiber_length : 0.01) / kSpeedOfLight);
    report("fiber_no_gain.gamma_f_" + fmt(gf, 3), o.ok && o.r.P <= bound + 1e-3,
           summary(o) + ", exp(-gamma_f L/c) = " + fmt(bound, 8));
  }
}

// --- property suites -------------------------------------------------------

double carrier_k() { return default_system().carrier_k(); }

Geometry geometry(double L) {
  SystemParams p = default_system();
  p.L = L;
  p.fiber_tuning = FiberTuning::nominal;
  return p.geometry();
}

void mirror_unitarity() {
  double worst = 0.0;
  const double k = carrier_k();
  for (double muk : {1e-3, 0.5, 2.0, 50.0, 500.0, 1e5}) {
    const MirrorModel m{muk / k};
    worst = std::max(worst, std::fabs(std::norm(mirror_t(m, k)) + std::norm(mirror_r(m, k)) - 1));
    for (double L : {1e-5, 0.01, 8.0}) {
      const CompositeScattering s = composite_tr(m, k, L);
      worst = std::max(worst, std::fabs(std::norm(s.T) + std::norm(s.R) - 1));
    }
  }
  report("property.mirror_unitarity", worst < 1e-10, "max ||t|^2 + |r|^2 - 1| = " + fmt(worst, 3));
}

void orthonormality() {
  const Geometry g = geometry(1e-4);
  const double kc = carrier_k(), fsr = g.free_spectral_range();
  const ModeTable t = find_modes(g, {kc - 11 * fsr, kc + 11 * fsr}, ParitySelection::both);
  std::size_t c = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].cavity_fraction > t[c].cavity_fraction) c = i;
  const std::size_t first = std::min(c >= 20 ? c - 20 : 0, t.size() - 40);
  std::vector<Mode> modes(t.modes.begin() + long(first), t.modes.begin() + long(first) + 40);
  using GL = boost::math::quadrature::gauss<double, 20>;
  const double Z = g.Z(), kmax = double(modes.back().k);
  const double edges[] = {-Z, -g.L / 2, g.L / 2, Z};
  std::vector<double> z, w;
  for (int r = 0; r < 3; ++r) {
    const int panels = std::max(1, int(std::ceil((edges[r + 1] - edges[r]) * kmax / 2)));
    const double h = (edges[r + 1] - edges[r]) / panels;
    for (int p = 0; p < panels; ++p) {
      const double mid = edges[r] + (p + 0.5) * h;
      for (std::size_t q = 0; q < GL::abscissa().size(); ++q) {
        const double x = GL::abscissa()[q], wq = GL::weights()[q] * h / 2;
        z.push_back(mid + x * h / 2);
        w.push_back(wq);
        if (x != 0.0) {
          z.push_back(mid - x * h / 2);
          w.push_back(wq);
        }
      }
    }
  }
  std::vector<std::vector<double>> V(modes.size(), std::vector<double>(z.size()));
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t q = 0; q < z.size(); ++q) V[i][q] = mode_function(g, modes[i], z[q]);
  double plain = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    for (std::size_t j = i; j < modes.size(); ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < z.size(); ++q) s += w[q] * V[i][q] * V[j][q];
      const double dev = std::fabs(s - (i == j ? 1.0 : 0.0));
      plain = std::max(plain, dev);
      if (i != j) {
        const double sheets = g.mu * (mode_function(g, modes[i], -g.L / 2) * mode_function(g, modes[j], -g.L / 2) +
                                      mode_function(g, modes[i], g.L / 2) * mode_function(g, modes[j], g.L / 2));
        weighted = std::max(weighted, std::fabs(s + sheets));
      }
    }
  }
  report("property.mode_orthonormality", plain < 1e-6,
         "40 modes at L=1e-4 m: max |<Vi,Vj> - delta_ij| = " + fmt(plain, 3) +
             "; off-diagonal with the sheet weight = " + fmt(weighted, 3));
}

void quadrature_norms() {
  double worst = 0.0;
  for (double L : {1e-3, 1e-2}) {
    const Geometry g = geometry(L);
    const double kc = carrier_k(), fsr = g.free_spectral_range();
    const ModeTable t = find_modes(g, {kc - 3 * fsr, kc + 3 * fsr}, ParitySelection::both);
    for (const auto& m : t) {
      const double k = double(m.k);
      auto V2 = [&](double x) {
        const double v = mode_function(g, m, x);
        return v * v;
      };
      auto integrate = [&](double a, double b) {
        const int panels = std::max(1, int(std::ceil((b - a) * k / pi)));
        const double h = (b - a) / panels;
        double s = 0.0;
        for (int i = 0; i < panels; ++i)
          s += boost::math::quadrature::gauss<double, 20>::integrate(V2, a + i * h, a + (i + 1) * h);
        return s;
      };
      const double cav = integrate(-g.Z(), -g.L / 2), fib = integrate(-g.L / 2, g.L / 2);
      worst = std::max({worst, std::fabs(cav / (m.N_c / m.N) - 1), std::fabs(fib / (m.N_f / m.N) - 1)});
    }
  }
  report("property.closed_form_norms", worst < 1e-8, "max relative deviation " + fmt(worst, 3));
}

struct Fixed {
  SystemParams p;
  ScenarioModes modes;
  double omega_L = 0.0;
};

Fixed fixed_point(double gc, double gf, double scale = 1.0) {
  Fixed f;
  f.p = default_system();
  f.p.gamma_c = gc;
  f.p.gamma_f = gf;
  f.p.pulses.Omega0_A = f.p.pulses.Omega0_B = f.p.atom_A.Delta;
  f.modes = prepare_modes(f.p, 0.0, 0.0, scale);
  f.omega_L = kSpeedOfLight * f.modes.k_selected;
  return f;
}

void norm_properties() {
  const Fixed a = fixed_point(0.0, 0.0);
  const Trajectory tr = integrate(a.p, a.modes.table, nullptr, a.omega_L, {});
  double drift = 0.0;
  for (const auto& s : tr.samples) drift = std::max(drift, std::fabs(s.p_atom_A + s.p_field + s.p_atom_B - 1));
  report("property.lossless_norm_conservation", drift < 1e-8 && !tr.hit_cap,
         "max drift " + fmt(drift, 3) + " over " + std::to_string(tr.samples.size()) + " samples");

  const Fixed b = fixed_point(3e7, 1e6);
  const LossMatrix loss = build_loss(b.modes.table, {3e7, 1e6});
  const Trajectory lt = integrate(b.p, b.modes.table, &loss, b.omega_L, {});
  double prev = 1.0, worst_rise = 0.0;
  for (const auto& s : lt.samples) {
    const double n = s.p_atom_A + s.p_field + s.p_atom_B;
    worst_rise = std::max(worst_rise, n - prev);
    prev = n;
  }
  report("property.lossy_norm_monotone", worst_rise <= 1e-12,
         "largest increase between samples " + fmt(worst_rise, 3) + ", final norm " + fmt(prev, 8));
}

CoupledModel frozen_model(std::size_t n, double gc, double gf, std::mt19937& rng, LossMatrix& loss) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), f(0.05, 0.95);
  CoupledModel m;
  m.kappa_c = 1e8;
  m.Delta_A = m.Delta_B = 2 * pi * 500e6;
  m.lossy = gc > 0.0 || gf > 0.0;
  m.gamma_c = loss.gamma_c = gc;
  m.gamma_f = loss.gamma_f = gf;
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = f(rng);
    const Parity p = i % 2 ? Parity::odd : Parity::even;
    m.delta.push_back(2e8 * u(rng));
    m.gA.push_back(1e8 * u(rng));
    m.gB.push_back(1e8 * u(rng));
    m.s.push_back(std::sqrt(fi));
    m.parity.push_back(p);
    loss.gamma.push_back(fi * gc + (1 - fi) * gf);
    loss.s.push_back(m.s.back());
    loss.parity.push_back(p);
  }
  if (m.lossy) m.gamma = loss.gamma;
  return m;
}

Eigen::VectorXcd pack(const AmplitudeState& s) {
  const auto n = Eigen::Index(s.c010.size());
  Eigen::VectorXcd v(n + 2);
  v(0) = s.c100;
  for (Eigen::Index i = 0; i < n; ++i) v(i + 1) = s.c010[std::size_t(i)];
  v(n + 1) = s.c001;
  return v;
}

void frozen_oracles() {
  DynamicsOptions tight;
  tight.rtol = 1e-11;
  tight.atol = 1e-13;

  // Three levels: c001 = (cos(sqrt2 G t) - 1) / 2.
  std::mt19937 rng(3);
  LossMatrix none;
  CoupledModel one = frozen_model(1, 0.0, 0.0, rng, none);
  one.delta = {0.0};
  const double G = 2 * pi * 10e6;
  AmplitudeState s0;
  s0.c010 = {0.0};
  const AmplitudeState s = propagate_frozen(one, {G}, {G}, s0, pi / (std::sqrt(2.0) * G), tight);
  report("property.three_level_oracle", std::fabs(std::norm(s.c001) - 1) < 1e-6,
         "|c001|^2 at pi/(sqrt2 G) = " + fmt(std::norm(s.c001), 12));

  double worst = 0.0;
  for (auto conv : {LossConvention::half, LossConvention::full}) {
    for (auto [gc, gf] : {std::pair{0.0, 0.0}, std::pair{3e7, 1e6}, std::pair{1e6, 5e7}}) {
      std::mt19937 r(11);
      LossMatrix loss;
      const CoupledModel m = frozen_model(5, gc, gf, r, loss);
      std::normal_distribution<double> g;
      AmplitudeState a;
      a.c100 = {g(r), g(r)};
      a.c001 = {g(r), g(r)};
      for (int i = 0; i < 5; ++i) a.c010.emplace_back(g(r), g(r));
      const double nrm = std::sqrt(a.norm());
      a.c100 /= nrm;
      a.c001 /= nrm;
      for (auto& c : a.c010) c /= nrm;
      Eigen::MatrixXcd M(7, 7);
      for (Eigen::Index k = 0; k < 7; ++k) {
        AmplitudeState e;
        e.c100 = 0.0;
        e.c010.assign(5, 0.0);
        if (k == 0) e.c100 = 1.0;
        else if (k == 6) e.c001 = 1.0;
        else e.c010[std::size_t(k - 1)] = 1.0;
        M.col(k) = pack(rhs(e, m.gA, m.gB, m.delta, m.lossy ? &loss : nullptr, conv));
      }
      DynamicsOptions o = tight;
      o.convention = conv;
      const double dt = 4e-8;
      const Eigen::VectorXcd expect = (M * dt).exp() * pack(a);
      const AmplitudeState b = propagate_frozen(m, m.gA, m.gB, a, dt, o);
      worst = std::max(worst, (pack(b) - expect).cwiseAbs().maxCoeff());
    }
  }
  report("property.matrix_exponential_oracle", worst < 1e-8, "5 modes, max amplitude error " + fmt(worst, 3));
}

void window_doubling(const RunReport& lossless) {
  report("property.window_doubling.lossless", lossless.convergence_checked && lossless.window_delta_P < 1e-4,
         "|dP| = " + fmt(lossless.window_delta_P, 3) + " at the optimized point");
  const Fixed a = fixed_point(3e7, 1e6, 1.0), b = fixed_point(3e7, 1e6, 2.0);
  const LossMatrix la = build_loss(a.modes.table, {3e7, 1e6}), lb = build_loss(b.modes.table, {3e7, 1e6});
  const double Pa = transfer_probability(integrate(a.p, a.modes.table, &la, a.omega_L, {}));
  const double Pb = transfer_probability(integrate(b.p, b.modes.table, &lb, b.omega_L, {}));
  report("property.window_doubling.lossy", std::fabs(Pa - Pb) < 1e-4,
         std::to_string(a.modes.table.size()) + " -> " + std::to_string(b.modes.table.size()) +
             " modes, |dP| = " + fmt(std::fabs(Pa - Pb), 3));
}

void equal_rates_no_cross_coupling() {
  const Fixed a = fixed_point(0.0, 0.0);
  bool zero = true;
  for (double g : {1e4, 3e7, 1e9}) {
    const LossMatrix m = build_loss(a.modes.table, {g, g});
    zero = zero && !m.cross_coupled();
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = 0; j < m.size(); ++j) zero = zero && m.C(i, j) == cx(0.0, 0.0);
  }
  report("property.equal_rates_C_zero", zero, std::to_string(a.modes.table.size()) + " modes, 3 rates");
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    identities();
    const RunReport lossless = lossless_transfer();
    dwell_ratio();
    cavity_loss();
    intermediate();
    fiber_no_gain();
    mirror_unitarity();
    orthonormality();
    quadrature_norms();
    norm_properties();
    frozen_oracles();
    window_doubling(lossless);
    equal_rates_no_cross_coupling();
  } catch (const std::exception& e) {
    report("acceptance.aborted", false, e.what());
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d failing criteria, %.1f s\n", failures, wall);
  return failures == 0 ? 0 : 1;
}
