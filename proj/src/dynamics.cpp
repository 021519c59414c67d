#include "phantom/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "phantom/csv.hpp"
#include "phantom/errors.hpp"

namespace phantom {

using cx = std::complex<double>;

double AmplitudeState::field_population() const {
  double s = 0.0;
  for (const auto& c : c010) s += std::norm(c);
  return s;
}

double AmplitudeState::norm() const { return std::norm(c100) + field_population() + std::norm(c001); }

CoupledModel build_model(const SystemParams& params, const ModeTable& modes, const LossMatrix* loss,
                         double omega_L) {
  if (modes.empty()) throw ValidationError("dynamics: empty mode table");
  if (loss && loss->size() != modes.size())
    throw ValidationError("dynamics: loss matrix and mode table differ in size");
  CoupledModel m;
  m.kappa_c = params.kappa_c();
  m.L = params.fiber_length();
  m.pulses = params.pulses;
  m.Delta_A = params.atom_A.Delta;
  m.Delta_B = params.atom_B.Delta;
  if (m.Delta_A == 0.0 || m.Delta_B == 0.0) throw ValidationError("dynamics: Delta must be non-zero");
  if (!(m.pulses.T > 0.0)) throw ValidationError("dynamics: pulse width must be positive");
  const std::size_t n = modes.size();
  m.delta.resize(n);
  m.gA.resize(n);
  m.gB.resize(n);
  m.s.resize(n);
  m.parity.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Mode& mode = modes[i];
    m.delta[i] = mode_detuning(mode, omega_L);
    m.gA[i] = coupling_g(mode, params.atom_A, params.l);
    m.gB[i] = coupling_g(mode, params.atom_B, params.l);
    m.s[i] = std::sqrt(std::clamp(mode.cavity_fraction, 0.0, 1.0));
    m.parity[i] = mode.parity;
  }
  if (loss) {
    m.lossy = true;
    m.gamma = loss->gamma;
    m.s = loss->s;
    m.gamma_c = loss->gamma_c;
    m.gamma_f = loss->gamma_f;
  }
  return m;
}

AmplitudeState rhs(const AmplitudeState& state, const std::vector<double>& G_A,
                   const std::vector<double>& G_B, const std::vector<double>& delta,
                   const LossMatrix* loss, LossConvention convention) {
  const std::size_t n = state.c010.size();
  if (G_A.size() != n || G_B.size() != n || delta.size() != n || (loss && loss->size() != n))
    throw ValidationError("rhs: dimension mismatch between state and couplings");
  const cx I(0.0, 1.0);
  const double w = amplitude_factor(convention);
  AmplitudeState d;
  d.t = state.t;
  d.c010.assign(n, cx(0.0, 0.0));
  cx sA = 0.0, sB = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sA += G_A[i] * state.c010[i];
    sB += G_B[i] * state.c010[i];
  }
  d.c100 = -I * sA;
  d.c001 = -I * sB;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = loss ? loss->gamma[i] : 0.0;
    cx acc = -(delta[i] + I * w * gi) * state.c010[i];
    if (loss && loss->cross_coupled()) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) acc += w * loss->C(i, j) * state.c010[j];
      }
    }
    acc += G_A[i] * state.c100 + G_B[i] * state.c001;
    d.c010[i] = -I * acc;
  }
  return d;
}

namespace {

// phi_0..phi_3 of a complex argument.
struct Phi {
  cx p0, p1, p2, p3;
};

Phi phi(cx z) {
  if (std::abs(z) < 1.0) {
    // phi_k(z) = sum_n z^n / (n + k)!
    Phi r{std::exp(z), 0.0, 0.0, 0.0};
    cx term = 1.0;
    double fact1 = 1.0, fact2 = 2.0, fact3 = 6.0;
    for (int n = 0; n < 30; ++n) {
      r.p1 += term / fact1;
      r.p2 += term / fact2;
      r.p3 += term / fact3;
      term *= z;
      fact1 *= n + 2;
      fact2 *= n + 3;
      fact3 *= n + 4;
    }
    return r;
  }
  const cx e = std::exp(z);
  const cx p1 = (e - 1.0) / z;
  const cx p2 = (p1 - 1.0) / z;
  const cx p3 = (p2 - 0.5) / z;
  return {e, p1, p2, p3};
}

// Cox-Matthews ETDRK4 weights for one step size, split storage.
struct Coeffs {
  std::vector<double> Er, Ei, E2r, E2i, Qr, Qi, F1r, F1i, F2r, F2i, F3r, F3i;
  cx aE, aE2, aQ, aF1, aF2, aF3;  // atoms (zero linear part)
};

void fill(std::vector<double>& re, std::vector<double>& im, std::size_t i, cx v) {
  re[i] = v.real();
  im[i] = v.imag();
}

Coeffs make_coeffs(const std::vector<cx>& lambda, double h) {
  const std::size_t n = lambda.size();
  Coeffs c;
  for (auto* v : {&c.Er, &c.Ei, &c.E2r, &c.E2i, &c.Qr, &c.Qi, &c.F1r, &c.F1i, &c.F2r, &c.F2i,
                  &c.F3r, &c.F3i})
    v->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const cx z = lambda[i] * h;
    const Phi full = phi(z);
    const Phi half = phi(0.5 * z);
    fill(c.Er, c.Ei, i, full.p0);
    fill(c.E2r, c.E2i, i, half.p0);
    fill(c.Qr, c.Qi, i, 0.5 * h * half.p1);
    fill(c.F1r, c.F1i, i, h * (full.p1 - 3.0 * full.p2 + 4.0 * full.p3));
    fill(c.F2r, c.F2i, i, 2.0 * h * (full.p2 - 2.0 * full.p3));
    fill(c.F3r, c.F3i, i, h * (4.0 * full.p3 - full.p2));
  }
  c.aE = 1.0;
  c.aE2 = 1.0;
  c.aQ = 0.5 * h;
  c.aF1 = h / 6.0;
  c.aF2 = h / 3.0;
  c.aF3 = h / 6.0;
  return c;
}

// Split complex vector.
struct Vec {
  std::vector<double> re, im;
  explicit Vec(std::size_t n = 0) : re(n, 0.0), im(n, 0.0) {}
  simd::CView view() const { return {re.data(), im.data()}; }
  simd::CSpan span() { return {re.data(), im.data()}; }
};

struct State {
  Vec f;
  cx a = 0.0, b = 0.0;  // c100, c001
  explicit State(std::size_t n = 0) : f(n) {}
};

// Time-dependent drive in reduced units: couplings are a(t) pA and b(t) pB,
// the Stark terms shift the two atomic levels.
struct Drive {
  std::function<double(double)> a, b;
  std::function<double(double)> stark_a, stark_b;
};

class Integrator {
 public:
  Integrator(const CoupledModel& m, std::vector<double> pA, std::vector<double> pB, Drive drive,
             const DynamicsOptions& opt)
      : n_(m.size()), pA_(std::move(pA)), pB_(std::move(pB)), drive_(std::move(drive)), opt_(opt),
        k_(simd::select_kernels(opt.isa)) {
    const double kappa = m.kappa_c;
    const double w = amplitude_factor(opt.convention);
    lambda_.resize(n_);
    se_.assign(n_, 0.0);
    so_.assign(n_, 0.0);
    r_.assign(n_, 0.0);
    double wx = 0.0;
    if (m.lossy) wx = w * (m.gamma_c - m.gamma_f) / kappa;
    for (std::size_t i = 0; i < n_; ++i) {
      const double damp = m.lossy ? w * m.gamma[i] / kappa : 0.0;
      lambda_[i] = cx(-damp, m.delta[i] / kappa);
      if (m.lossy && wx != 0.0) {
        (m.parity[i] == Parity::even ? se_ : so_)[i] = m.s[i];
        r_[i] = wx * m.s[i] * m.s[i];
      }
    }
    wx_ = wx;
    prof_ = {pA_.data(), pB_.data(), se_.data(), so_.data(), r_.data()};
    for (auto* v : {&nu_, &na_, &nb_, &nc_, &sa_, &sb_, &sc_}) *v = Vec(n_);
  }

  const char* kernel_name() const { return k_.name; }

  // One ETDRK4 step of size h from (t, y) into out.
  void step(double t, double h, const State& y, State& out) {
    const Coeffs& c = coeffs(h);
    const simd::CView E{c.Er.data(), c.Ei.data()}, E2{c.E2r.data(), c.E2i.data()},
        Q{c.Qr.data(), c.Qi.data()}, F1{c.F1r.data(), c.F1i.data()},
        F2{c.F2r.data(), c.F2i.data()}, F3{c.F3r.data(), c.F3i.data()};
    cx nu_a, nu_b, na_a, na_b, nb_a, nb_b, nc_a, nc_b;
    eval(t, y.f.view(), y.a, y.b, nu_, nu_a, nu_b);
    k_.stage(E2, y.f.view(), Q, nu_.view(), nu_.view(), 1.0, 0.0, sa_.span(), n_);
    const cx aa = y.a + c.aQ * nu_a, ab = y.b + c.aQ * nu_b;
    eval(t + h / 2, sa_.view(), aa, ab, na_, na_a, na_b);
    k_.stage(E2, y.f.view(), Q, na_.view(), na_.view(), 1.0, 0.0, sb_.span(), n_);
    const cx ba = y.a + c.aQ * na_a, bb = y.b + c.aQ * na_b;
    eval(t + h / 2, sb_.view(), ba, bb, nb_, nb_a, nb_b);
    k_.stage(E2, sa_.view(), Q, nb_.view(), nu_.view(), 2.0, -1.0, sc_.span(), n_);
    const cx ca = aa + c.aQ * (2.0 * nb_a - nu_a), cb = ab + c.aQ * (2.0 * nb_b - nu_b);
    eval(t + h, sc_.view(), ca, cb, nc_, nc_a, nc_b);
    k_.combine(E, y.f.view(), F1, nu_.view(), F2, na_.view(), nb_.view(), F3, nc_.view(),
               out.f.span(), n_);
    out.a = y.a + c.aF1 * nu_a + c.aF2 * (na_a + nb_a) + c.aF3 * nc_a;
    out.b = y.b + c.aF1 * nu_b + c.aF2 * (na_b + nb_b) + c.aF3 * nc_b;
  }

  double error(const State& x, const State& y) const {
    double e = k_.error_norm(x.f.view(), y.f.view(), opt_.atol, opt_.rtol, n_);
    for (auto [u, v] : {std::pair{x.a, y.a}, std::pair{x.b, y.b}}) {
      const double sc = opt_.atol + opt_.rtol * std::max(std::abs(u), std::abs(v));
      e = std::max(e, std::abs(u - v) / sc);
    }
    return e;
  }

  double field_population(const State& y) const { return k_.sumsq(y.f.view(), n_); }

 private:
  void eval(double t, simd::CView f, cx a, cx b, Vec& out, cx& da, cx& db) {
    const cx I(0.0, 1.0);
    const simd::Reductions red = k_.reduce(prof_, f, n_);
    const double at = drive_.a(t), bt = drive_.b(t);
    const cx SA(red.A.re, red.A.im), SB(red.B.re, red.B.im);
    da = -I * (at * SA + drive_.stark_a(t) * a);
    db = -I * (bt * SB + drive_.stark_b(t) * b);
    const cx X = -I * at * a, Y = -I * bt * b;
    const cx P = -wx_ * cx(red.E.re, red.E.im), Qv = -wx_ * cx(red.O.re, red.O.im);
    k_.forcing(prof_, f, {X.real(), X.imag()}, {Y.real(), Y.imag()}, {P.real(), P.imag()},
               {Qv.real(), Qv.imag()}, out.span(), n_);
  }

  const Coeffs& coeffs(double h) {
    auto it = cache_.find(h);
    if (it != cache_.end()) return it->second;
    if (cache_.size() > 64) cache_.clear();
    return cache_.emplace(h, make_coeffs(lambda_, h)).first->second;
  }

  std::size_t n_;
  std::vector<double> pA_, pB_, se_, so_, r_;
  std::vector<cx> lambda_;
  double wx_ = 0.0;
  Drive drive_;
  DynamicsOptions opt_;
  const simd::KernelSet& k_;
  simd::Profiles prof_{};
  std::map<double, Coeffs> cache_;
  Vec nu_, na_, nb_, nc_, sa_, sb_, sc_;
};

State to_state(const AmplitudeState& s) {
  State y(s.c010.size());
  for (std::size_t i = 0; i < s.c010.size(); ++i) {
    y.f.re[i] = s.c010[i].real();
    y.f.im[i] = s.c010[i].imag();
  }
  y.a = s.c100;
  y.b = s.c001;
  return y;
}

AmplitudeState to_amplitudes(const State& y, double t_s) {
  AmplitudeState s;
  s.c010.resize(y.f.re.size());
  for (std::size_t i = 0; i < s.c010.size(); ++i) s.c010[i] = cx(y.f.re[i], y.f.im[i]);
  s.c100 = y.a;
  s.c001 = y.b;
  s.t = t_s;
  return s;
}

void check_options(const DynamicsOptions& o) {
  if (!(o.rtol > 0.0) || !(o.atol > 0.0)) throw ValidationError("dynamics: tolerances must be positive");
  if (!(o.cap_T > 0.0) || !(o.start_T >= 0.0)) throw ValidationError("dynamics: invalid time span");
}

// Adaptive driver in reduced time. on_accept(t, y, done) returns true to stop.
// A step doubling estimate controls the error; the accepted value is the
// Richardson extrapolation of the two-half-step result.
template <class OnSample, class Stop>
long drive_steps(Integrator& in, State& y, double t0, double t_max, double h_max, bool land_exactly,
                 OnSample&& on_sample, Stop&& stop, long& rejected) {
  const std::size_t n = y.f.re.size();
  State big(n), mid(n), small(n);
  int j = std::min(-7, int(std::floor(std::log2(h_max))));
  double t = t0;
  long accepted = 0;
  const double h_floor = std::ldexp(1.0, -60);
  while (t < t_max) {
    double h = std::ldexp(1.0, j);
    bool clipped = false;
    if (land_exactly && t + h >= t_max) {
      h = t_max - t;
      clipped = true;
    }
    in.step(t, h, y, big);
    in.step(t, h / 2, y, mid);
    in.step(t + h / 2, h / 2, mid, small);
    const double err = in.error(big, small) / 15.0;
    if (!std::isfinite(err)) throw NumericalError("dynamics: non-finite amplitudes at t = " + std::to_string(t));
    if (err > 1.0) {
      --j;
      ++rejected;
      if (std::ldexp(1.0, j) < h_floor || h < h_floor)
        throw NumericalError("dynamics: step size underflow at reduced time " + std::to_string(t));
      if (clipped) j = std::min(j, int(std::floor(std::log2(h))) - 1);
      continue;
    }
    on_sample(t + h / 2, mid);
    t = clipped ? t_max : t + h;
    for (std::size_t i = 0; i < n; ++i) {
      small.f.re[i] += (small.f.re[i] - big.f.re[i]) / 15.0;
      small.f.im[i] += (small.f.im[i] - big.f.im[i]) / 15.0;
    }
    small.a += (small.a - big.a) / 15.0;
    small.b += (small.b - big.b) / 15.0;
    std::swap(y, small);
    ++accepted;
    on_sample(t, y);
    if (stop(t, y)) break;
    if (err < 1.0 / 24.0 && std::ldexp(1.0, j + 1) <= h_max) ++j;
  }
  return accepted;
}

}  // namespace

Trajectory integrate(const CoupledModel& m, const DynamicsOptions& opt) {
  check_options(opt);
  const std::size_t n = m.size();
  if (n == 0) throw ValidationError("dynamics: no modes");
  const double kappa = m.kappa_c;
  const PulseSchedule& ps = m.pulses;
  const double T = ps.T * kappa;
  const double tA = ps.t_peak(Side::A) * kappa, tB = ps.t_peak(Side::B) * kappa;
  const double t0 = std::min(tA, tB) - opt.start_T * T;
  const double t_cap = t0 + opt.cap_T * T;

  std::vector<double> pA(n), pB(n);
  for (std::size_t i = 0; i < n; ++i) {
    pA[i] = m.gA[i] / kappa;
    pB[i] = m.gB[i] / kappa;
  }
  const double OA = ps.Omega0_A, OB = ps.Omega0_B, DA = m.Delta_A, DB = m.Delta_B;
  auto omega = [T](double O0, double tp, double t) {
    const double x = (t - tp) / T;
    return O0 * std::exp(-x * x);
  };
  Drive drive;
  drive.a = [=](double t) { return omega(OA, tA, t) / (2 * DA); };
  drive.b = [=](double t) { return omega(OB, tB, t) / (2 * DB); };
  if (ps.phase_compensation) {
    drive.stark_a = [](double) { return 0.0; };
    drive.stark_b = [](double) { return 0.0; };
  } else {
    drive.stark_a = [=](double t) { const double o = omega(OA, tA, t); return o * o / (4 * DA) / kappa; };
    drive.stark_b = [=](double t) { const double o = omega(OB, tB, t); return o * o / (4 * DB) / kappa; };
  }

  Integrator in(m, std::move(pA), std::move(pB), std::move(drive), opt);
  AmplitudeState init;
  init.c010.assign(n, cx(0.0, 0.0));
  State y = to_state(init);

  Trajectory tr;
  tr.mode_count = n;
  tr.rtol = opt.rtol;
  tr.atol = opt.atol;
  tr.schedule = ps;
  tr.L = m.L;
  tr.kappa_c = kappa;
  tr.kernel = in.kernel_name();
  auto record = [&](double t, const State& s) {
    Sample smp;
    smp.t = t / kappa;
    smp.p_atom_A = std::norm(s.a);
    smp.p_atom_B = std::norm(s.b);
    smp.p_field = in.field_population(s);
    tr.samples.push_back(smp);
    if (opt.record_modes) {
      std::vector<double> pops(n);
      for (std::size_t i = 0; i < n; ++i) pops[i] = s.f.re[i] * s.f.re[i] + s.f.im[i] * s.f.im[i];
      tr.mode_populations.push_back(std::move(pops));
    }
  };
  record(t0, y);
  auto stop = [&](double t, const State&) {
    const bool a_off = t > tA && omega(1.0, tA, t) < opt.pulse_off;
    const bool b_off = t > tB && omega(1.0, tB, t) < opt.pulse_off;
    return a_off && b_off;
  };
  const double h_max = std::max(T / 8.0, 1e-6);
  tr.accepted_steps = drive_steps(in, y, t0, t_cap, h_max, false, record, stop, tr.rejected_steps);
  const double t_end = tr.samples.back().t;
  tr.hit_cap = t_end * kappa >= t_cap;
  tr.final_state = to_amplitudes(y, t_end);
  return tr;
}

Trajectory integrate(const SystemParams& params, const ModeTable& modes, const LossMatrix* loss,
                     double omega_L, const DynamicsOptions& options) {
  return integrate(build_model(params, modes, loss, omega_L), options);
}

AmplitudeState propagate_frozen(const CoupledModel& m, const std::vector<double>& G_A,
                                const std::vector<double>& G_B, AmplitudeState initial,
                                double duration, const DynamicsOptions& opt) {
  check_options(opt);
  const std::size_t n = m.size();
  if (G_A.size() != n || G_B.size() != n || initial.c010.size() != n)
    throw ValidationError("propagate_frozen: dimension mismatch");
  if (!(duration >= 0.0)) throw ValidationError("propagate_frozen: negative duration");
  const double kappa = m.kappa_c;
  std::vector<double> pA(n), pB(n);
  for (std::size_t i = 0; i < n; ++i) {
    pA[i] = G_A[i] / kappa;
    pB[i] = G_B[i] / kappa;
  }
  Drive drive;
  drive.a = [](double) { return 1.0; };
  drive.b = [](double) { return 1.0; };
  drive.stark_a = [](double) { return 0.0; };
  drive.stark_b = [](double) { return 0.0; };
  Integrator in(m, std::move(pA), std::move(pB), std::move(drive), opt);
  State y = to_state(initial);
  const double t0 = initial.t * kappa, t1 = t0 + duration * kappa;
  long rejected = 0;
  if (duration > 0.0)
    drive_steps(in, y, t0, t1, std::max(duration * kappa, 1e-6), true, [](double, const State&) {},
                [](double, const State&) { return false; }, rejected);
  return to_amplitudes(y, initial.t + duration);
}

double transfer_probability(const Trajectory& traj) {
  if (traj.samples.empty()) throw ValidationError("transfer_probability: empty trajectory");
  const Sample& last = traj.samples.back();
  if (last.p_field > 1e-4)
    std::fprintf(stderr, "warning: %.3g of the population is still in the field at the end\n",
                 last.p_field);
  return std::clamp(last.p_atom_B, 0.0, 1.0);
}

double dwell_ratio(const Trajectory& traj, double L, double kappa_c) {
  const double P = transfer_probability(traj);
  if (!(P > 0.0)) throw ValidationError("dwell_ratio: transfer probability is zero");
  if (!(kappa_c > 0.0) || !(L >= 0.0)) throw ValidationError("dwell_ratio: invalid L or kappa_c");
  double integral = 0.0;
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    const Sample& a = traj.samples[i - 1];
    const Sample& b = traj.samples[i];
    integral += 0.5 * (a.p_field + b.p_field) * (b.t - a.t);
  }
  return integral / (P * (L / kSpeedOfLight + 2.0 / kappa_c));
}

double p1_bound(double kappa_c, double gamma_c, double gamma_f, double L) {
  if (!(kappa_c > 0.0) || gamma_c < 0.0 || gamma_f < 0.0 || L < 0.0)
    throw ValidationError("p1_bound: invalid arguments");
  const double F = kappa_c / (kappa_c + gamma_c);
  return F * F * std::exp(-gamma_f * L / kSpeedOfLight);
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  csv::Writer w(path);
  std::vector<std::string> head{"t_s", "p_atom_A", "p_field_total", "p_atom_B", "norm"};
  const bool modes = !traj.mode_populations.empty();
  if (modes)
    for (std::size_t i = 0; i < traj.mode_count; ++i) head.push_back("p_mode_" + std::to_string(i));
  w.row(head);
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const Sample& s = traj.samples[k];
    std::vector<std::string> row{csv::num(s.t), csv::num(s.p_atom_A), csv::num(s.p_field),
                                 csv::num(s.p_atom_B), csv::num(s.p_atom_A + s.p_field + s.p_atom_B)};
    if (modes)
      for (double p : traj.mode_populations[k]) row.push_back(csv::num(p));
    w.row(row);
  }
}

}  // namespace phantom
