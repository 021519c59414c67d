#include "phantom/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include "phantom/csv.hpp"
#include "phantom/errors.hpp"

namespace phantom {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

KeyValues make_defaults() {
  return {
      {"geometry.lambda_m", "8.52e-07"},
      {"geometry.l_m", "1e-05"},
      {"geometry.L_m", "0.01"},
      {"geometry.mu_k", "500"},
      {"geometry.fiber_tuning", "resonant"},
      {"atoms.g_max_rad_s", csv::num(kTwoPi * 100e6)},
      {"atoms.Delta_rad_s", csv::num(kTwoPi * 500e6)},
      {"atoms.s_m", "0"},
      {"loss.gamma_c_per_s", "0"},
      {"loss.gamma_f_per_s", "0"},
      {"loss.convention", "half"},
      {"pulses.T_per_kappa", "20"},
      {"pulses.tau_per_T", "1.2"},
      {"pulses.Omega0_rad_s", "0"},
      {"pulses.Omega0_B_rad_s", "0"},
      {"pulses.ordering", "delayed_A"},
      {"pulses.phase_compensation", "true"},
      {"laser.detuning_rad_s", "0"},
      {"laser.selector", "cavity_like"},
      {"laser.mode_index", "0"},
      {"modes.window_rad_s", "0"},
      {"modes.n_reference", "auto"},
      {"dynamics.rtol", "1e-09"},
      {"dynamics.atol", "1e-12"},
      {"dynamics.isa", "auto"},
      {"dynamics.record_modes", "false"},
      {"dynamics.cap_T", "20"},
      {"optimizer.enabled", "auto"},
      {"optimizer.grid", "9"},
      {"optimizer.max_evals", "400"},
      {"optimizer.simplex_tol", "0.0001"},
      {"optimizer.dwell_tolerance", "0.0001"},
      {"optimizer.independent_omegas", "false"},
      {"optimizer.free_detuning", "true"},
      {"optimizer.omega_min_per_Delta", "0.02"},
      {"optimizer.omega_max_per_Delta", "1"},
      {"optimizer.detuning_halfwidth_rad_s", "0"},
      {"run.check_convergence", "true"},
      {"run.convergence_tol", "0.0001"},
      {"sweep.variable", ""},
      {"sweep.values", ""},
      {"sweep.from", "0"},
      {"sweep.to", "0"},
      {"sweep.points", "0"},
      {"sweep.spacing", "linear"},
      {"figure.fig1_n_halfwidth", "100"},
      {"figure.fig2_L_min_m", "0.001"},
      {"figure.fig2_L_max_m", "10"},
      {"figure.fig2_points", "9"},
      {"figure.T_long_per_kappa", "40"},
      {"figure.fig3_gamma_c_min_per_s", "1e5"},
      {"figure.fig3_gamma_c_max_per_s", "1e9"},
      {"figure.fig3_points", "9"},
      {"figure.fig4_gamma_min_per_s", "1e4"},
      {"figure.fig4_gamma_max_per_s", "1e8"},
      {"figure.fig4_points", "5"},
      {"figure.fig4_L_set_m", "0.01,1,8"},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  const std::string& raw(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ValidationError(key + ": missing");
    return it->second;
  }

  double number(const std::string& key) const { return parse_number(key, trim(raw(key))); }

  double positive(const std::string& key) const {
    const double v = number(key);
    if (!(v > 0.0)) throw ValidationError(key + ": must be positive, got " + raw(key));
    return v;
  }

  double non_negative(const std::string& key) const {
    const double v = number(key);
    if (!(v >= 0.0)) throw ValidationError(key + ": must be non-negative, got " + raw(key));
    return v;
  }

  long integer(const std::string& key) const {
    const std::string s = trim(raw(key));
    long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ValidationError(key + ": expected an integer, got '" + s + "'");
    return v;
  }

  bool flag(const std::string& key) const {
    std::string s = trim(raw(key));
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw ValidationError(key + ": expected true or false, got '" + s + "'");
  }

  std::string choice(const std::string& key, std::initializer_list<const char*> options) const {
    const std::string s = trim(raw(key));
    std::string list;
    for (const char* o : options) {
      if (s == o) return s;
      list += list.empty() ? o : std::string("|") + o;
    }
    throw ValidationError(key + ": expected one of " + list + ", got '" + s + "'");
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(raw(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(parse_number(key, item));
    }
    return out;
  }

  static double parse_number(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
      throw ValidationError(key + ": expected a number, got '" + s + "'");
    return v;
  }

 private:
  const KeyValues& kv_;
};

void flatten(const boost::property_tree::ptree& tree, const std::string& prefix, KeyValues& out) {
  for (const auto& [name, child] : tree) {
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    if (child.empty()) {
      set_value(out, key, child.data());
    } else {
      flatten(child, key, out);
    }
  }
}

}  // namespace

const KeyValues& default_key_values() {
  static const KeyValues defaults = make_defaults();
  return defaults;
}

void set_value(KeyValues& kv, const std::string& key, const std::string& value) {
  const std::string k = trim(key);
  if (!default_key_values().count(k)) throw ValidationError(k + ": unknown configuration key");
  kv[k] = trim(value);
}

void apply_override(KeyValues& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ValidationError("override '" + assignment + "': expected key=value");
  set_value(kv, assignment.substr(0, eq), assignment.substr(eq + 1));
}

KeyValues load_config_file(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError("config: " + std::string(e.what()));
  }
  KeyValues kv = default_key_values();
  flatten(tree, "", kv);
  return kv;
}

std::vector<double> spaced(double from, double to, int points, bool log) {
  if (points < 1) throw ValidationError("sweep: at least one point required");
  if (log && !(from > 0.0 && to > 0.0)) throw ValidationError("sweep: log spacing needs positive ends");
  std::vector<double> v(std::size_t(points), from);
  for (int i = 0; i < points && points > 1; ++i) {
    const double u = double(i) / double(points - 1);
    v[std::size_t(i)] =
        log ? std::pow(10.0, std::log10(from) + u * (std::log10(to) - std::log10(from)))
            : from + u * (to - from);
  }
  if (points > 1) v.back() = to;
  return v;
}

bool ScenarioConfig::wants_optimization() const {
  switch (optimizer.mode) {
    case OptimizerSettings::Mode::on: return true;
    case OptimizerSettings::Mode::off: return false;
    case OptimizerSettings::Mode::automatic: return system.pulses.Omega0_A == 0.0;
  }
  return false;
}

ScenarioConfig parse_config(const KeyValues& kv) {
  for (const auto& [k, v] : kv)
    if (!default_key_values().count(k)) throw ValidationError(k + ": unknown configuration key");
  KeyValues full = default_key_values();
  for (const auto& [k, v] : kv) full[k] = v;
  const Reader r(full);

  ScenarioConfig c;
  c.source = full;
  SystemParams& p = c.system;
  p.lambda = r.positive("geometry.lambda_m");
  p.l = r.positive("geometry.l_m");
  p.L = r.positive("geometry.L_m");
  p.mu_k = r.positive("geometry.mu_k");
  p.fiber_tuning = r.choice("geometry.fiber_tuning", {"resonant", "nominal"}) == "resonant"
                       ? FiberTuning::resonant
                       : FiberTuning::nominal;
  if (p.lambda > 2 * p.l) throw ValidationError("geometry.lambda_m: must be shorter than 2 l");

  const double g_max = r.positive("atoms.g_max_rad_s");
  const double Delta = r.number("atoms.Delta_rad_s");
  if (Delta == 0.0) throw ValidationError("atoms.Delta_rad_s: must be non-zero");
  if (std::fabs(Delta) < 4 * g_max)
    std::cerr << "warning: |Delta| < 4 g_max, adiabatic elimination is questionable\n";
  p.atom_A.g_max = p.atom_B.g_max = g_max;
  p.atom_A.Delta = p.atom_B.Delta = Delta;

  p.gamma_c = r.non_negative("loss.gamma_c_per_s");
  p.gamma_f = r.non_negative("loss.gamma_f_per_s");
  c.convention = r.choice("loss.convention", {"half", "full"}) == "half" ? LossConvention::half
                                                                         : LossConvention::full;

  p.laser_detuning_offset = r.number("laser.detuning_rad_s");
  const std::string sel = r.choice("laser.selector", {"cavity_like", "neighbor", "index"});
  p.selector.kind = sel == "cavity_like" ? ModeSelector::Kind::most_cavity_like
                    : sel == "neighbor"  ? ModeSelector::Kind::neighbor_same_parity
                                         : ModeSelector::Kind::explicit_index;
  p.selector.index = r.integer("laser.mode_index");
  p.mode_window = r.non_negative("modes.window_rad_s");

  refresh_derived(p);
  const double s = r.non_negative("atoms.s_m");
  if (s > 0.0) {
    if (!(s < p.l)) throw ValidationError("atoms.s_m: must lie inside the cavity (0, l)");
    p.atom_A.s = p.atom_B.s = s;
  }

  c.T_per_kappa = r.positive("pulses.T_per_kappa");
  c.tau_per_T = r.non_negative("pulses.tau_per_T");
  p.pulses.T = c.T_per_kappa / p.kappa_c();
  p.pulses.tau = c.tau_per_T * p.pulses.T;
  p.pulses.t_peak_B = 0.0;
  p.pulses.Omega0_A = r.non_negative("pulses.Omega0_rad_s");
  const double ob = r.non_negative("pulses.Omega0_B_rad_s");
  p.pulses.Omega0_B = ob > 0.0 ? ob : p.pulses.Omega0_A;
  p.pulses.ordering = r.choice("pulses.ordering", {"delayed_A", "literal"}) == "literal"
                          ? PulseOrdering::literal
                          : PulseOrdering::delayed_A;
  p.pulses.phase_compensation = r.flag("pulses.phase_compensation");

  const std::string nref = trim(r.raw("modes.n_reference"));
  if (nref == "auto") {
    const double m = std::floor(p.carrier_k() * p.l / std::numbers::pi);
    c.n_reference = long(m) * std::lround(p.L / p.l);
  } else {
    c.n_reference = r.integer("modes.n_reference");
  }

  DynamicsOptions& d = c.dynamics;
  d.rtol = r.positive("dynamics.rtol");
  d.atol = r.positive("dynamics.atol");
  const std::string isa = r.choice("dynamics.isa", {"auto", "scalar", "avx2"});
  d.isa = isa == "scalar" ? simd::Isa::scalar : isa == "avx2" ? simd::Isa::avx2 : simd::Isa::automatic;
  d.record_modes = r.flag("dynamics.record_modes");
  d.cap_T = r.positive("dynamics.cap_T");
  d.convention = c.convention;

  OptimizerSettings& o = c.optimizer;
  const std::string en = r.choice("optimizer.enabled", {"auto", "true", "false"});
  o.mode = en == "auto"   ? OptimizerSettings::Mode::automatic
           : en == "true" ? OptimizerSettings::Mode::on
                          : OptimizerSettings::Mode::off;
  o.grid = int(r.integer("optimizer.grid"));
  if (o.grid < 2) throw ValidationError("optimizer.grid: at least 2 points per axis");
  o.max_evals = int(r.integer("optimizer.max_evals"));
  if (o.max_evals < 0) throw ValidationError("optimizer.max_evals: must be non-negative");
  o.simplex_tol = r.positive("optimizer.simplex_tol");
  o.dwell_tolerance = r.non_negative("optimizer.dwell_tolerance");
  o.independent_omegas = r.flag("optimizer.independent_omegas");
  o.free_detuning = r.flag("optimizer.free_detuning");
  o.omega_min_per_Delta = r.positive("optimizer.omega_min_per_Delta");
  o.omega_max_per_Delta = r.positive("optimizer.omega_max_per_Delta");
  if (!(o.omega_max_per_Delta > o.omega_min_per_Delta))
    throw ValidationError("optimizer.omega_max_per_Delta: must exceed omega_min_per_Delta");
  o.detuning_halfwidth = r.non_negative("optimizer.detuning_halfwidth_rad_s");
  if (!c.wants_optimization() && p.pulses.Omega0_A == 0.0)
    throw ValidationError("pulses.Omega0_rad_s: must be positive when the optimizer is off");

  c.check_convergence = r.flag("run.check_convergence");
  c.convergence_tol = r.positive("run.convergence_tol");

  const std::string var = trim(r.raw("sweep.variable"));
  if (!var.empty()) {
    if (!default_key_values().count(var) || var.rfind("sweep.", 0) == 0 ||
        var.rfind("figure.", 0) == 0)
      throw ValidationError("sweep.variable: '" + var + "' is not a sweepable key");
    SweepAxis axis{var, r.list("sweep.values")};
    if (axis.values.empty()) {
      const long n = r.integer("sweep.points");
      if (n < 1) throw ValidationError("sweep.points: zero-length sweep axis");
      const bool lg = r.choice("sweep.spacing", {"linear", "log"}) == "log";
      axis.values = spaced(r.number("sweep.from"), r.number("sweep.to"), int(n), lg);
    }
    c.sweep = std::move(axis);
  }

  FigureSettings& f = c.figure;
  f.fig1_n_halfwidth = r.positive("figure.fig1_n_halfwidth");
  f.fig2_L_min = r.positive("figure.fig2_L_min_m");
  f.fig2_L_max = r.positive("figure.fig2_L_max_m");
  f.fig2_points = int(r.integer("figure.fig2_points"));
  f.T_long_per_kappa = r.positive("figure.T_long_per_kappa");
  f.fig3_gamma_min = r.positive("figure.fig3_gamma_c_min_per_s");
  f.fig3_gamma_max = r.positive("figure.fig3_gamma_c_max_per_s");
  f.fig3_points = int(r.integer("figure.fig3_points"));
  f.fig4_gamma_min = r.positive("figure.fig4_gamma_min_per_s");
  f.fig4_gamma_max = r.positive("figure.fig4_gamma_max_per_s");
  f.fig4_points = int(r.integer("figure.fig4_points"));
  f.fig4_L_set = r.list("figure.fig4_L_set_m");
  for (const char* k : {"figure.fig2_points", "figure.fig3_points", "figure.fig4_points"})
    if (r.integer(k) < 1) throw ValidationError(std::string(k) + ": zero-length sweep axis");
  if (f.fig4_L_set.empty()) throw ValidationError("figure.fig4_L_set_m: empty");
  for (double L : f.fig4_L_set)
    if (!(L > 0.0)) throw ValidationError("figure.fig4_L_set_m: lengths must be positive");
  return c;
}

}  // namespace phantom
