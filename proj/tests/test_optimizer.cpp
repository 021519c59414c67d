#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "phantom/errors.hpp"
#include "phantom/optimizer.hpp"

using namespace phantom;

namespace {

std::vector<std::vector<double>> grid2(const std::vector<Bounds>& b, int n) {
  std::vector<std::vector<double>> g;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      g.push_back({b[0].lo + b[0].span() * i / (n - 1), b[1].lo + b[1].span() * j / (n - 1)});
  return g;
}

Mode mode(double k, Parity p, double f) {
  Mode m;
  m.k = k;
  m.parity = p;
  m.cavity_fraction = f;
  return m;
}

ModeTable ladder() {
  // even/odd alternating, most cavity-like at index 4
  const double f[] = {0.01, 0.02, 0.1, 0.3, 0.9, 0.5, 0.2, 0.05, 0.04};
  ModeTable t;
  for (int i = 0; i < 9; ++i) t.modes.push_back(mode(1e6 + i, i % 2 ? Parity::odd : Parity::even, f[i]));
  return t;
}

}  // namespace

TEST_CASE("paraboloid maximum recovered within 1e-6 of the bound span") {
  const std::vector<Bounds> b{{-2.0, 3.0}, {10.0, 20.0}};
  const double x0 = 0.7314, y0 = 13.27;
  auto f = [&](const std::vector<double>& x) {
    const double u = (x[0] - x0) / b[0].span(), v = (x[1] - y0) / b[1].span();
    return 1.0 - u * u - 2 * v * v - 0.5 * u * v;
  };
  // The default simplex tolerance bounds the error by about its own size.
  const MaximizeResult coarse = maximize(f, b, grid2(b, 9), 400, 1e-4, 1.0 / 8);
  CHECK(std::fabs(coarse.best_x[0] - x0) < 1e-3 * b[0].span());
  CHECK(std::fabs(coarse.best_x[1] - y0) < 1e-3 * b[1].span());
  const MaximizeResult r = maximize(f, b, grid2(b, 9), 400, 1e-9, 1.0 / 8);
  INFO("best = " << r.best_x[0] << ", " << r.best_x[1]);
  CHECK(std::fabs(r.best_x[0] - x0) < 1e-6 * b[0].span());
  CHECK(std::fabs(r.best_x[1] - y0) < 1e-6 * b[1].span());
}

TEST_CASE("maximum on the boundary stays inside the box") {
  const std::vector<Bounds> b{{0.0, 1.0}, {0.0, 1.0}};
  auto f = [](const std::vector<double>& x) { return x[0] - (x[1] - 0.5) * (x[1] - 0.5); };
  const MaximizeResult r = maximize(f, b, grid2(b, 5), 200, 1e-6, 0.25);
  for (const auto& x : r.xs) {
    CHECK(x[0] >= 0.0);
    CHECK(x[0] <= 1.0);
  }
  CHECK(r.best_x[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bookkeeping: best equals the trace maximum, budget respected, deterministic") {
  const std::vector<Bounds> b{{0.0, 1.0}, {0.0, 1.0}};
  auto f = [](const std::vector<double>& x) {
    return std::sin(7 * x[0]) * std::cos(3 * x[1]) + 0.1 * x[0];
  };
  const auto grid = grid2(b, 9);
  const MaximizeResult a = maximize(f, b, grid, 40, 1e-9, 1.0 / 8);
  CHECK(a.xs.size() <= grid.size() + 40);
  CHECK(a.best_f == doctest::Approx(*std::max_element(a.fs.begin(), a.fs.end())).epsilon(1e-12));
  const MaximizeResult c = maximize(f, b, grid, 40, 1e-9, 1.0 / 8);
  REQUIRE(a.xs.size() == c.xs.size());
  for (std::size_t i = 0; i < a.xs.size(); ++i) {
    CHECK(a.xs[i] == c.xs[i]);
    CHECK(a.fs[i] == c.fs[i]);
  }
}

TEST_CASE("failed evaluations score zero; an all-failing grid reports the first failure") {
  const std::vector<Bounds> b{{0.0, 1.0}, {0.0, 1.0}};
  auto partly = [](const std::vector<double>& x) {
    if (x[0] > 0.5) throw NumericalError("too strong");
    return x[0];
  };
  const MaximizeResult r = maximize(partly, b, grid2(b, 3), 30, 1e-6, 0.5);
  CHECK(r.best_f <= 0.5);
  CHECK(std::count_if(r.errors.begin(), r.errors.end(), [](auto& e) { return !e.empty(); }) >= 3);

  auto never = [](const std::vector<double>&) -> double { throw NumericalError("step size underflow"); };
  try {
    maximize(never, b, grid2(b, 3), 30, 1e-6, 0.5);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step size underflow") != std::string::npos);
  }
  CHECK_THROWS_AS(maximize(partly, {{1.0, 0.0}}, {{0.5}}, 10, 1e-4, 0.1), ValidationError);
  CHECK_THROWS_AS(maximize(partly, {}, {{0.5}}, 10, 1e-4, 0.1), ValidationError);
}

TEST_CASE("mode selectors") {
  const ModeTable t = ladder();
  ModeSelector s;
  CHECK(resolve_mode_index(t, s) == 4);
  s.kind = ModeSelector::Kind::neighbor_same_parity;
  CHECK(resolve_mode_index(t, s) == 6);
  s.kind = ModeSelector::Kind::explicit_index;
  s.index = 2;
  CHECK(resolve_mode_index(t, s) == 2);
  s.index = 9;
  CHECK_THROWS_AS(resolve_mode_index(t, s), ValidationError);
  s.index = -1;
  CHECK_THROWS_AS(resolve_mode_index(t, s), ValidationError);
  CHECK_THROWS_AS(resolve_mode_index(ModeTable{}, ModeSelector{}), ValidationError);
}

TEST_CASE("single-mode table: that mode for every selector except the neighbor") {
  ModeTable one;
  one.modes.push_back(mode(5e6, Parity::odd, 0.3));
  ModeSelector s;
  CHECK(resolve_mode_index(one, s) == 0);
  s.kind = ModeSelector::Kind::explicit_index;
  s.index = 0;
  CHECK(resolve_mode_index(one, s) == 0);
  s.kind = ModeSelector::Kind::neighbor_same_parity;
  CHECK_THROWS_AS(resolve_mode_index(one, s), ValidationError);
}

TEST_CASE("argmax invariance under a common scale of the cavity fractions") {
  ModeTable t = ladder();
  for (auto kind : {ModeSelector::Kind::most_cavity_like, ModeSelector::Kind::neighbor_same_parity}) {
    ModeSelector s;
    s.kind = kind;
    const std::size_t before = resolve_mode_index(t, s);
    ModeTable scaled = t;
    for (auto& m : scaled.modes) m.cavity_fraction *= 0.37;
    CHECK(resolve_mode_index(scaled, s) == before);
  }
}

TEST_CASE("Fig. 1 geometry: cavity-like even mode at the resonance, neighbor the next even mode above") {
  SystemParams p = default_system();
  p.L = 1e5 * p.l;
  p.fiber_tuning = FiberTuning::nominal;
  refresh_derived(p);
  const Geometry g = p.geometry();
  const double kc = p.carrier_k();
  const ModeTable t = find_modes(g, {kc - 6 * std::numbers::pi / g.L, kc + 6 * std::numbers::pi / g.L},
                                 ParitySelection::even);
  ModeSelector s;
  const Mode& best = resolve_mode_selector(t, s);
  for (const auto& m : t) CHECK(m.cavity_fraction <= best.cavity_fraction);
  s.kind = ModeSelector::Kind::neighbor_same_parity;
  const Mode& nb = resolve_mode_selector(t, s);
  CHECK(nb.k > best.k);
  CHECK(&nb == &best + 1);
  CHECK(nb.cavity_fraction < best.cavity_fraction);
}

TEST_CASE("default bounds") {
  const SystemParams p = default_system();
  const OptimizationProblem pr = default_problem(p);
  CHECK(pr.omega0.lo == doctest::Approx(0.02 * p.atom_A.Delta));
  CHECK(pr.omega0.hi == doctest::Approx(p.atom_A.Delta));
  CHECK(pr.detuning.hi == doctest::Approx(-pr.detuning.lo));
  CHECK(pr.detuning.hi <= 3 * p.kappa_c() * (1 + 1e-12));
  CHECK(pr.grid == 9);
  CHECK(pr.max_evals == 400);
  CHECK(pr.simplex_tol == 1e-4);
}

TEST_CASE("lossless transfer at L = 1 cm reaches P >= 0.99 and the trace is consistent") {
  const OptimizationProblem pr = default_problem(default_system());
  const OptimizationResult r = optimize_transfer(pr);
  CHECK(r.best_P >= 0.99);
  CHECK(r.evaluations <= long(pr.grid * pr.grid + 2 * pr.max_evals + 3));
  double mx = 0.0;
  for (const auto& t : r.trace) mx = std::max(mx, t.P);
  CHECK(r.best_P == doctest::Approx(mx).epsilon(1e-12));
  CHECK(r.best_params.pulses.Omega0_A == r.best_Omega0_A);
  CHECK(r.best_params.laser_detuning_offset == r.best_detuning);

  const auto path = std::filesystem::temp_directory_path() / "phantom_test_optimizer_trace.csv";
  write_optimizer_trace_csv(path.string(), r);
  std::ifstream in(path);
  std::string head;
  std::getline(in, head);
  CHECK(head == "eval,Omega0_rad_s,detuning_rad_s,P,R,stage");
  std::filesystem::remove(path);

  const OptimizationResult again = optimize_transfer(pr);
  CHECK(again.best_P == r.best_P);
  CHECK(again.evaluations == r.evaluations);
}

TEST_CASE("dwell stage: near-maximal P at no larger R, lossless only") {
  OptimizationProblem pr = default_problem(default_system());
  pr.grid = 5;
  pr.max_evals = 60;
  const OptimizationResult r = optimize_transfer(pr);
  REQUIRE(r.dwell_stage);
  CHECK(r.chosen_P >= r.best_P - pr.dwell_tolerance);
  double R_best = 0.0, R_min_feasible = 1e300;
  bool stage2 = false;
  for (const auto& t : r.trace) {
    if (t.stage == 2) stage2 = true;
    if (t.P == r.best_P) R_best = t.R;
    if (t.ok && t.P >= r.best_P - pr.dwell_tolerance) R_min_feasible = std::min(R_min_feasible, t.R);
  }
  CHECK(stage2);
  CHECK(r.chosen_R <= R_best);
  CHECK(r.chosen_R == doctest::Approx(R_min_feasible).epsilon(1e-12));
  CHECK(r.chosen_params.pulses.Omega0_A > 0.0);

  pr.dwell_tolerance = 0.0;
  const OptimizationResult off = optimize_transfer(pr);
  CHECK_FALSE(off.dwell_stage);
  CHECK(off.chosen_P == off.best_P);
  for (const auto& t : off.trace) CHECK(t.stage == 1);

  SystemParams p = default_system();
  p.gamma_c = 1e6;
  OptimizationProblem lossy = default_problem(p);
  lossy.grid = 3;
  lossy.max_evals = 10;
  const OptimizationResult l = optimize_transfer(lossy);
  CHECK_FALSE(l.dwell_stage);
  CHECK(l.chosen_P == l.best_P);
}

TEST_CASE("independent Omega0 adds a third variable") {
  OptimizationProblem pr = default_problem(default_system());
  pr.independent_omegas = true;
  pr.grid = 3;
  pr.max_evals = 20;
  const OptimizationResult r = optimize_transfer(pr);
  bool differ = false;
  for (const auto& t : r.trace) differ = differ || t.Omega0_A != t.Omega0_B;
  CHECK(differ);
  CHECK(r.best_P > 0.5);
}

TEST_CASE("invalid problems are rejected") {
  OptimizationProblem pr = default_problem(default_system());
  pr.grid = 1;
  CHECK_THROWS_AS(optimize_transfer(pr), ValidationError);
  pr = default_problem(default_system());
  pr.free_omega = pr.free_detuning = false;
  CHECK_THROWS_AS(optimize_transfer(pr), ValidationError);
  pr = default_problem(default_system());
  pr.omega0 = {0.0, 1.0};
  CHECK_THROWS_AS(optimize_transfer(pr), ValidationError);
}

TEST_CASE("lossy cavities: tuning to the neighboring same-parity mode beats the cavity-like mode") {
  SystemParams p = default_system();
  p.gamma_c = 3e7;
  OptimizationProblem pr = default_problem(p);
  const OptimizationResult cav = optimize_transfer(pr);
  p.selector.kind = ModeSelector::Kind::neighbor_same_parity;
  pr = default_problem(p);
  const OptimizationResult nb = optimize_transfer(pr);
  INFO("cavity-like P = " << cav.best_P << ", neighbor P = " << nb.best_P);
  CHECK(nb.best_P > cav.best_P);
}
