#include "phantom/optimizer.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "phantom/csv.hpp"
#include "phantom/errors.hpp"
#include "phantom/loss_model.hpp"

namespace phantom {

std::size_t resolve_mode_index(const ModeTable& modes, const ModeSelector& selector) {
  if (modes.empty()) throw ValidationError("mode selector: empty mode table");
  std::size_t best = 0;
  for (std::size_t i = 1; i < modes.size(); ++i)
    if (modes[i].cavity_fraction > modes[best].cavity_fraction) best = i;
  switch (selector.kind) {
    case ModeSelector::Kind::most_cavity_like:
      return best;
    case ModeSelector::Kind::neighbor_same_parity:
      for (std::size_t i = best + 1; i < modes.size(); ++i)
        if (modes[i].parity == modes[best].parity) return i;
      throw ValidationError("mode selector: no same-parity mode above the most cavity-like one");
    case ModeSelector::Kind::explicit_index:
      if (selector.index < 0 || std::size_t(selector.index) >= modes.size())
        throw ValidationError("mode selector: index " + std::to_string(selector.index) +
                              " out of range");
      return std::size_t(selector.index);
  }
  throw ValidationError("mode selector: unknown kind");
}

const Mode& resolve_mode_selector(const ModeTable& modes, const ModeSelector& selector) {
  return modes[resolve_mode_index(modes, selector)];
}

double rate_half_window(const SystemParams& p, double scale) {
  if (!(scale > 0.0)) throw ValidationError("mode window scale must be positive");
  if (p.mode_window < 0.0) throw ValidationError("modes.window_rad_s must be non-negative");
  const double rate = p.mode_window > 0.0 ? p.mode_window : 200.0 * p.kappa_c();
  const double fsr = kSpeedOfLight * p.geometry().free_spectral_range();
  return scale * std::max(rate, 1.5 * fsr);
}

ScenarioModes prepare_modes(const SystemParams& p, double det_lo, double det_hi,
                            double window_scale) {
  if (!(det_hi >= det_lo)) throw ValidationError("detuning range is empty");
  const Geometry g = p.geometry();
  const double kc = p.carrier_k();
  const double fsr_k = g.free_spectral_range();
  const double sel_w = 1.5 * fsr_k + 2.0 * p.kappa_c() / kSpeedOfLight;
  const ModeTable around = find_modes(g, {kc - sel_w, kc + sel_w}, ParitySelection::both);
  const std::size_t idx = resolve_mode_index(around, p.selector);
  ScenarioModes out;
  out.k_selected = double(around[idx].k);
  double gap = std::numeric_limits<double>::infinity();
  if (idx > 0) gap = std::min(gap, double(around[idx].k - around[idx - 1].k));
  if (idx + 1 < around.size()) gap = std::min(gap, double(around[idx + 1].k - around[idx].k));
  out.spacing = gap * kSpeedOfLight;
  out.half_window = rate_half_window(p, window_scale);
  const double w = out.half_window / kSpeedOfLight;
  const double lo = out.k_selected + det_lo / kSpeedOfLight - w;
  const double hi = out.k_selected + det_hi / kSpeedOfLight + w;
  out.table = find_modes(g, {std::max(lo, 0.5 * kc), hi}, ParitySelection::both);
  return out;
}

OptimizationProblem default_problem(const SystemParams& base) {
  OptimizationProblem pr;
  pr.base = base;
  const double D = std::fabs(base.atom_A.Delta);
  pr.omega0 = {0.02 * D, 1.0 * D};
  const ScenarioModes sm = prepare_modes(base, 0.0, 0.0);
  const double half = 3.0 * std::min(sm.spacing, base.kappa_c());
  pr.detuning = {-half, half};
  return pr;
}

namespace {

struct NmContext {
  const std::function<double(const std::vector<double>&)>* f;
  const std::vector<Bounds>* bounds;
  MaximizeResult* out;
  int budget;
  int used = 0;
};

std::vector<double> to_physical(const std::vector<Bounds>& b, const gsl_vector* u) {
  std::vector<double> x(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double v = std::clamp(gsl_vector_get(u, i), 0.0, 1.0);
    x[i] = b[i].lo + v * b[i].span();
  }
  return x;
}

void record(MaximizeResult& out, const std::vector<double>& x, double v, std::string err) {
  out.xs.push_back(x);
  out.fs.push_back(v);
  out.errors.push_back(std::move(err));
  if (out.errors.back().empty() && (out.best_x.empty() || v > out.best_f)) {
    out.best_f = v;
    out.best_x = x;
  }
}

double nm_objective(const gsl_vector* u, void* params) {
  auto* ctx = static_cast<NmContext*>(params);
  if (ctx->used >= ctx->budget) return std::numeric_limits<double>::max();
  ++ctx->used;
  const auto x = to_physical(*ctx->bounds, u);
  double v = 0.0;
  std::string err;
  try {
    v = (*ctx->f)(x);
  } catch (const std::exception& e) {
    err = e.what();
  }
  record(*ctx->out, x, v, err);
  // A penalty outside the box keeps the simplex inside.
  double excess = 0.0;
  for (std::size_t i = 0; i < u->size; ++i) {
    const double ui = gsl_vector_get(u, i);
    excess += std::max(0.0, -ui) + std::max(0.0, ui - 1.0);
  }
  return -(err.empty() ? v : 0.0) + excess;
}

}  // namespace

MaximizeResult maximize(const std::function<double(const std::vector<double>&)>& f,
                        const std::vector<Bounds>& bounds,
                        const std::vector<std::vector<double>>& grid_points, int max_evals,
                        double simplex_tol, double initial_step) {
  const std::size_t dim = bounds.size();
  if (dim == 0) throw ValidationError("optimizer: no free variables");
  for (const auto& b : bounds)
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.hi > b.lo))
      throw ValidationError("optimizer: bounds must be finite and ordered");
  if (grid_points.empty()) throw ValidationError("optimizer: empty grid");
  if (max_evals < 0 || !(simplex_tol > 0.0)) throw ValidationError("optimizer: invalid budget");

  MaximizeResult out;
  // Grid phase: evaluated concurrently, merged in grid order.
  const std::size_t ng = grid_points.size();
  std::vector<double> gv(ng, 0.0);
  std::vector<std::string> ge(ng);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < ng; i = next++) {
      try {
        gv[i] = f(grid_points[i]);
      } catch (const std::exception& e) {
        ge[i] = e.what();
        if (ge[i].empty()) ge[i] = "evaluation failed";
      }
    }
  };
  const unsigned nthreads =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), unsigned(ng)));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < ng; ++i) record(out, grid_points[i], gv[i], ge[i]);
  if (out.best_x.empty()) throw NumericalError("optimizer: every grid evaluation failed; first: " + ge[0]);

  if (max_evals == 0) return out;
  const gsl_multimin_fminimizer_type* type = gsl_multimin_fminimizer_nmsimplex2;
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> nm(
      gsl_multimin_fminimizer_alloc(type, dim), gsl_multimin_fminimizer_free);
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x0(gsl_vector_alloc(dim), gsl_vector_free);
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(dim), gsl_vector_free);
  for (std::size_t i = 0; i < dim; ++i) {
    gsl_vector_set(x0.get(), i, (out.best_x[i] - bounds[i].lo) / bounds[i].span());
    gsl_vector_set(step.get(), i, initial_step);
  }
  NmContext ctx{&f, &bounds, &out, max_evals};
  gsl_multimin_function fn{nm_objective, dim, &ctx};
  gsl_error_handler_t* old = gsl_set_error_handler_off();
  if (gsl_multimin_fminimizer_set(nm.get(), &fn, x0.get(), step.get()) == GSL_SUCCESS) {
    while (ctx.used < ctx.budget) {
      if (gsl_multimin_fminimizer_iterate(nm.get()) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm.get()), simplex_tol) == GSL_SUCCESS)
        break;
    }
  }
  gsl_set_error_handler(old);
  return out;
}

OptimizationResult optimize_transfer(const OptimizationProblem& pr) {
  if (pr.grid < 2) throw ValidationError("optimizer: grid needs at least 2 points per axis");
  if (!pr.free_omega && !pr.free_detuning) throw ValidationError("optimizer: no free variables");
  if (pr.free_omega && !(pr.omega0.lo > 0.0 && pr.omega0.hi > pr.omega0.lo))
    throw ValidationError("optimizer: Omega0 bounds must be positive and ordered");
  if (pr.free_detuning && !(pr.detuning.hi > pr.detuning.lo))
    throw ValidationError("optimizer: detuning bounds must be ordered");

  const SystemParams& base = pr.base;
  const double det_lo = pr.free_detuning ? pr.detuning.lo : base.laser_detuning_offset;
  const double det_hi = pr.free_detuning ? pr.detuning.hi : base.laser_detuning_offset;
  const ScenarioModes sm = prepare_modes(base, det_lo, det_hi, pr.window_scale);
  const bool lossy = base.gamma_c > 0.0 || base.gamma_f > 0.0;
  const LossMatrix loss = build_loss(sm.table, {base.gamma_c, base.gamma_f});

  // Variable layout: [Omega (or Omega_A)], [detuning], [Omega_B].
  std::vector<Bounds> bounds;
  if (pr.free_omega) bounds.push_back(pr.omega0);
  if (pr.free_detuning) bounds.push_back(pr.detuning);
  const bool indep = pr.free_omega && pr.independent_omegas;
  if (indep) bounds.push_back(pr.omega0);

  struct Point {
    double OA, OB, det;
  };
  auto decode = [&](const std::vector<double>& x) {
    Point q{base.pulses.Omega0_A, base.pulses.Omega0_B, base.laser_detuning_offset};
    std::size_t k = 0;
    if (pr.free_omega) q.OA = q.OB = x[k++];
    if (pr.free_detuning) q.det = x[k++];
    if (indep) q.OB = x[k++];
    return q;
  };
  std::mutex dwell_mutex;
  std::map<std::vector<double>, double> dwell;
  auto evaluate = [&](const std::vector<double>& x) {
    const Point q = decode(x);
    SystemParams p = base;
    p.pulses.Omega0_A = q.OA;
    p.pulses.Omega0_B = q.OB;
    const Trajectory tr = integrate(p, sm.table, lossy ? &loss : nullptr,
                                    kSpeedOfLight * sm.k_selected + q.det, pr.dynamics);
    const double P = std::clamp(std::norm(tr.final_state.c001), 0.0, 1.0);
    const double R = P > 0.0 ? dwell_ratio(tr, p.fiber_length(), p.kappa_c())
                             : std::numeric_limits<double>::quiet_NaN();
    {
      std::lock_guard<std::mutex> lock(dwell_mutex);
      dwell[x] = R;
    }
    return std::pair{P, R};
  };
  auto objective = [&](const std::vector<double>& x) { return evaluate(x).first; };

  std::vector<std::vector<double>> grid;
  const int n = pr.grid;
  auto lin = [n](const Bounds& b, int i) { return b.lo + b.span() * double(i) / double(n - 1); };
  const int n_om = pr.free_omega ? n : 1, n_det = pr.free_detuning ? n : 1;
  for (int i = 0; i < n_om; ++i) {
    for (int j = 0; j < n_det; ++j) {
      std::vector<double> x;
      if (pr.free_omega) x.push_back(lin(pr.omega0, i));
      if (pr.free_detuning) x.push_back(lin(pr.detuning, j));
      if (indep) x.push_back(lin(pr.omega0, i));
      grid.push_back(std::move(x));
    }
  }

  const MaximizeResult mr =
      maximize(objective, bounds, grid, pr.max_evals, pr.simplex_tol, 1.0 / double(n - 1));

  OptimizationResult res;
  auto params_at = [&](const std::vector<double>& x) {
    const Point q = decode(x);
    SystemParams p = base;
    p.pulses.Omega0_A = q.OA;
    p.pulses.Omega0_B = q.OB;
    p.laser_detuning_offset = q.det;
    return p;
  };
  auto append = [&](const MaximizeResult& m, int stage, const std::vector<double>& P) {
    for (std::size_t i = 0; i < m.xs.size(); ++i) {
      const Point q = decode(m.xs[i]);
      TracePoint tp;
      tp.eval = long(res.trace.size());
      tp.Omega0_A = q.OA;
      tp.Omega0_B = q.OB;
      tp.detuning = q.det;
      tp.P = P[i];
      const auto it = dwell.find(m.xs[i]);
      tp.R = it != dwell.end() ? it->second : std::numeric_limits<double>::quiet_NaN();
      tp.stage = stage;
      tp.ok = m.errors[i].empty();
      tp.error = m.errors[i];
      res.trace.push_back(std::move(tp));
    }
  };
  append(mr, 1, mr.fs);
  const Point b = decode(mr.best_x);
  res.best_Omega0_A = b.OA;
  res.best_Omega0_B = b.OB;
  res.best_detuning = b.det;
  res.best_P = mr.best_f;
  res.best_params = params_at(mr.best_x);
  res.chosen_params = res.best_params;
  res.chosen_P = res.best_P;
  res.chosen_R = dwell.at(mr.best_x);

  if (!lossy && pr.dwell_tolerance > 0.0 && pr.max_evals > 0) {
    // Seeds: lowest-R grid points of near-maximal P, refined under a penalty on P.
    const double floor_P = res.best_P - pr.dwell_tolerance;
    const double seed_P = res.best_P - 100.0 * pr.dwell_tolerance;
    std::vector<std::size_t> seeds;
    for (std::size_t i = 0; i < mr.xs.size(); ++i)
      if (mr.errors[i].empty() && mr.fs[i] >= seed_P && std::isfinite(dwell.at(mr.xs[i])))
        seeds.push_back(i);
    std::stable_sort(seeds.begin(), seeds.end(),
                     [&](std::size_t i, std::size_t j) { return dwell.at(mr.xs[i]) < dwell.at(mr.xs[j]); });
    if (seeds.size() > 3) seeds.resize(3);

    std::vector<double> best_x = mr.best_x;
    double best_R = res.chosen_R, best_P2 = res.best_P;
    for (std::size_t i = 0; i < mr.xs.size(); ++i) {
      const double R = dwell.at(mr.xs[i]);
      if (mr.errors[i].empty() && mr.fs[i] >= floor_P && R < best_R) {
        best_x = mr.xs[i];
        best_R = R;
        best_P2 = mr.fs[i];
      }
    }
    const double weight = 10.0 * std::max(1.0, best_R) / pr.dwell_tolerance;
    const long budget = std::max(1L, long(pr.max_evals) / long(std::max<std::size_t>(1, seeds.size())));
    for (const std::size_t seed : seeds) {
      std::vector<double> stage_P;
      auto penalized = [&](const std::vector<double>& x) {
        const auto [P, R] = evaluate(x);
        stage_P.push_back(P);
        if (!std::isfinite(R)) return -1e6;
        if (P >= floor_P && R < best_R) {
          best_R = R;
          best_P2 = P;
          best_x = x;
        }
        return -(R + weight * std::max(0.0, floor_P - P));
      };
      const MaximizeResult m2 =
          maximize(penalized, bounds, {mr.xs[seed]}, int(budget), pr.simplex_tol, 0.5 / double(n - 1));
      // stage_P holds successful evaluations only; failures scored zero.
      std::vector<double> P2;
      std::size_t k = 0;
      for (std::size_t i = 0; i < m2.xs.size(); ++i)
        P2.push_back(m2.errors[i].empty() ? stage_P[k++] : 0.0);
      append(m2, 2, P2);
      for (std::size_t i = 0; i < P2.size(); ++i)
        if (P2[i] > res.best_P) {
          res.best_P = P2[i];
          const Point q = decode(m2.xs[i]);
          res.best_Omega0_A = q.OA;
          res.best_Omega0_B = q.OB;
          res.best_detuning = q.det;
          res.best_params = params_at(m2.xs[i]);
        }
    }
    res.dwell_stage = true;
    res.chosen_params = params_at(best_x);
    res.chosen_P = best_P2;
    res.chosen_R = best_R;
  }
  res.evaluations = long(res.trace.size());
  return res;
}

void write_optimizer_trace_csv(const std::string& path, const OptimizationResult& r) {
  csv::Writer w(path);
  bool indep = false;
  for (const auto& t : r.trace) indep = indep || t.Omega0_A != t.Omega0_B;
  std::vector<std::string> head{"eval", "Omega0_rad_s", "detuning_rad_s", "P", "R", "stage"};
  if (indep) head.push_back("Omega0_B_rad_s");
  w.row(head);
  for (const auto& t : r.trace) {
    std::vector<std::string> row{csv::num(t.eval), csv::num(t.Omega0_A), csv::num(t.detuning),
                                 t.ok ? csv::num(t.P) : std::string("nan"),
                                 t.ok && std::isfinite(t.R) ? csv::num(t.R) : std::string("nan"),
                                 csv::num(t.stage)};
    if (indep) row.push_back(csv::num(t.Omega0_B));
    w.row(row);
  }
}

}  // namespace phantom
