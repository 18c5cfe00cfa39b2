#include "jkoflow/jko.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>

#include "jkoflow/error.hpp"
#include "jkoflow/solvers.hpp"
#include "jkoflow/transport.hpp"

namespace jkoflow {

SolverKind parse_solver(const std::string& name) {
  if (name == "exact1d") return SolverKind::kExact1d;
  if (name == "entropic") return SolverKind::kEntropic;
  throw ConfigError("unknown solver '" + name + "' (expected exact1d or entropic)");
}

std::string solver_name(SolverKind kind) {
  return kind == SolverKind::kExact1d ? "exact1d" : "entropic";
}

double SolverOptions::effective_epsilon(const Grid& grid) const {
  if (epsilon > 0.0) return epsilon;
  const double dx = grid.axis(0).spacing();
  return dx * dx;
}

int SolverOptions::effective_max_iter() const {
  if (max_iter > 0) return max_iter;
  return kind == SolverKind::kExact1d ? 200 : 100000;
}

int default_thread_count() {
  if (const char* env = std::getenv("JKOFLOW_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SpeciesSystem::SpeciesSystem(Grid grid, std::vector<InternalEnergy> energies,
                             InteractionSpec interaction)
    : grid_(std::move(grid)),
      energies_(std::move(energies)),
      interaction_(std::move(interaction)) {
  if (energies_.empty()) throw ConfigError("species system needs at least one species");
  if (interaction_.species() != species())
    throw ConfigError("interaction species count does not match the energies");
}

const Density& Trajectory::density(int k, int i) const {
  if (k == 0) return initial.at(static_cast<std::size_t>(i));
  return steps.at(static_cast<std::size_t>(k - 1)).densities.at(static_cast<std::size_t>(i));
}

namespace {

double squared_distance(const Density& a, const Density& b) {
  if (a.grid().dim() == 1) return w2_exact_1d(a, b).cost;
  const double dx = a.grid().axis(0).spacing();
  SinkhornOptions opt;
  opt.epsilon = dx * dx;
  return std::max(0.0, sinkhorn_divergence(a, b, opt));
}

}  // namespace

double optimality_residual(const Density& next, const Density& prev,
                           const ScalarField& frozen_potential, const InternalEnergy& energy,
                           double h) {
  if (next.grid().dim() != 1) throw ConfigError("optimality_residual: requires a 1-D grid");
  require_same_grid(next.grid(), prev.grid(), "optimality_residual");
  const Grid& g = next.grid();
  const auto back = smooth_map_1d(next, prev);
  const VectorField dV = discrete_gradient(frozen_potential);
  ScalarField P{g, std::vector<double>(g.size())};
  for (std::size_t c = 0; c < g.size(); ++c) P.values[c] = energy.pressure(next[c]);
  const VectorField dP = discrete_gradient(P);
  double s = 0.0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const double x = g.center(c)[0];
    const double r = (x - back[c]) * next[c] + h * dV.components[0][c] * next[c] +
                     h * dP.components[0][c];
    s += std::abs(r);
  }
  return s * g.cell_volume();
}

std::optional<double> optimality_residual(const Trajectory& traj, const SpeciesSystem& sys,
                                          int k, int i) {
  if (traj.solver.kind != SolverKind::kExact1d) return std::nullopt;
  if (k < 1 || k > traj.step_count()) throw ConfigError("optimality_residual: bad step index");
  const auto& rec = traj.steps[static_cast<std::size_t>(k - 1)].species.at(i);
  const ScalarField V{sys.grid(), rec.frozen_potential};
  return optimality_residual(traj.density(k, i), traj.density(k - 1, i), V, sys.energy(i),
                             traj.h);
}

namespace {

// Power-law species on the exact1d path run in Lagrangian variables; `state`
// carries the breakpoints between steps (null: rebuilt from the density).
StepOutput step_impl(const SpeciesSystem& sys, std::span<const Density> prev, int i, double h,
                     const SolverOptions& solver, detail::QuantileState* state) {
  if (!(h > 0.0)) throw ConfigError("jko_step: h must be positive");
  if (static_cast<int>(prev.size()) != sys.species())
    throw ConfigError("jko_step: expected one density per species");
  const Grid& grid = sys.grid();
  const Density& q = prev[static_cast<std::size_t>(i)];
  require_same_grid(grid, q.grid(), "jko_step");
  const InternalEnergy& energy = sys.energy(i);
  const ScalarField V = assemble_potential(sys.interaction(), i, prev);

  detail::InnerResult inner;
  SpeciesStep rec;
  if (solver.kind == SolverKind::kExact1d) {
    if (grid.dim() != 1) throw ConfigError("exact1d solver requires a 1-D grid");
    if (energy.kind() == EnergyKind::kPower) {
      detail::QuantileState local;
      if (!state) {
        local = detail::quantile_state(q);
        state = &local;
      }
      inner = detail::lagrangian_step(*state, grid, energy, V, h, solver.tol,
                                      solver.effective_max_iter());
    } else {
      inner = detail::exact1d_step(q, energy, V, h, solver.tol, solver.effective_max_iter());
    }
  } else {
    rec.epsilon = solver.effective_epsilon(grid);
    inner = detail::entropic_step(q, energy, V, h, rec.epsilon, solver.tol,
                                  solver.effective_max_iter());
  }
  rec.iterations = inner.iterations;
  rec.solver_residual = inner.residual;
  rec.converged = inner.converged;
  if (!inner.converged && !solver.best_effort) {
    throw SolverError("species " + std::to_string(i) + ": " + solver_name(solver.kind) +
                          " inner solver did not converge",
                      inner.residual, inner.iterations);
  }

  double mass = 0.0;
  for (double m : inner.masses) mass += m;
  rec.mass_before_renorm = mass;
  rec.renorm_factor = 1.0 / mass;
  const double vol = grid.cell_volume();
  std::vector<double> values(inner.masses.size());
  for (std::size_t c = 0; c < values.size(); ++c) values[c] = inner.masses[c] / (mass * vol);
  Density next(grid, std::move(values));

  rec.w2sq = inner.has_w2sq ? inner.w2sq : squared_distance(q, next);
  rec.internal = eval_functional(energy, next);
  rec.potential = integrate(V, next);
  if (inner.has_objectives) {
    rec.objective_new = inner.objective_new;
    rec.objective_prev = inner.objective_prev;
  } else {
    rec.objective_new = rec.w2sq / (2.0 * h) + rec.internal + rec.potential;
    rec.objective_prev = eval_functional(energy, q) + integrate(V, q);
  }
  if (solver.kind == SolverKind::kExact1d) rec.residual = optimality_residual(next, q, V, energy, h);
  rec.frozen_potential = V.values;
  return StepOutput{std::move(next), std::move(rec)};
}

}  // namespace

StepOutput jko_step(const SpeciesSystem& sys, std::span<const Density> prev, int i, double h,
                    const SolverOptions& solver) {
  return step_impl(sys, prev, i, h, solver, nullptr);
}

Trajectory run_scheme(const SpeciesSystem& sys, std::vector<Density> initial, double h, double T,
                      const SolverOptions& solver) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("run_scheme: h must be positive");
  if (!(T >= 0.0) || !std::isfinite(T)) throw ConfigError("run_scheme: T must be >= 0");
  if (static_cast<int>(initial.size()) != sys.species())
    throw ConfigError("run_scheme: expected one initial density per species");
  for (const auto& d : initial) require_same_grid(sys.grid(), d.grid(), "run_scheme");

  Trajectory traj;
  traj.h = h;
  traj.T = T;
  traj.solver = solver;
  traj.initial = std::move(initial);
  const int steps = std::max(1, static_cast<int>(std::ceil(T / h - 1e-9)));
  const int l = sys.species();
  const int workers = std::min(l, solver.threads > 0 ? solver.threads : default_thread_count());

  std::vector<Density> current = traj.initial;
  std::vector<detail::QuantileState> states(static_cast<std::size_t>(l));
  std::vector<bool> lagrangian(static_cast<std::size_t>(l), false);
  if (solver.kind == SolverKind::kExact1d && sys.grid().dim() == 1) {
    for (int i = 0; i < l; ++i) {
      if (sys.energy(i).kind() != EnergyKind::kPower) continue;
      lagrangian[i] = true;
      states[i] = detail::quantile_state(current[i]);
    }
  }
  for (int k = 1; k <= steps; ++k) {
    std::vector<std::optional<StepOutput>> out(static_cast<std::size_t>(l));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(l));
    auto work = [&](int i) {
      try {
        out[i] = step_impl(sys, current, i, h, solver, lagrangian[i] ? &states[i] : nullptr);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    if (workers > 1) {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (int i = w; i < l; i += workers) work(i);
        });
      }
      for (auto& t : pool) t.join();
    } else {
      for (int i = 0; i < l; ++i) work(i);
    }
    for (int i = 0; i < l; ++i) {
      if (!errors[i]) continue;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const SolverError& e) {
        throw SolverError("step " + std::to_string(k) + ": " + e.what(), e.residual(),
                          e.iterations());
      }
    }
    StepRecord rec;
    rec.k = k;
    rec.t = k * h;
    for (int i = 0; i < l; ++i) {
      rec.densities.push_back(std::move(out[i]->density));
      rec.species.push_back(std::move(out[i]->record));
    }
    current = rec.densities;
    traj.steps.push_back(std::move(rec));
  }
  return traj;
}

const Density& interpolate(const Trajectory& traj, double t, int i) {
  if (!(t >= 0.0)) throw ConfigError("interpolate: t must be >= 0");
  if (t == 0.0) return traj.density(0, i);
  const int k = std::max(1, static_cast<int>(std::ceil(t / traj.h - 1e-9)));
  if (k > traj.step_count()) throw ConfigError("interpolate: t beyond the trajectory");
  return traj.density(k, i);
}

}  // namespace jkoflow
