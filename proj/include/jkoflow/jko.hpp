#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jkoflow/energy.hpp"
#include "jkoflow/grid.hpp"
#include "jkoflow/interaction.hpp"

namespace jkoflow {

enum class SolverKind { kExact1d, kEntropic };

SolverKind parse_solver(const std::string& name);
std::string solver_name(SolverKind kind);

struct SolverOptions {
  SolverKind kind = SolverKind::kExact1d;
  double epsilon = 0.0;  // entropic regularization; 0 selects dx^2
  double tol = 1e-10;
  int max_iter = 0;  // 0 selects the solver's default
  bool best_effort = false;
  int threads = 0;  // species-parallel workers; 0 reads JKOFLOW_THREADS

  double effective_epsilon(const Grid& grid) const;
  int effective_max_iter() const;
};

class SpeciesSystem {
 public:
  SpeciesSystem(Grid grid, std::vector<InternalEnergy> energies, InteractionSpec interaction);

  int species() const { return static_cast<int>(energies_.size()); }
  const Grid& grid() const { return grid_; }
  const InternalEnergy& energy(int i) const { return energies_.at(static_cast<std::size_t>(i)); }
  const InteractionSpec& interaction() const { return interaction_; }

 private:
  Grid grid_;
  std::vector<InternalEnergy> energies_;
  InteractionSpec interaction_;
};

struct SpeciesStep {
  double w2sq = 0.0;       // W2^2(rho^k, rho^{k+1})
  double internal = 0.0;   // F_i(rho^{k+1})
  double potential = 0.0;  // V_i(rho^{k+1} | rho^k)
  // Step objective at the new density and at the previous density (the
  // comparison competitor). Entropic runs use the regularized objective.
  double objective_new = 0.0;
  double objective_prev = 0.0;
  std::optional<double> residual;  // optimality residual, exact1d only
  double mass_before_renorm = 1.0;
  double renorm_factor = 1.0;
  int iterations = 0;
  double solver_residual = 0.0;
  bool converged = true;
  double epsilon = 0.0;  // entropic runs
  // V_i[rho^k] on the grid, the frozen potential of this step.
  std::vector<double> frozen_potential;
};

struct StepRecord {
  int k = 0;
  double t = 0.0;
  std::vector<Density> densities;
  std::vector<SpeciesStep> species;
};

struct Trajectory {
  double h = 0.0;
  double T = 0.0;
  SolverOptions solver;
  std::vector<Density> initial;
  std::vector<StepRecord> steps;  // steps[k-1] holds rho^k

  int step_count() const { return static_cast<int>(steps.size()); }
  const Density& density(int k, int i) const;
};

struct StepOutput {
  Density density;
  SpeciesStep record;
};

// One proximal step for species i with the interaction frozen at `prev`.
StepOutput jko_step(const SpeciesSystem& sys, std::span<const Density> prev, int i, double h,
                    const SolverOptions& solver);

// N = ceil(T / h) steps; all species of a step see the same frozen vector.
// Throws SolverError (with the step index in the message) on inner-solver
// failure unless solver.best_effort is set.
Trajectory run_scheme(const SpeciesSystem& sys, std::vector<Density> initial, double h, double T,
                      const SolverOptions& solver);

// Piecewise-constant interpolation: rho^k for t in ((k-1)h, kh], rho^0 at 0.
const Density& interpolate(const Trajectory& traj, double t, int i);

// L1 norm of (x - T_back(x)) rho + h grad V rho + h grad P(rho), with T_back
// the optimal map from `next` to `prev` (1-D only, from smooth_map_1d).
double optimality_residual(const Density& next, const Density& prev,
                           const ScalarField& frozen_potential, const InternalEnergy& energy,
                           double h);
// From a stored step; empty for entropic runs.
std::optional<double> optimality_residual(const Trajectory& traj, const SpeciesSystem& sys,
                                           int k, int i);

// Worker count from JKOFLOW_THREADS, else the hardware concurrency.
int default_thread_count();

}  // namespace jkoflow
