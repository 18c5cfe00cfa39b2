#pragma once

#include <vector>

#include "jkoflow/energy.hpp"
#include "jkoflow/grid.hpp"

namespace jkoflow::detail {

struct InnerResult {
  std::vector<double> masses;  // per cell, before renormalization
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  // Set by solvers whose objective is not the grid objective: the value at
  // the returned iterate and at the previous iterate (the competitor).
  bool has_objectives = false;
  double objective_new = 0.0;
  double objective_prev = 0.0;
  // Set by the Lagrangian solver: exact W2^2 between its iterates.
  bool has_w2sq = false;
  double w2sq = 0.0;
};

// Piecewise-constant measure on moving intervals [X_j, X_{j+1}] with fixed
// masses w_j (zero-mass intervals are vacuum gaps).
struct QuantileState {
  std::vector<double> X;
  std::vector<double> w;
};

// Exact conversion of a 1-D grid density (nonempty cells become intervals).
QuantileState quantile_state(const Density& rho);
// Conservative binning of the state onto the grid, as cell masses.
std::vector<double> project_masses(const QuantileState& state, const Grid& grid);

// One JKO step on a 1-D grid:
//   min (1/2h) W2^2(rho, prev) + sum F(rho_c) dx + sum V_c rho_c dx
// over piecewise-constant rho, with W2 between piecewise-constant measures.
// Projected Newton on the cell CDF; convergence is measured by the
// mass-weighted deviation sum_c m_c |g_c - mean(g)| of the first variation.
InnerResult exact1d_step(const Density& prev, const InternalEnergy& energy,
                         const ScalarField& potential, double h, double tol, int max_iter);

// Objective and gradient of exact1d_step at cell masses m, exposed for tests.
struct Exact1dEvaluation {
  double objective = 0.0;
  std::vector<double> gradient;  // d objective / d m_c
};
Exact1dEvaluation exact1d_evaluate(const Density& prev, const InternalEnergy& energy,
                                   const ScalarField& potential, double h,
                                   const std::vector<double>& masses);

// JKO step in Lagrangian variables for power-law energies: the interval
// masses are fixed and the breakpoints X move, so fronts are not tied to the
// grid. V is a natural cubic spline through the cell centers, integrated by
// the midpoint rule. `state` is advanced in place.
InnerResult lagrangian_step(QuantileState& state, const Grid& grid, const InternalEnergy& energy,
                            const ScalarField& potential, double h, double tol, int max_iter);

// Newton direction for a tridiagonal Hessian (diag hd over n+1 nodes, off
// ho between e and e+1) and gradient gG, with nodes grouped: gid[e] is the
// group of node e, consecutive nodes share or advance groups, and groups
// marked in `fixed` do not move.
std::vector<double> solve_grouped(const std::vector<double>& hd, const std::vector<double>& ho,
                                  const std::vector<double>& gG, const std::vector<int>& gid,
                                  int groups, const std::vector<bool>& fixed);

// Entropic JKO step by generalized Sinkhorn scaling in the log domain.
InnerResult entropic_step(const Density& prev, const InternalEnergy& energy,
                          const ScalarField& potential, double h, double epsilon, double tol,
                          int max_iter);

}  // namespace jkoflow::detail
