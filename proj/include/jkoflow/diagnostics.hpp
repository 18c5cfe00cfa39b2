#pragma once

#include <array>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jkoflow/grid.hpp"
#include "jkoflow/jko.hpp"

namespace jkoflow {

// One named check. pass <=> lower <= statistic <= bound.
struct Check {
  std::string name;
  double statistic = 0.0;
  double bound = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  bool pass = false;
};

struct DiagnosticsReport {
  std::vector<Check> checks;

  const Check& add(std::string name, double statistic, double bound,
                   double lower = -std::numeric_limits<double>::infinity());
  bool pass() const;
  const Check* find(const std::string& name) const;
};

// Per-step time series of species i; entry k is step k (k = 0 is the
// initial datum, whose increment, residual and action are empty).
struct SpeciesSeries {
  std::vector<double> t;
  std::vector<double> mass;  // before renormalization
  std::vector<double> moment;
  std::vector<double> internal;
  std::vector<double> potential;  // against the frozen potential of the step
  std::vector<double> w2sq;
  std::vector<std::optional<double>> residual;
  std::vector<double> action;
};
SpeciesSeries species_series(const Trajectory& traj, const SpeciesSystem& sys, int i);

// h sum_k ( ||grad u_k||^2 + ||u_k||^2 ),  u_k = (rho^k)^(m/2), k = 1..N.
double gradient_estimate_L2H1(const Trajectory& traj, const SpeciesSystem& sys, int i);
// h sum_k ( ||(rho^k)^m||_L1 + ||grad (rho^k)^m||_L1 ).
double gradient_estimate_L1W11(const Trajectory& traj, const SpeciesSystem& sys, int i);

// psi(r, m) = |m|^2 / r, psi(0, 0) = 0, psi(0, m != 0) = +inf.
double action_density(double r, const std::array<double, 2>& m);
// h sum_k sum_c psi(rho^k_c, m^k_c) |cell| for given cell momenta.
double benamou_brenier_action(std::span<const Density> rho, std::span<const VectorField> momentum,
                              double h);
// Per-step action sum_e psi(r_e, m_e) |cell| of the velocity field
// grad P(rho^k) + rho^k grad V[rho^{k-1}], evaluated on cell faces so that
// vacuum next to a front carries no spurious momentum. Entry k-1 is step k.
std::vector<double> step_actions(const Trajectory& traj, const SpeciesSystem& sys, int i);
double benamou_brenier_action(const Trajectory& traj, const SpeciesSystem& sys, int i);

// max over sampled step pairs of W2(rho^k, rho^j) / (|t_k - t_j| + h)^(1/2).
// 1-D only (empty otherwise).
std::optional<double> holder_constant(const Trajectory& traj, int i);

// F along the McCann interpolant (t in [0, 1]) of the piecewise-constant
// measures, without binning: the monotone coupling splits the mass into
// pieces of constant density whose lengths are affine in t. 1-D only.
double displacement_energy_1d(const InternalEnergy& e, const Density& rho, const Density& mu,
                              double t);

// sum_i W2^2(a_i, b_i): exact in 1-D, debiased Sinkhorn with eps = dx^2 in 2-D.
double vector_distance(std::span<const Density> a, std::span<const Density> b);

// Least-squares slope of log d against t over the second half of the
// samples (nonpositive d are dropped). Returns 0 when fewer than two
// positive samples remain.
double fit_growth_rate(std::span<const double> t, std::span<const double> d);

struct ContractionReport {
  std::vector<double> t;
  std::vector<double> distance;  // sum_i W2^2 at each t
  double growth_rate = 0.0;
  double c_cert = 0.0;
  double c_lip = 0.0;
  double margin = 0.5;
  double bound = 0.0;  // 4 c_cert + margin
  double epsilon = 0.0;  // 2-D: Sinkhorn regularization of the distances
  bool pass = false;
};

ContractionReport contraction_from_series(std::vector<double> t, std::vector<double> d,
                                          double c_cert, double epsilon);
// Runs both trajectories with identical settings and fits the growth rate of
// log sum_i W2^2. c_cert is the certified C_hess of the interaction.
ContractionReport contraction_check(const SpeciesSystem& sys, std::vector<Density> first,
                                    std::vector<Density> second, double h, double T,
                                    const SolverOptions& solver);

enum class BaselineKind { kHeat, kBarenblatt, kGibbs };
BaselineKind parse_baseline(const std::string& name);
std::string baseline_name(BaselineKind kind);

struct BaselineParams {
  double sigma0 = 0.3;  // heat: initial standard deviation
  double t0 = 0.5;      // barenblatt: start time
  double T = 0.25;      // heat, barenblatt: final time
  double radius = 3.0;  // gibbs: confinement radius
  int steps = 100;      // gibbs: number of steps
};

// The single-species system of a baseline: heat and gibbs use the entropy,
// barenblatt F(x) = x^2; gibbs adds the smoothed confinement.
SpeciesSystem baseline_system(BaselineKind kind, const BaselineParams& p, const Grid& grid);
// Analytic solution sampled at cell centers at time t after the start.
Density baseline_exact(BaselineKind kind, const BaselineParams& p, const Grid& grid, double t);

struct BaselineReport {
  BaselineKind kind = BaselineKind::kHeat;
  double h = 0.0;
  double T = 0.0;
  double l1_error = 0.0;
  double w2_error = 0.0;  // gibbs: W2 drift from the initial density
  double epsilon = 0.0;   // entropic runs
  double max_residual = 0.0;  // exact1d runs
  Trajectory trajectory;
};
BaselineReport closed_form_baseline(BaselineKind kind, const BaselineParams& p, double h,
                                    const Grid& grid, const SolverOptions& solver);

// Scheme estimates over a list of time steps (each level a halving):
// mass, renormalization and dissipation at every step of every level;
// max_k M and max_k F stable within `stability`; the energy bound
// max_k F <= F(rho_0) + C_lip^2 T; ratios of sum_k W2^2 between consecutive
// levels inside [0.3, 0.8]; the 1/2-Hoelder constant stable within 1.5.
struct EstimatesOptions {
  double stability = 1.2;
  double ratio_lo = 0.3;
  double ratio_hi = 0.8;
};
DiagnosticsReport scheme_estimates(const SpeciesSystem& sys, const std::vector<Density>& initial,
                                   std::span<const double> hs, double T,
                                   const SolverOptions& solver,
                                   const EstimatesOptions& opt = {});

// Per-run checks written to the run summary: mass and renormalization
// bounds, the dissipation inequality, finite action, and (exact1d) the
// largest optimality residual.
DiagnosticsReport analyze_trajectory(const Trajectory& traj, const SpeciesSystem& sys);

}  // namespace jkoflow
