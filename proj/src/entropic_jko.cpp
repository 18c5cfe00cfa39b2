// Entropic JKO step by generalized Sinkhorn scaling: the plan is
// gamma = diag(a) xi diag(b) with xi = exp(-C/eps); the a-update enforces the
// first marginal q, the b-update applies the cell-wise KL prox of the energy.

#include <algorithm>
#include <cmath>

#include "jkoflow/error.hpp"
#include "jkoflow/solvers.hpp"
#include "jkoflow/transport.hpp"

namespace jkoflow::detail {

namespace {
constexpr double kLogFloor = 1e-300;
}

InnerResult entropic_step(const Density& prev, const InternalEnergy& energy,
                          const ScalarField& potential, double h, double epsilon, double tol,
                          int max_iter) {
  if (!(h > 0.0)) throw ConfigError("entropic_step: h must be positive");
  require_same_grid(prev.grid(), potential.grid, "entropic_step");
  const Grid& grid = prev.grid();
  const LogKernel K(grid, epsilon);
  const std::size_t n = grid.size();
  const double vol = grid.cell_volume();
  const double log_vol = std::log(vol);
  const double tau = 2.0 * h / epsilon;

  std::vector<double> q(n), lq(n);
  for (std::size_t c = 0; c < n; ++c) {
    q[c] = prev[c] * vol;
    lq[c] = std::log(std::max(q[c], kLogFloor));
  }
  std::vector<double> la(n), lb(n, 0.0), kb(n), ka(n), p(n, 0.0), lp(n);
  InnerResult res;
  res.residual = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    K.apply(lb, kb);
    for (std::size_t c = 0; c < n; ++c) la[c] = lq[c] - kb[c];
    K.apply(la, ka);
    double change = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double lw = ka[c] - log_vol - tau * potential.values[c];
      lp[c] = kl_prox_log(energy, tau, lw) + log_vol;
      lb[c] = lp[c] - ka[c];
      const double pc = std::exp(lp[c]);
      change += std::abs(pc - p[c]);
      p[c] = pc;
    }
    res.iterations = it;
    res.residual = change;
    if (it > 1 && change <= tol) {
      res.converged = true;
      break;
    }
  }
  res.masses = p;

  // J_eps(gamma) = <C, gamma> + eps sum gamma (log gamma - 1)
  //             = eps (sum_i q'_i log a_i + sum_j p_j log b_j - sum gamma).
  K.apply(lb, kb);
  double plan = 0.0, total = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double qc = std::exp(la[c] + kb[c]);
    plan += qc * la[c] + p[c] * lb[c];
    total += p[c];
  }
  plan = epsilon * (plan - total);
  const double inv2h = 0.5 / h;
  auto energy_of = [&](const std::vector<double>& masses) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c)
      s += vol * energy.F(masses[c] / vol) + potential.values[c] * masses[c];
    return s;
  };
  res.has_objectives = true;
  res.objective_new = inv2h * plan + energy_of(p);

  // Comparison plan: the entropic self-coupling of q, in the same J_eps form.
  SinkhornOptions opt;
  opt.epsilon = epsilon;
  opt.tol = std::max(tol, 1e-12);
  const double self = sinkhorn(prev, prev, opt).objective;
  double qlogq = 0.0;
  for (double v : q)
    if (v > 0.0) qlogq += v * std::log(v);
  res.objective_prev = inv2h * (self + 2.0 * epsilon * qlogq - epsilon) + energy_of(q);
  return res;
}

}  // namespace jkoflow::detail
