// Lagrangian JKO step for power-law energies. The unknowns are the
// breakpoints X_0 <= ... <= X_M of intervals with fixed masses w_j:
//   (1/2h) sum_j w_j (d_j^2 + d_j d_{j+1} + d_{j+1}^2) / 3      d = X - X_prev
//   + sum_j l_j F(w_j / l_j)                                    l_j = X_{j+1} - X_j
//   + sum_j w_j V((X_j + X_{j+1}) / 2)
// The first term is the exact W2^2 between the two piecewise-constant
// measures. Everything is tridiagonal in X.

#include <algorithm>
#include <cmath>

#include "jkoflow/error.hpp"
#include "jkoflow/solvers.hpp"
#include "jkoflow/transport.hpp"

namespace jkoflow::detail {

QuantileState quantile_state(const Density& rho) {
  if (rho.grid().dim() != 1) throw ConfigError("quantile_state: requires a 1-D grid");
  const Axis& ax = rho.grid().axis(0);
  const double dx = ax.spacing();
  QuantileState s;
  for (int c = 0; c < ax.cells; ++c) {
    const double m = rho[c] * dx;
    if (!(m > 0.0)) continue;
    if (s.X.empty()) {
      s.X.push_back(ax.edge(c));
    } else if (ax.edge(c) > s.X.back()) {
      s.w.push_back(0.0);
      s.X.push_back(ax.edge(c));
    }
    s.w.push_back(m);
    s.X.push_back(ax.edge(c + 1));
  }
  return s;
}

// Cell masses from the monotone cubic interpolant of the cumulative mass
// through the breakpoints. Piecewise-constant binning would leave O(dx)
// jitter wherever interval and cell lengths beat against each other.
std::vector<double> project_masses(const QuantileState& state, const Grid& grid) {
  const Axis& ax = grid.axis(0);
  const int n = ax.cells;
  std::vector<double> S(state.X.size(), 0.0);
  for (std::size_t j = 0; j < state.w.size(); ++j) S[j + 1] = S[j] + state.w[j];
  const MonotoneCdf F(state.X, S);
  std::vector<double> out(n, 0.0);
  double lo = 0.0;
  for (int c = 0; c < n; ++c) {
    const double hi = c + 1 == n ? F.total() : std::max(F(ax.edge(c + 1)), lo);
    out[c] = hi - lo;
    lo = hi;
  }
  return out;
}

namespace {

class LagrangianProblem {
 public:
  LagrangianProblem(const QuantileState& prev, const Grid& grid, const InternalEnergy& energy,
                    const ScalarField& potential, double h)
      : prev_(prev), energy_(energy), V_(potential.values), h_(h) {
    const Axis& ax = grid.axis(0);
    lower_ = ax.lower;
    upper_ = ax.upper;
    dx_ = ax.spacing();
    n_ = ax.cells;
    M_.assign(n_, 0.0);
    if (n_ > 2) {
      // Tridiagonal system M_{c-1} + 4 M_c + M_{c+1} = 6 (V_{c+1} - 2 V_c + V_{c-1}) / dx^2.
      const int k = n_ - 2;
      std::vector<double> diag(k, 4.0), rhs(k);
      for (int c = 1; c <= k; ++c) rhs[c - 1] = 6.0 * (V_[c + 1] - 2.0 * V_[c] + V_[c - 1]) / (dx_ * dx_);
      for (int q = 1; q < k; ++q) {
        const double f = 1.0 / diag[q - 1];
        diag[q] -= f;
        rhs[q] -= f * rhs[q - 1];
      }
      for (int q = k - 1; q >= 0; --q)
        M_[q + 1] = (rhs[q] - (q + 1 < k ? M_[q + 2] : 0.0)) / diag[q];
    }
  }

  double lower() const { return lower_; }
  double upper() const { return upper_; }

  // Natural cubic spline of V through the cell centers, continued linearly
  // beyond the outer centers (C^2 there because the end curvature is 0).
  void potential_at(double y, double& v, double& dv, double& d2v) const {
    const double u = (y - lower_) / dx_ - 0.5;
    if (n_ == 1) {
      v = V_[0];
      dv = d2v = 0.0;
      return;
    }
    if (u <= 0.0 || u >= n_ - 1) {
      const int c = u <= 0.0 ? 0 : n_ - 2;
      const double end = u <= 0.0 ? 0.0 : n_ - 1.0;
      const double slope = (V_[c + 1] - V_[c]) / dx_ +
                           (u <= 0.0 ? -(2.0 * M_[c] + M_[c + 1]) : (M_[c] + 2.0 * M_[c + 1])) *
                               dx_ / 6.0;
      v = V_[static_cast<int>(end)] + slope * (u - end) * dx_;
      dv = slope;
      d2v = 0.0;
      return;
    }
    const int c = std::min(static_cast<int>(std::floor(u)), n_ - 2);
    const double b = u - c, a = 1.0 - b;
    v = a * V_[c] + b * V_[c + 1] +
        ((a * a * a - a) * M_[c] + (b * b * b - b) * M_[c + 1]) * dx_ * dx_ / 6.0;
    dv = (V_[c + 1] - V_[c]) / dx_ +
         (-(3.0 * a * a - 1.0) * M_[c] + (3.0 * b * b - 1.0) * M_[c + 1]) * dx_ / 6.0;
    d2v = a * M_[c] + b * M_[c + 1];
  }

  double transport(const std::vector<double>& X) const {
    double s = 0.0;
    for (std::size_t j = 0; j < prev_.w.size(); ++j) {
      const double d0 = X[j] - prev_.X[j], d1 = X[j + 1] - prev_.X[j + 1];
      s += prev_.w[j] * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    }
    return s;
  }

  double evaluate(const std::vector<double>& X, std::vector<double>* grad,
                  std::vector<double>* hd, std::vector<double>* ho,
                  double* gscale = nullptr) const {
    const std::size_t M = prev_.w.size();
    if (grad) grad->assign(M + 1, 0.0);
    if (hd) hd->assign(M + 1, 0.0);
    if (ho) ho->assign(M, 0.0);
    const double inv2h = 0.5 / h_;
    double J = inv2h * transport(X);
    if (gscale) *gscale = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      const double w = prev_.w[j];
      if (!(w > 0.0)) continue;
      const double l = X[j + 1] - X[j];
      const double rho = w / l;
      J += l * energy_.F(rho);
      double v, dv, d2v;
      potential_at(0.5 * (X[j] + X[j + 1]), v, dv, d2v);
      J += w * v;
      if (grad) {
        const double d0 = X[j] - prev_.X[j], d1 = X[j + 1] - prev_.X[j + 1];
        const double P = energy_.pressure(rho);
        (*grad)[j] += inv2h * w * (2.0 * d0 + d1) / 3.0 + P + 0.5 * w * dv;
        (*grad)[j + 1] += inv2h * w * (d0 + 2.0 * d1) / 3.0 - P + 0.5 * w * dv;
        // Displacements are differences of positions; their rounding enters too.
        if (gscale)
          *gscale += inv2h * w * (std::abs(d0) + std::abs(d1)) + 2.0 * P + w * std::abs(dv) +
                     1e-2 * inv2h * w * (std::abs(X[j]) + std::abs(X[j + 1]));
      }
      if (hd) {
        const double phi2 = rho * rho * energy_.d2F(rho) / l;
        const double t = inv2h * 2.0 * w / 3.0;
        // Only the convex part of V enters, keeping the Newton matrix definite.
        const double pv = 0.25 * w * std::max(d2v, 0.0);
        (*hd)[j] += t + phi2 + pv;
        (*hd)[j + 1] += t + phi2 + pv;
        (*ho)[j] += inv2h * w / 3.0 - phi2 + pv;
      }
    }
    return J;
  }

 private:
  const QuantileState& prev_;
  const InternalEnergy& energy_;
  const std::vector<double>& V_;
  double h_;
  double lower_ = 0.0, upper_ = 0.0, dx_ = 1.0;
  int n_ = 1;
  std::vector<double> M_;  // spline curvatures at the centers
};

}  // namespace

InnerResult lagrangian_step(QuantileState& state, const Grid& grid, const InternalEnergy& energy,
                            const ScalarField& potential, double h, double tol, int max_iter) {
  if (grid.dim() != 1) throw ConfigError("lagrangian_step: requires a 1-D grid");
  if (!(h > 0.0)) throw ConfigError("lagrangian_step: h must be positive");
  require_same_grid(grid, potential.grid, "lagrangian_step");
  const QuantileState prev = state;
  const LagrangianProblem p(prev, grid, energy, potential, h);
  const int M = static_cast<int>(prev.w.size());
  const double close = 1e-14 * (p.upper() - p.lower());

  std::vector<double> X = prev.X, g, hd, ho, trial;
  InnerResult res;
  double gscale = 0.0;
  double J = p.evaluate(X, &g, &hd, &ho, &gscale);
  for (int it = 0; it <= max_iter; ++it) {
    // Active constraints: box walls at the ends, closed vacuum gaps inside.
    const bool fix_left = X[0] <= p.lower() + close && g[0] > 0.0;
    const bool fix_right = X[M] >= p.upper() - close && g[M] < 0.0;
    std::vector<int> gid(M + 1, 0);
    int groups = 1;
    for (int e = 1; e <= M; ++e) {
      const bool tied = !(prev.w[e - 1] > 0.0) && X[e] - X[e - 1] <= close &&
                        g[e - 1] - g[e] <= 0.0;
      gid[e] = tied ? gid[e - 1] : groups++;
    }
    std::vector<bool> fixed(groups, false);
    if (fix_left) fixed[gid[0]] = true;
    if (fix_right) fixed[gid[M]] = true;
    std::vector<double> gsum(groups, 0.0);
    for (int e = 0; e <= M; ++e) gsum[gid[e]] += g[e];
    double r = 0.0;
    for (int k = 0; k < groups; ++k)
      if (!fixed[k]) r += std::abs(gsum[k]);
    res.iterations = it;
    res.residual = r;
    // Below the roundoff level of the gradient sums tol cannot be resolved.
    if (r <= std::max(tol, 1e-13 * gscale)) {
      res.converged = true;
      break;
    }
    if (it == max_iter) break;

    const std::vector<double> d = solve_grouped(hd, ho, g, gid, groups, fixed);
    double slope = 0.0;
    for (int e = 0; e <= M; ++e) slope += g[e] * d[e];
    if (!(slope < 0.0)) {
      res.converged = r <= 100.0 * tol;
      break;
    }
    double tmax = 1.0;
    for (int j = 0; j < M; ++j) {
      const double dl = d[j + 1] - d[j];
      if (!(dl < 0.0)) continue;
      const double l = X[j + 1] - X[j];
      tmax = std::min(tmax, (prev.w[j] > 0.0 ? 0.995 : 1.0) * l / -dl);
    }
    if (d[0] < 0.0) tmax = std::min(tmax, (X[0] - p.lower()) / -d[0]);
    if (d[M] > 0.0) tmax = std::min(tmax, (p.upper() - X[M]) / d[M]);

    double t = tmax;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      trial = X;
      for (int e = 0; e <= M; ++e) trial[e] = X[e] + t * d[e];
      trial[0] = std::max(trial[0], p.lower());
      trial[M] = std::min(trial[M], p.upper());
      for (int j = 0; j < M; ++j)
        if (!(prev.w[j] > 0.0)) trial[j + 1] = std::max(trial[j + 1], trial[j]);
      const double Jt = p.evaluate(trial, nullptr, nullptr, nullptr);
      const double predicted = t * slope;
      if (std::abs(predicted) < 1e-15 * (1.0 + std::abs(J)) || Jt <= J + 1e-4 * predicted) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    X = trial;
    J = p.evaluate(X, &g, &hd, &ho, &gscale);
  }

  res.has_objectives = true;
  res.objective_new = J;
  res.objective_prev = p.evaluate(prev.X, nullptr, nullptr, nullptr);
  res.has_w2sq = true;
  res.w2sq = p.transport(X);
  state.X = X;
  res.masses = project_masses(state, grid);
  return res;
}

}  // namespace jkoflow::detail
