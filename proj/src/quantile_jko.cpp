// Exact 1-D JKO step. The unknown is the CDF G of a piecewise-constant
// density (G_0 = 0, G_n = 1 fixed). The transport term is written through
// the quantile function of the previous density, so the objective and its
// tridiagonal Hessian in G are available in closed form cell by cell.

#include <algorithm>
#include <cmath>
#include <limits>

#include "jkoflow/error.hpp"
#include "jkoflow/solvers.hpp"

namespace jkoflow::detail {

namespace {

constexpr double kDensityFloor = 1e-300;

// Nonempty cells of the previous density as linear pieces of its quantile
// function, in one orientation of the mass axis.
struct Pieces {
  std::vector<double> start, end, x0, x1;

  std::size_t size() const { return start.size(); }
  double at(std::size_t j, double s) const {
    return x0[j] + (x1[j] - x0[j]) * ((s - start[j]) / (end[j] - start[j]));
  }
  double slope(std::size_t j) const { return (x1[j] - x0[j]) / (end[j] - start[j]); }
};

struct Moments {
  double A0 = 0, A1 = 0, f = 0, H00 = 0, H01 = 0, H11 = 0;
};

// Integrals over one cell with mass coordinates [a, a + L], left edge xl:
//   A0 = int Q, A1 = int theta Q, f = L int (xl + dx theta - Q)^2,
//   H  = 2 dx int (1-theta, theta)^T (1-theta, theta) Q'(a + L theta) dtheta
// with Q = Q(a + L theta), theta in [0, 1].
Moments cell_moments(const Pieces& P, double a, double L, double xl, double dx) {
  Moments out;
  const double b = a + L;
  const std::size_t np = P.size();
  auto first_after = [&](double s) {
    return static_cast<std::size_t>(std::upper_bound(P.end.begin(), P.end.end(), s) -
                                    P.end.begin());
  };

  if (!(b > a)) {
    const std::size_t j = first_after(a);
    double q, slope = 0.0;
    if (j >= np) {
      q = P.x1[np - 1];
    } else {
      q = P.at(j, std::max(a, P.start[j]));
      slope = P.slope(j);
    }
    out.A0 = q;
    out.A1 = 0.5 * q;
    out.H00 = out.H11 = 2.0 * dx * slope / 3.0;
    out.H01 = 2.0 * dx * slope / 6.0;
    return out;
  }

  double fint = 0.0;
  auto add_segment = [&](double t0, double t1, double q0, double q1, double slope) {
    const double w = t1 - t0;
    out.A0 += 0.5 * w * (q0 + q1);
    out.A1 += w * (2.0 * t0 * q0 + t0 * q1 + t1 * q0 + 2.0 * t1 * q1) / 6.0;
    const double g0 = xl + dx * t0 - q0;
    const double g1 = xl + dx * t1 - q1;
    fint += w * (g0 * g0 + g0 * g1 + g1 * g1) / 3.0;
    if (slope > 0.0) {
      const double i1 = 0.5 * (t1 * t1 - t0 * t0);
      const double i2 = (t1 * t1 * t1 - t0 * t0 * t0) / 3.0;
      const double k = 2.0 * dx * slope;
      out.H00 += k * (w - 2.0 * i1 + i2);
      out.H01 += k * (i1 - i2);
      out.H11 += k * i2;
    }
  };

  std::size_t j = first_after(a);
  for (; j < np && P.start[j] < b; ++j) {
    const double s0 = std::max(a, P.start[j]);
    const double s1 = std::min(b, P.end[j]);
    if (s1 > s0)
      add_segment((s0 - a) / L, (s1 - a) / L, P.at(j, s0), P.at(j, s1), P.slope(j));
    if (j + 1 < np && P.end[j] > a && P.end[j] < b) {
      const double jump = P.x0[j + 1] - P.x1[j];
      if (jump > 1e-13 * dx) {
        const double t = (P.end[j] - a) / L;
        const double k = 2.0 * dx * jump / L;
        out.H00 += k * (1.0 - t) * (1.0 - t);
        out.H01 += k * t * (1.0 - t);
        out.H11 += k * t * t;
      }
    }
  }
  // Mass beyond the previous support (roundoff in the totals): Q is flat.
  const double tail = P.end[np - 1];
  if (b > tail) {
    const double s0 = std::max(a, tail);
    add_segment((s0 - a) / L, 1.0, P.x1[np - 1], P.x1[np - 1], 0.0);
  }
  out.f = L * fint;
  return out;
}

class Problem {
 public:
  Problem(const Density& prev, const InternalEnergy& energy, const ScalarField& potential,
          double h)
      : energy_(energy), h_(h) {
    if (prev.grid().dim() != 1) throw ConfigError("exact1d solver requires a 1-D grid");
    require_same_grid(prev.grid(), potential.grid, "exact1d_step");
    const Axis& ax = prev.grid().axis(0);
    n_ = ax.cells;
    dx_ = ax.spacing();
    lower_ = ax.lower;
    reflect_ = ax.lower + ax.upper;
    V_ = potential.values;
    prev_.resize(n_);
    for (int c = 0; c < n_; ++c) prev_[c] = prev[c] * dx_;

    double s = 0.0;
    for (int c = 0; c < n_; ++c) {
      const double next = s + prev_[c];
      if (prev_[c] > 0.0) {
        left_.start.push_back(s);
        left_.end.push_back(next);
        left_.x0.push_back(edge(c));
        left_.x1.push_back(edge(c + 1));
      }
      s = next;
    }
    s = 0.0;
    for (int c = n_ - 1; c >= 0; --c) {
      const double next = s + prev_[c];
      if (prev_[c] > 0.0) {
        right_.start.push_back(s);
        right_.end.push_back(next);
        right_.x0.push_back(reflect_ - edge(c + 1));
        right_.x1.push_back(reflect_ - edge(c));
      }
      s = next;
    }
  }

  int cells() const { return n_; }
  double dx() const { return dx_; }
  const std::vector<double>& prev_masses() const { return prev_; }
  bool entropy() const { return energy_.kind() == EnergyKind::kEntropy; }

  double edge(int e) const { return lower_ + e * dx_; }

  // Objective, gradient in m, and the tridiagonal Hessian in G (diag over
  // edges 0..n, off-diagonal between e and e+1).
  double evaluate(const std::vector<double>& m, std::vector<double>& grad,
                  std::vector<double>* hdiag, std::vector<double>* hoff) const {
    const int n = n_;
    std::vector<double> G(n + 1, 0.0), R(n + 1, 0.0);
    for (int c = 0; c < n; ++c) G[c + 1] = G[c] + m[c];
    for (int c = n - 1; c >= 0; --c) R[c] = R[c + 1] + m[c];
    grad.assign(n, 0.0);
    if (hdiag) hdiag->assign(n + 1, 0.0);
    if (hoff) hoff->assign(n, 0.0);
    std::vector<double> tail(n);
    const double inv2h = 0.5 / h_;
    double J = 0.0;
    for (int c = 0; c < n; ++c) {
      Moments mo;
      if (G[c] <= R[c + 1]) {
        mo = cell_moments(left_, G[c], m[c], edge(c), dx_);
      } else {
        const Moments r = cell_moments(right_, R[c + 1], m[c], reflect_ - edge(c + 1), dx_);
        mo.A0 = reflect_ - r.A0;
        mo.A1 = 0.5 * reflect_ - r.A0 + r.A1;
        mo.f = r.f;
        mo.H00 = r.H11;
        mo.H11 = r.H00;
        mo.H01 = r.H01;
      }
      const double rho = m[c] / dx_;
      const double rho_f = std::max(rho, kDensityFloor);
      J += inv2h * mo.f + dx_ * energy_.F(rho) + V_[c] * m[c];
      const double xl = edge(c);
      grad[c] = inv2h * 2.0 * dx_ * (mo.A1 - 0.5 * xl - dx_ / 3.0) + energy_.dF(rho_f) + V_[c];
      tail[c] = inv2h * 2.0 * dx_ * (mo.A0 - (xl + 0.5 * dx_));
      if (hdiag) {
        const double f2 = energy_.d2F(rho_f) / dx_;
        (*hdiag)[c] += inv2h * mo.H00 + f2;
        (*hdiag)[c + 1] += inv2h * mo.H11 + f2;
        (*hoff)[c] += inv2h * mo.H01 - f2;
      }
    }
    double suffix = 0.0;
    for (int c = n - 1; c >= 0; --c) {
      grad[c] += suffix;
      suffix += tail[c];
    }
    return J;
  }

 private:
  const InternalEnergy& energy_;
  double h_;
  int n_ = 0;
  double dx_ = 0.0, lower_ = 0.0, reflect_ = 0.0;
  std::vector<double> V_, prev_;
  Pieces left_, right_;
};

}  // namespace

// Solves the tridiagonal system restricted to groups of tied edges. gid[e]
// is the group of edge e; groups in `fixed` have zero displacement.
std::vector<double> solve_grouped(const std::vector<double>& hd, const std::vector<double>& ho,
                                  const std::vector<double>& gG, const std::vector<int>& gid,
                                  int groups, const std::vector<bool>& fixed) {
  const int n = static_cast<int>(hd.size()) - 1;
  std::vector<double> diag(groups, 0.0), off(groups, 0.0), rhs(groups, 0.0);
  for (int e = 0; e <= n; ++e) {
    diag[gid[e]] += hd[e];
    rhs[gid[e]] -= gG[e];
  }
  for (int e = 0; e < n; ++e) {
    if (gid[e] == gid[e + 1]) {
      diag[gid[e]] += 2.0 * ho[e];
    } else {
      off[gid[e]] += ho[e];
    }
  }
  // Thomas algorithm over the free groups (consecutive ids are adjacent).
  std::vector<double> x(groups, 0.0), cp(groups, 0.0), dp(groups, 0.0);
  int prev = -1;
  for (int k = 0; k < groups; ++k) {
    if (fixed[k]) {
      prev = -1;
      continue;
    }
    const double a = prev >= 0 ? off[prev] : 0.0;
    const double reg = 1e-14 * std::abs(diag[k]) + 1e-300;
    double denom = diag[k] + reg - (prev >= 0 ? a * cp[prev] : 0.0);
    if (!(denom > 0.0)) denom = reg;
    const double c = k + 1 < groups && !fixed[k + 1] ? off[k] : 0.0;
    cp[k] = c / denom;
    dp[k] = (rhs[k] - (prev >= 0 ? a * dp[prev] : 0.0)) / denom;
    prev = k;
  }
  for (int k = groups - 1; k >= 0; --k) {
    if (fixed[k]) continue;
    const bool next_free = k + 1 < groups && !fixed[k + 1];
    x[k] = dp[k] - (next_free ? cp[k] * x[k + 1] : 0.0);
  }
  std::vector<double> d(n + 1, 0.0);
  for (int e = 0; e <= n; ++e) d[e] = fixed[gid[e]] ? 0.0 : x[gid[e]];
  return d;
}

Exact1dEvaluation exact1d_evaluate(const Density& prev, const InternalEnergy& energy,
                                   const ScalarField& potential, double h,
                                   const std::vector<double>& masses) {
  const Problem p(prev, energy, potential, h);
  Exact1dEvaluation out;
  out.objective = p.evaluate(masses, out.gradient, nullptr, nullptr);
  return out;
}

InnerResult exact1d_step(const Density& prev, const InternalEnergy& energy,
                         const ScalarField& potential, double h, double tol, int max_iter) {
  if (!(h > 0.0)) throw ConfigError("exact1d_step: h must be positive");
  const Problem p(prev, energy, potential, h);
  const int n = p.cells();
  const bool entropy = p.entropy();
  constexpr double kClosedMass = 1e-15;
  constexpr double kShrink = 0.05;
  // The transport gradient is a sum of n terms of size dx |x| / h; below
  // their rounding level tol cannot be resolved (tiny h).
  const Axis& ax = prev.grid().axis(0);
  const double floor =
      1e-15 * (0.5 / h) * (ax.upper - ax.lower) * std::max(std::abs(ax.lower), std::abs(ax.upper));
  const double target = std::max(tol, floor);

  std::vector<double> m = p.prev_masses();
  if (entropy) {
    // Keep every cell strictly positive so the barrier stays finite.
    constexpr double kMix = 1e-12;
    for (double& v : m) v = (1.0 - kMix) * v + kMix / n;
  }

  std::vector<double> g, hd, ho, gG(n + 1), trial, gtrial;
  InnerResult res;
  double J = p.evaluate(m, g, &hd, &ho);
  for (int it = 0; it <= max_iter; ++it) {
    double mean = 0.0, total = 0.0;
    for (int c = 0; c < n; ++c) {
      mean += m[c] * g[c];
      total += m[c];
    }
    mean /= total;
    double r = 0.0;
    for (int c = 0; c < n; ++c) r += m[c] * std::abs(g[c] - mean);
    bool wants_open = false;
    std::vector<bool> closed(n, false);
    if (!entropy) {
      const double kkt = 1e-9 * (1.0 + std::abs(mean));
      for (int c = 0; c < n; ++c) {
        if (m[c] <= kClosedMass) {
          if (g[c] > mean) closed[c] = true;
          if (g[c] < mean - kkt) wants_open = true;
        }
      }
    }
    res.iterations = it;
    res.residual = r;
    if (r <= target && !wants_open) {
      res.converged = true;
      break;
    }
    if (it == max_iter) break;

    // Newton direction on the free edge groups.
    std::vector<int> gid(n + 1, 0);
    int groups = 1;
    for (int e = 1; e <= n; ++e) gid[e] = closed[e - 1] ? gid[e - 1] : groups++;
    std::vector<bool> fixed(groups, false);
    fixed[gid[0]] = true;
    fixed[gid[n]] = true;
    gG[0] = gG[n] = 0.0;
    for (int e = 1; e < n; ++e) gG[e] = g[e - 1] - g[e];
    const std::vector<double> d = solve_grouped(hd, ho, gG, gid, groups, fixed);
    std::vector<double> dm(n);
    double slope = 0.0;
    for (int c = 0; c < n; ++c) {
      dm[c] = d[c + 1] - d[c];
      slope += g[c] * dm[c];
    }
    if (!(slope < 0.0)) {
      // Roundoff-level direction: nothing left to gain.
      if (r <= 100.0 * target) {
        res.converged = !wants_open;
      }
      break;
    }

    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      trial = m;
      double sum = 0.0;
      for (int c = 0; c < n; ++c) {
        double v = m[c] + t * dm[c];
        if (entropy) {
          v = std::max(v, kShrink * m[c]);
        } else if (v < 0.0) {
          v = 0.0;
        }
        trial[c] = v;
        sum += v;
      }
      for (double& v : trial) v /= sum;
      const double Jt = p.evaluate(trial, gtrial, nullptr, nullptr);
      const double predicted = t * slope;
      if (std::abs(predicted) < 1e-15 * (1.0 + std::abs(J)) || Jt <= J + 1e-4 * predicted) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    m = trial;
    J = p.evaluate(m, g, &hd, &ho);
  }
  res.masses = m;
  return res;
}

}  // namespace jkoflow::detail
