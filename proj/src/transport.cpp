#include "jkoflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jkoflow/error.hpp"

namespace jkoflow {

namespace {

constexpr double kLogFloor = 1e-300;

void require_1d_pair(const Density& a, const Density& b, const char* where) {
  require_same_grid(a.grid(), b.grid(), where);
  if (a.grid().dim() != 1) throw ConfigError(std::string(where) + ": requires a 1-D grid");
}

// Monotone piece of a quantile function: on mass coordinates [s0, s1] it
// runs linearly from x0 to x1.
struct Piece {
  double s0, s1, x0, x1;
  double at(double s) const {
    if (s1 <= s0) return x0;
    return x0 + (x1 - x0) * ((s - s0) / (s1 - s0));
  }
};

std::vector<Piece> pieces_of(const Density& rho, CellModel model) {
  const Axis& ax = rho.grid().axis(0);
  const double dx = ax.spacing();
  std::vector<Piece> out;
  double s = 0.0;
  for (int c = 0; c < ax.cells; ++c) {
    const double m = rho[c] * dx;
    const double next = s + m;
    if (m > 0.0) {
      if (model == CellModel::kAtoms) {
        out.push_back({s, next, ax.center(c), ax.center(c)});
      } else {
        out.push_back({s, next, ax.edge(c), ax.edge(c + 1)});
      }
    }
    s = next;
  }
  return out;
}

// Calls visit(lo, hi, pa, pb) for every nonempty overlap of the two piece
// lists in mass coordinates, left to right.
template <class Visit>
void sweep(const std::vector<Piece>& a, const std::vector<Piece>& b, Visit&& visit) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].s0, b[j].s0);
    const double hi = std::min(a[i].s1, b[j].s1);
    if (hi > lo) visit(lo, hi, a[i], b[j]);
    if (a[i].s1 < b[j].s1) {
      ++i;
    } else if (b[j].s1 < a[i].s1) {
      ++j;
    } else {
      ++i;
      ++j;
    }
  }
}

}  // namespace

double TransportResult::distance() const { return std::sqrt(std::max(0.0, cost)); }

// ---------------------------------------------------------------------------

CellQuantile::CellQuantile(const Density& rho) {
  if (rho.grid().dim() != 1) throw ConfigError("CellQuantile: requires a 1-D grid");
  const Axis& ax = rho.grid().axis(0);
  lower_ = ax.lower;
  dx_ = ax.spacing();
  mass_.resize(rho.size());
  for (std::size_t c = 0; c < rho.size(); ++c) mass_[c] = rho[c] * dx_;
  build();
}

CellQuantile::CellQuantile(double lower, double dx, std::vector<double> masses)
    : lower_(lower), dx_(dx), mass_(std::move(masses)) {
  build();
}

void CellQuantile::build() {
  const int n = cells();
  left_.assign(n + 1, 0.0);
  right_.assign(n + 1, 0.0);
  for (int c = 0; c < n; ++c) left_[c + 1] = left_[c] + mass_[c];
  for (int c = n - 1; c >= 0; --c) right_[c] = right_[c + 1] + mass_[c];
  first_ = 0;
  while (first_ < n - 1 && !(mass_[first_] > 0.0)) ++first_;
  last_ = n - 1;
  while (last_ > 0 && !(mass_[last_] > 0.0)) --last_;
}

double CellQuantile::at(double s) const {
  const int n = cells();
  const auto it = std::upper_bound(left_.begin(), left_.end(), s);
  const auto e = static_cast<int>(it - left_.begin());
  if (e == 0) return edge(first_);
  if (e > n) return edge(last_ + 1);
  const int c = e - 1;
  return edge(c) + dx_ * ((s - left_[c]) / mass_[c]);
}

double CellQuantile::at_from_right(double r) const {
  const int n = cells();
  // right_ is nonincreasing; k = number of entries > r.
  const auto it = std::partition_point(right_.begin(), right_.end(),
                                       [r](double v) { return v > r; });
  const auto k = static_cast<int>(it - right_.begin());
  if (k == 0) return edge(first_);
  if (k > n) return edge(last_ + 1);
  const int c = k - 1;
  return edge(c + 1) - dx_ * ((r - right_[c + 1]) / mass_[c]);
}

double CellQuantile::at_cell_center(const CellQuantile& other, int c) const {
  const double half = 0.5 * other.mass_[c];
  const double s = other.left_[c] + half;
  const double r = other.right_[c + 1] + half;
  return s <= r ? at(s) : at_from_right(r);
}

// ---------------------------------------------------------------------------

TransportResult w2_exact_1d(const Density& rho, const Density& mu, CellModel model) {
  require_1d_pair(rho, mu, "w2_exact_1d");
  const auto pa = pieces_of(rho, model);
  const auto pb = pieces_of(mu, model);
  TransportResult out;
  double cost = 0.0;
  sweep(pa, pb, [&](double lo, double hi, const Piece& a, const Piece& b) {
    const double d0 = a.at(lo) - b.at(lo);
    const double d1 = a.at(hi) - b.at(hi);
    cost += (hi - lo) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
  });
  out.cost = cost;

  const CellQuantile qa(rho);
  const CellQuantile qb(mu);
  out.map.resize(rho.size());
  for (int c = 0; c < qa.cells(); ++c) out.map[c] = qb.at_cell_center(qa, c);
  // Roundoff between the two evaluation ends must not break monotonicity.
  for (std::size_t c = 1; c < out.map.size(); ++c)
    out.map[c] = std::max(out.map[c], out.map[c - 1]);
  return out;
}

double w1_exact_1d(const Density& rho, const Density& mu, CellModel model) {
  require_1d_pair(rho, mu, "w1_exact_1d");
  const CellQuantile qa(rho);
  const CellQuantile qb(mu);
  const int n = qa.cells();
  const double dx = qa.dx();
  // CDF difference at edge e, from whichever end carries less mass.
  auto diff = [&](int e) {
    if (qa.left(e) <= qa.right(e)) return qa.left(e) - qb.left(e);
    return qb.right(e) - qa.right(e);
  };
  double total = 0.0;
  if (model == CellModel::kAtoms) {
    // Step CDFs jump at centers; between consecutive centers they are flat.
    for (int e = 1; e < n; ++e) total += std::abs(diff(e)) * dx;
    return total;
  }
  for (int c = 0; c < n; ++c) {
    const double d0 = diff(c);
    const double d1 = diff(c + 1);
    const double a0 = std::abs(d0), a1 = std::abs(d1);
    if (d0 * d1 >= 0.0) {
      total += 0.5 * dx * (a0 + a1);
    } else {
      total += 0.5 * dx * (d0 * d0 + d1 * d1) / (a0 + a1);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------

LogKernel::LogKernel(const Grid& grid, double epsilon) : grid_(grid), epsilon_(epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ConfigError("entropic transport needs epsilon > 0");
  for (int a = 0; a < grid.dim(); ++a) {
    const Axis& ax = grid.axis(a);
    centers_[a].resize(ax.cells);
    for (int j = 0; j < ax.cells; ++j) centers_[a][j] = ax.center(j);
  }
}

double LogKernel::cost(std::size_t i, std::size_t j) const {
  const Point p = grid_.center(i);
  const Point q = grid_.center(j);
  return (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]);
}

void LogKernel::apply_axis(int axis, std::span<const double> h, std::span<double> out) const {
  const int n = grid_.cells(axis);
  const int nx = grid_.cells(0);
  const int lines = static_cast<int>(grid_.size()) / n;
  const std::size_t stride = axis == 0 ? 1 : static_cast<std::size_t>(nx);
  const auto& x = centers_[axis];
  const double inv = 1.0 / epsilon_;
  std::vector<double> line(n);
  std::vector<double> terms(n);
  for (int l = 0; l < lines; ++l) {
    const std::size_t base = axis == 0 ? static_cast<std::size_t>(l) * nx
                                       : static_cast<std::size_t>(l);
    for (int j = 0; j < n; ++j) line[j] = h[base + j * stride];
    for (int i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        const double d = x[i] - x[j];
        terms[j] = line[j] - d * d * inv;
        mx = std::max(mx, terms[j]);
      }
      if (mx == -std::numeric_limits<double>::infinity()) {
        out[base + i * stride] = mx;
        continue;
      }
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += std::exp(terms[j] - mx);
      out[base + i * stride] = mx + std::log(s);
    }
  }
}

void LogKernel::apply(std::span<const double> h, std::span<double> out) const {
  if (grid_.dim() == 1) {
    apply_axis(0, h, out);
    return;
  }
  std::vector<double> tmp(h.size());
  apply_axis(0, h, tmp);
  apply_axis(1, tmp, out);
}

// ---------------------------------------------------------------------------

TransportResult sinkhorn(const Density& rho, const Density& mu, const SinkhornOptions& opt) {
  require_same_grid(rho.grid(), mu.grid(), "sinkhorn");
  const Grid& g = rho.grid();
  const LogKernel K(g, opt.epsilon);
  const std::size_t n = g.size();
  const double vol = g.cell_volume();
  std::vector<double> a(n), b(n), la(n), lb(n);
  for (std::size_t c = 0; c < n; ++c) {
    a[c] = rho[c] * vol;
    b[c] = mu[c] * vol;
    la[c] = std::log(std::max(a[c], kLogFloor));
    lb[c] = std::log(std::max(b[c], kLogFloor));
  }
  // Potentials in units of epsilon.
  std::vector<double> u(n, 0.0), v(n, 0.0), un(n), h(n);
  TransportResult out;
  double residual = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    for (std::size_t c = 0; c < n; ++c) h[c] = la[c] + u[c];
    K.apply(h, v);
    for (std::size_t c = 0; c < n; ++c) v[c] = -v[c];
    for (std::size_t c = 0; c < n; ++c) h[c] = lb[c] + v[c];
    K.apply(h, un);
    residual = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      un[c] = -un[c];
      residual += a[c] * std::abs(std::expm1(u[c] - un[c]));
    }
    if (residual <= opt.tol) break;
    u.swap(un);
  }
  if (it == opt.max_iter)
    throw SolverError("sinkhorn: max_iter exceeded", residual, opt.max_iter);

  // The plan exp(u_i + v_j - C_ij/eps) a_i b_j has exact second marginal and
  // first marginal within `residual`.
  const double inv = 1.0 / opt.epsilon;
  double cost = 0.0, mass = 0.0, dual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(a[i] > 0.0)) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(b[j] > 0.0)) continue;
      const double c = K.cost(i, j);
      const double gam = a[i] * b[j] * std::exp(u[i] + v[j] - c * inv);
      cost += gam * c;
      mass += gam;
      dual += gam * (u[i] + v[j]);
    }
  }
  out.cost = cost;
  out.objective = opt.epsilon * (dual - (mass - 1.0));
  out.potential_f.resize(n);
  out.potential_g.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    out.potential_f[c] = opt.epsilon * u[c];
    out.potential_g[c] = opt.epsilon * v[c];
  }
  out.iterations = it + 1;
  out.residual = residual;
  return out;
}

double sinkhorn_divergence(const Density& rho, const Density& mu, const SinkhornOptions& opt) {
  const double ab = sinkhorn(rho, mu, opt).objective;
  const double aa = sinkhorn(rho, rho, opt).objective;
  const double bb = sinkhorn(mu, mu, opt).objective;
  return ab - 0.5 * (aa + bb);
}

// ---------------------------------------------------------------------------

TransportResult brute_force_ot(const Density& rho, const Density& mu) {
  require_same_grid(rho.grid(), mu.grid(), "brute_force_ot");
  const Grid& g = rho.grid();
  const double vol = g.cell_volume();
  std::vector<Point> x, y;
  std::vector<double> a, b;
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (rho[c] > 0.0) {
      x.push_back(g.center(c));
      a.push_back(rho[c] * vol);
    }
    if (mu[c] > 0.0) {
      y.push_back(g.center(c));
      b.push_back(mu[c] * vol);
    }
  }
  TransportResult out;
  out.cost = discrete_ot_cost(x, a, y, b);
  return out;
}

// ---------------------------------------------------------------------------

Density displacement_interpolate_1d(const Density& rho, const Density& mu, double t) {
  require_1d_pair(rho, mu, "displacement_interpolate_1d");
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("displacement_interpolate_1d: t outside [0,1]");
  const Axis& ax = rho.grid().axis(0);
  const int n = ax.cells;
  const double dx = ax.spacing();
  std::vector<double> mass(n, 0.0);

  auto deposit_point = [&](double y, double w) {
    // Linear split between the two centers bracketing y.
    const double u = (y - ax.lower) / dx - 0.5;
    if (u <= 0.0) {
      mass[0] += w;
      return;
    }
    if (u >= n - 1) {
      mass[n - 1] += w;
      return;
    }
    const int c = static_cast<int>(std::floor(u));
    const double f = u - c;
    mass[c] += w * (1.0 - f);
    mass[c + 1] += w * f;
  };
  auto deposit_interval = [&](double y0, double y1, double w) {
    const double len = y1 - y0;
    if (!(len > 1e-14 * dx)) {
      deposit_point(0.5 * (y0 + y1), w);
      return;
    }
    int c0 = static_cast<int>(std::floor((y0 - ax.lower) / dx));
    int c1 = static_cast<int>(std::floor((y1 - ax.lower) / dx));
    c0 = std::clamp(c0, 0, n - 1);
    c1 = std::clamp(c1, 0, n - 1);
    if (c0 == c1) {
      mass[c0] += w;
      return;
    }
    double placed = 0.0;
    for (int c = c0; c < c1; ++c) {
      const double lo = std::max(y0, ax.edge(c));
      const double hi = std::min(y1, ax.edge(c + 1));
      const double part = hi > lo ? w * ((hi - lo) / len) : 0.0;
      mass[c] += part;
      placed += part;
    }
    mass[c1] += w - placed;
  };

  const auto pa = pieces_of(rho, CellModel::kPiecewiseConstant);
  const auto pb = pieces_of(mu, CellModel::kPiecewiseConstant);
  sweep(pa, pb, [&](double lo, double hi, const Piece& a, const Piece& b) {
    const double y0 = (1.0 - t) * a.at(lo) + t * b.at(lo);
    const double y1 = (1.0 - t) * a.at(hi) + t * b.at(hi);
    deposit_interval(y0, y1, hi - lo);
  });
  for (double& m : mass) m /= dx;
  return Density::normalized(rho.grid(), std::move(mass));
}

MonotoneCdf::MonotoneCdf(std::vector<double> nodes, std::vector<double> cumulative)
    : X_(std::move(nodes)), S_(std::move(cumulative)) {
  if (X_.size() != S_.size() || X_.empty())
    throw ConfigError("MonotoneCdf: nodes and values must be nonempty and of equal size");
  const int M = static_cast<int>(X_.size()) - 1;
  std::vector<double> len(M), sec(M);
  for (int j = 0; j < M; ++j) {
    len[j] = X_[j + 1] - X_[j];
    if (len[j] < 0.0 || S_[j + 1] < S_[j])
      throw ConfigError("MonotoneCdf: nodes and values must be nondecreasing");
    sec[j] = len[j] > 0.0 ? (S_[j + 1] - S_[j]) / len[j] : 0.0;
  }
  d_.assign(M + 1, 0.0);
  for (int j = 1; j < M; ++j) {
    if (!(sec[j - 1] > 0.0 && sec[j] > 0.0)) continue;
    const double a = 2.0 * len[j] + len[j - 1], b = len[j] + 2.0 * len[j - 1];
    d_[j] = (a + b) / (a / sec[j - 1] + b / sec[j]);
  }
  // One-sided three-point end slopes, limited to keep the cubic monotone.
  auto end_slope = [](double l0, double l1, double s0, double s1) {
    if (!(s0 > 0.0)) return 0.0;
    const double v = ((2.0 * l0 + l1) * s0 - l0 * s1) / (l0 + l1);
    return std::clamp(v, 0.0, 3.0 * s0);
  };
  if (M == 1) {
    d_[0] = d_[1] = sec[0];
  } else if (M > 1) {
    d_[0] = end_slope(len[0], len[1], sec[0], sec[1]);
    d_[M] = end_slope(len[M - 1], len[M - 2], sec[M - 1], sec[M - 2]);
  }
}

MonotoneCdf MonotoneCdf::of(const Density& rho) {
  if (rho.grid().dim() != 1) throw ConfigError("MonotoneCdf: requires a 1-D grid");
  const Axis& ax = rho.grid().axis(0);
  std::vector<double> X(ax.cells + 1), S(ax.cells + 1, 0.0);
  for (int e = 0; e <= ax.cells; ++e) X[e] = ax.edge(e);
  for (int c = 0; c < ax.cells; ++c) S[c + 1] = S[c] + rho[c] * ax.spacing();
  return MonotoneCdf(std::move(X), std::move(S));
}

double MonotoneCdf::on_interval(int j, double t) const {
  const double l = X_[j + 1] - X_[j];
  const double t2 = t * t, t3 = t2 * t;
  return S_[j] * (2.0 * t3 - 3.0 * t2 + 1.0) + l * d_[j] * (t3 - 2.0 * t2 + t) +
         S_[j + 1] * (3.0 * t2 - 2.0 * t3) + l * d_[j + 1] * (t3 - t2);
}

double MonotoneCdf::operator()(double y) const {
  const int M = static_cast<int>(X_.size()) - 1;
  if (y <= X_[0]) return S_[0];
  if (y >= X_[M]) return S_[M];
  const int j = static_cast<int>(std::upper_bound(X_.begin(), X_.end(), y) - X_.begin()) - 1;
  if (!(X_[j + 1] > X_[j])) return S_[j + 1];
  const double v = on_interval(j, (y - X_[j]) / (X_[j + 1] - X_[j]));
  return std::clamp(v, S_[j], S_[j + 1]);
}

double MonotoneCdf::inverse(double s) const {
  const int M = static_cast<int>(X_.size()) - 1;
  if (s <= S_[0]) return X_[0];
  if (s >= S_[M]) {
    int e = M;
    while (e > 0 && S_[e - 1] >= S_[M]) --e;
    return X_[e];
  }
  // First interval whose upper value reaches s.
  const int j = static_cast<int>(std::lower_bound(S_.begin() + 1, S_.end(), s) - S_.begin()) - 1;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 64; ++it) {
    const double mid = 0.5 * (lo + hi);
    (on_interval(j, mid) < s ? lo : hi) = mid;
  }
  return X_[j] + 0.5 * (lo + hi) * (X_[j + 1] - X_[j]);
}

std::vector<double> smooth_map_1d(const Density& rho, const Density& mu) {
  if (rho.grid().dim() != 1 || mu.grid().dim() != 1)
    throw ConfigError("smooth_map_1d: requires 1-D densities");
  require_same_grid(rho.grid(), mu.grid(), "smooth_map_1d");
  const MonotoneCdf Fr = MonotoneCdf::of(rho), Fm = MonotoneCdf::of(mu);
  const Grid& g = rho.grid();
  std::vector<double> T(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) {
    const double s = std::min(Fr(g.center(c)[0]) * Fm.total() / Fr.total(), Fm.total());
    T[c] = Fm.inverse(s);
  }
  for (std::size_t c = 1; c < T.size(); ++c) T[c] = std::max(T[c], T[c - 1]);
  return T;
}

}  // namespace jkoflow
