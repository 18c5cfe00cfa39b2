#pragma once

#include <span>
#include <vector>

#include "jkoflow/grid.hpp"

namespace jkoflow {

// How a 1-D cell density is read as a measure.
//   kPiecewiseConstant: uniform mass across each cell (piecewise-linear CDF
//                       and quantile function).
//   kAtoms:             each cell's mass sits at its center. This is the
//                       discrete measure seen by Sinkhorn and the LP oracle.
enum class CellModel { kPiecewiseConstant, kAtoms };

struct TransportResult {
  double cost = 0.0;  // squared-distance units
  // 1-D exact only: image T(x_c) of every cell center under the optimal map.
  std::vector<double> map;
  // Entropic only: dual potentials on the two grids.
  std::vector<double> potential_f;
  std::vector<double> potential_g;
  // Entropic only: <gamma, C> + eps KL(gamma | rho x mu).
  double objective = 0.0;
  int iterations = 0;
  double residual = 0.0;

  double distance() const;
};

TransportResult w2_exact_1d(const Density& rho, const Density& mu,
                            CellModel model = CellModel::kPiecewiseConstant);
double w1_exact_1d(const Density& rho, const Density& mu,
                   CellModel model = CellModel::kPiecewiseConstant);

struct SinkhornOptions {
  double epsilon = 0.0;
  double tol = 1e-9;
  int max_iter = 200000;
};

// Log-domain Sinkhorn between the cell-center atoms of rho and mu (1-D or
// 2-D; the 2-D kernel is applied separably). Stops when the L1 violation of
// the first marginal is <= tol. Throws SolverError after max_iter.
TransportResult sinkhorn(const Density& rho, const Density& mu, const SinkhornOptions& opt);

// OT_eps(rho, mu) - (OT_eps(rho, rho) + OT_eps(mu, mu)) / 2 on the entropic
// objective.
double sinkhorn_divergence(const Density& rho, const Density& mu, const SinkhornOptions& opt);

// Exact discrete OT between atoms (positions, weights) by the simplex method.
// Total positive support must be <= 64.
double discrete_ot_cost(std::span<const Point> x, std::span<const double> a,
                        std::span<const Point> y, std::span<const double> b);
// Cell-center atoms of two densities on one grid.
TransportResult brute_force_ot(const Density& rho, const Density& mu);

// McCann interpolant at time t of the piecewise-constant measures, binned
// back onto the grid by exact cell overlap.
Density displacement_interpolate_1d(const Density& rho, const Density& mu, double t);

// Monotone cubic (Fritsch-Carlson) interpolant of a cumulative mass given at
// nondecreasing nodes. Zero-length intervals are allowed. The derivative is
// continuous and nonnegative, and it vanishes next to empty intervals.
class MonotoneCdf {
 public:
  MonotoneCdf(std::vector<double> nodes, std::vector<double> cumulative);
  // Cumulative mass at the edges of a 1-D grid density.
  static MonotoneCdf of(const Density& rho);

  double total() const { return S_.empty() ? 0.0 : S_.back(); }
  double operator()(double y) const;
  // Smallest y with value(y) = s, for s in [0, total].
  double inverse(double s) const;

 private:
  double on_interval(int j, double t) const;

  std::vector<double> X_, S_, d_;
};

// Approximate optimal map rho -> mu at cell centers from the monotone cubic
// CDFs: T(x_c) = Q_mu(F_rho(x_c)). Unlike the cell-model map of w2_exact_1d
// it stays accurate for displacements much smaller than a cell.
std::vector<double> smooth_map_1d(const Density& rho, const Density& mu);

// Quantile function of a 1-D cell density under the piecewise-constant model.
// It can be evaluated from either end of the mass axis so that both tails
// keep full relative precision.
class CellQuantile {
 public:
  explicit CellQuantile(const Density& rho);
  CellQuantile(double lower, double dx, std::vector<double> masses);

  int cells() const { return static_cast<int>(mass_.size()); }
  double lower() const { return lower_; }
  double dx() const { return dx_; }
  double edge(int e) const { return lower_ + e * dx_; }
  const std::vector<double>& masses() const { return mass_; }
  // left(e) = mass of cells [0, e); right(e) = mass of cells [e, n).
  double left(int e) const { return left_[e]; }
  double right(int e) const { return right_[e]; }

  // Q(s) with s measured from the left end.
  double at(double s) const;
  // Q(1 - r) with r measured from the right end.
  double at_from_right(double r) const;
  // Q at the mass coordinate of the center of cell c in `other`'s CDF.
  double at_cell_center(const CellQuantile& other, int c) const;

 private:
  void build();

  double lower_ = 0.0;
  double dx_ = 1.0;
  std::vector<double> mass_;
  std::vector<double> left_;
  std::vector<double> right_;
  int first_ = 0;  // first and last cells with positive mass
  int last_ = 0;
};

// Log-sum-exp kernel application on a cell-centered grid:
//   out_i = log sum_j exp(h_j - |x_i - x_j|^2 / eps),
// separable over axes in 2-D.
class LogKernel {
 public:
  LogKernel(const Grid& grid, double epsilon);
  void apply(std::span<const double> h, std::span<double> out) const;
  const Grid& grid() const { return grid_; }
  double epsilon() const { return epsilon_; }
  // |x_i - x_j|^2 for flat indices.
  double cost(std::size_t i, std::size_t j) const;

 private:
  void apply_axis(int axis, std::span<const double> h, std::span<double> out) const;

  Grid grid_;
  double epsilon_;
  std::vector<double> centers_[2];
};

}  // namespace jkoflow
