// Dense two-phase simplex for small transportation problems. Bland's rule
// keeps it finite on the heavily degenerate vertices these problems have.

#include <cmath>
#include <limits>
#include <vector>

#include "jkoflow/error.hpp"
#include "jkoflow/transport.hpp"

namespace jkoflow {

namespace {

constexpr double kPivotEps = 1e-12;

class Tableau {
 public:
  // min c.x  s.t.  A x = rhs, x >= 0, rhs >= 0.
  Tableau(const std::vector<std::vector<double>>& A, const std::vector<double>& rhs,
          std::vector<double> c)
      : rows_(static_cast<int>(A.size())),
        vars_(static_cast<int>(c.size())),
        cost_(std::move(c)) {
    cols_ = vars_ + rows_;
    t_.assign(rows_, std::vector<double>(cols_ + 1, 0.0));
    basis_.resize(rows_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < vars_; ++j) t_[i][j] = A[i][j];
      t_[i][vars_ + i] = 1.0;
      t_[i][cols_] = rhs[i];
      basis_[i] = vars_ + i;
    }
  }

  double solve() {
    // Phase I: minimize the sum of artificials.
    std::vector<double> c1(cols_, 0.0);
    for (int j = vars_; j < cols_; ++j) c1[j] = 1.0;
    run(c1, cols_);
    if (objective(c1) > 1e-9) throw SolverError("brute_force_ot: infeasible marginals", objective(c1), 0);
    drive_out_artificials();
    std::vector<double> c2(cols_, 0.0);
    for (int j = 0; j < vars_; ++j) c2[j] = cost_[j];
    run(c2, vars_);
    return objective(c2);
  }

 private:
  double objective(const std::vector<double>& c) const {
    double s = 0.0;
    for (int i = 0; i < rows_; ++i) s += c[basis_[i]] * t_[i][cols_];
    return s;
  }

  void pivot(int r, int q) {
    const double p = t_[r][q];
    for (double& v : t_[r]) v /= p;
    for (int i = 0; i < rows_; ++i) {
      if (i == r) continue;
      const double f = t_[i][q];
      if (f == 0.0) continue;
      for (int j = 0; j <= cols_; ++j) t_[i][j] -= f * t_[r][j];
    }
    basis_[r] = q;
  }

  // Bland's rule over columns [0, limit).
  void run(const std::vector<double>& c, int limit) {
    for (int iter = 0;; ++iter) {
      if (iter > 1000000) throw SolverError("brute_force_ot: simplex did not terminate", 0.0, iter);
      int enter = -1;
      for (int j = 0; j < limit && enter < 0; ++j) {
        double d = c[j];
        for (int i = 0; i < rows_; ++i) d -= c[basis_[i]] * t_[i][j];
        if (d < -1e-13) enter = j;
      }
      if (enter < 0) return;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows_; ++i) {
        if (t_[i][enter] <= kPivotEps) continue;
        const double ratio = t_[i][cols_] / t_[i][enter];
        if (ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && basis_[i] < basis_[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) throw SolverError("brute_force_ot: unbounded", 0.0, iter);
      pivot(leave, enter);
    }
  }

  void drive_out_artificials() {
    for (int i = 0; i < rows_; ++i) {
      if (basis_[i] < vars_) continue;
      for (int j = 0; j < vars_; ++j) {
        if (std::abs(t_[i][j]) > kPivotEps) {
          pivot(i, j);
          break;
        }
      }
      // A row with no usable column is redundant; its artificial stays at 0.
    }
  }

  int rows_, vars_, cols_;
  std::vector<double> cost_;
  std::vector<std::vector<double>> t_;
  std::vector<int> basis_;
};

}  // namespace

double discrete_ot_cost(std::span<const Point> x, std::span<const double> a,
                        std::span<const Point> y, std::span<const double> b) {
  const std::size_t n = x.size(), m = y.size();
  if (a.size() != n || b.size() != m) throw ConfigError("discrete_ot_cost: size mismatch");
  if (n + m > 64) throw ConfigError("brute_force_ot: total support exceeds 64 cells");
  if (n == 0 || m == 0) throw ConfigError("discrete_ot_cost: empty measure");
  // Row sums for every source, column sums for all but the last target (the
  // remaining constraint is implied by equal total mass).
  const std::size_t vars = n * m;
  std::vector<std::vector<double>> A;
  std::vector<double> rhs;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(vars, 0.0);
    for (std::size_t j = 0; j < m; ++j) row[i * m + j] = 1.0;
    A.push_back(std::move(row));
    rhs.push_back(a[i]);
  }
  for (std::size_t j = 0; j + 1 < m; ++j) {
    std::vector<double> row(vars, 0.0);
    for (std::size_t i = 0; i < n; ++i) row[i * m + j] = 1.0;
    A.push_back(std::move(row));
    rhs.push_back(b[j]);
  }
  std::vector<double> c(vars);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double d0 = x[i][0] - y[j][0], d1 = x[i][1] - y[j][1];
      c[i * m + j] = d0 * d0 + d1 * d1;
    }
  Tableau t(A, rhs, std::move(c));
  return t.solve();
}

}  // namespace jkoflow
