#include "jkoflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jkoflow/error.hpp"

namespace jkoflow {

namespace {

void validate_axis(const Axis& a) {
  if (!(a.cells > 0)) throw ConfigError("grid axis needs a positive cell count");
  if (!std::isfinite(a.lower) || !std::isfinite(a.upper) || !(a.upper > a.lower))
    throw ConfigError("grid axis needs finite bounds with upper > lower");
}

}  // namespace

Grid::Grid(int dim, Axis x, Axis y) : dim_(dim), axes_{x, y} {
  validate_axis(axes_[0]);
  if (dim_ == 2) validate_axis(axes_[1]);
}

Grid Grid::line(double lower, double upper, int cells) {
  return Grid(1, Axis{lower, upper, cells}, Axis{0.0, 1.0, 1});
}

Grid Grid::plane(Axis x, Axis y) { return Grid(2, x, y); }

std::size_t Grid::size() const {
  std::size_t n = static_cast<std::size_t>(axes_[0].cells);
  if (dim_ == 2) n *= static_cast<std::size_t>(axes_[1].cells);
  return n;
}

double Grid::cell_volume() const {
  double v = axes_[0].spacing();
  if (dim_ == 2) v *= axes_[1].spacing();
  return v;
}

Point Grid::center(std::size_t index) const {
  const auto nx = static_cast<std::size_t>(axes_[0].cells);
  const int i = static_cast<int>(index % nx);
  if (dim_ == 1) return {axes_[0].center(i), 0.0};
  const int j = static_cast<int>(index / nx);
  return {axes_[0].center(i), axes_[1].center(j)};
}

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (!(a == b)) throw ConfigError(std::string(where) + ": grid mismatch");
}

// ---------------------------------------------------------------------------

Density::Density(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw ConfigError("density: value count does not match the grid");
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0)
      throw ConfigError("density: values must be finite and nonnegative");
  }
  const double m = mass();
  if (std::abs(m - 1.0) > kMassRenormTolerance)
    throw ConfigError("density: mass " + format_exact(m) + " is not 1");
  // Below 1e-13 the defect is roundoff; leaving values untouched keeps
  // snapshot round-trips bit-exact.
  if (std::abs(m - 1.0) > 1e-13) {
    for (double& v : values_) v /= m;
  }
}

Density Density::normalized(Grid grid, std::vector<double> values) {
  double total = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0)
      throw ConfigError("density: values must be finite and nonnegative");
    total += v;
  }
  total *= grid.cell_volume();
  if (!(total > 0.0)) throw ConfigError("density: zero total mass");
  for (double& v : values) v /= total;
  return Density(std::move(grid), std::move(values));
}

Density Density::uniform(const Grid& grid) {
  return Density::normalized(grid, std::vector<double>(grid.size(), 1.0));
}

Density Density::from_function(const Grid& grid,
                               const std::function<double(const Point&)>& f) {
  std::vector<double> v(grid.size());
  for (std::size_t c = 0; c < v.size(); ++c) v[c] = f(grid.center(c));
  return Density::normalized(grid, std::move(v));
}

double Density::mass() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s * grid_.cell_volume();
}

// ---------------------------------------------------------------------------

ScalarField ScalarField::constant(const Grid& grid, double c) {
  return ScalarField{grid, std::vector<double>(grid.size(), c)};
}

ScalarField ScalarField::from_function(const Grid& grid,
                                       const std::function<double(const Point&)>& f) {
  ScalarField out{grid, std::vector<double>(grid.size())};
  for (std::size_t c = 0; c < out.values.size(); ++c) out.values[c] = f(grid.center(c));
  return out;
}

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

std::vector<double> VectorField::norms() const {
  const std::size_t n = grid.size();
  std::vector<double> out(n);
  for (std::size_t c = 0; c < n; ++c) {
    double s = components[0][c] * components[0][c];
    if (grid.dim() == 2) s += components[1][c] * components[1][c];
    out[c] = std::sqrt(s);
  }
  return out;
}

double VectorField::max_norm() const {
  double m = 0.0;
  for (double v : norms()) m = std::max(m, v);
  return m;
}

double integrate(const ScalarField& f, const Density& rho) {
  require_same_grid(f.grid, rho.grid(), "integrate");
  double s = 0.0;
  for (std::size_t c = 0; c < rho.size(); ++c) s += f.values[c] * rho[c];
  return s * rho.grid().cell_volume();
}

double second_moment(const Density& rho) {
  const Grid& g = rho.grid();
  double s = 0.0;
  for (std::size_t c = 0; c < rho.size(); ++c) {
    const Point x = g.center(c);
    s += (x[0] * x[0] + x[1] * x[1]) * rho[c];
  }
  return s * g.cell_volume();
}

VectorField discrete_gradient(const ScalarField& f) {
  const Grid& g = f.grid;
  VectorField out{g, {}};
  const int nx = g.cells(0);
  const int ny = g.dim() == 2 ? g.cells(1) : 1;
  for (int a = 0; a < g.dim(); ++a) {
    auto& comp = out.components[a];
    comp.assign(g.size(), 0.0);
    const int n = g.cells(a);
    const double dx = g.axis(a).spacing();
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int k = a == 0 ? i : j;
        auto at = [&](int kk) {
          return a == 0 ? f.values[g.index(kk, j)] : f.values[g.index(i, kk)];
        };
        double d = 0.0;
        if (n == 1) {
          d = 0.0;
        } else if (k == 0) {
          d = (at(1) - at(0)) / dx;
        } else if (k == n - 1) {
          d = (at(n - 1) - at(n - 2)) / dx;
        } else {
          d = (at(k + 1) - at(k - 1)) / (2.0 * dx);
        }
        comp[g.index(i, j)] = d;
      }
    }
  }
  return out;
}

ScalarField convolve(const OffsetFunction& kernel, const Density& rho) {
  const Grid& g = rho.grid();
  const int nx = g.cells(0);
  const int ny = g.dim() == 2 ? g.cells(1) : 1;
  const double hx = g.axis(0).spacing();
  const double hy = g.dim() == 2 ? g.axis(1).spacing() : 0.0;
  const int wx = 2 * nx - 1;
  const int wy = 2 * ny - 1;
  // table[(di + nx - 1) + wx * (dj + ny - 1)] = W(di*hx, dj*hy)
  std::vector<double> table(static_cast<std::size_t>(wx) * wy);
  for (int dj = -(ny - 1); dj <= ny - 1; ++dj)
    for (int di = -(nx - 1); di <= nx - 1; ++di)
      table[(di + nx - 1) + static_cast<std::size_t>(wx) * (dj + ny - 1)] =
          kernel(Point{di * hx, dj * hy});

  ScalarField out{g, std::vector<double>(g.size(), 0.0)};
  const double vol = g.cell_volume();
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double s = 0.0;
      for (int jj = 0; jj < ny; ++jj) {
        const double* row =
            &table[static_cast<std::size_t>(wx) * (j - jj + ny - 1) + (i + nx - 1)];
        const std::size_t base = g.index(0, jj);
        for (int ii = 0; ii < nx; ++ii) s += row[-ii] * rho[base + ii];
      }
      out.values[g.index(i, j)] = s * vol;
    }
  }
  return out;
}

double l1_distance(const Density& a, const Density& b) {
  require_same_grid(a.grid(), b.grid(), "l1_distance");
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += std::abs(a[c] - b[c]);
  return s * a.grid().cell_volume();
}

}  // namespace jkoflow
