#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace jkoflow {

using Point = std::array<double, 2>;

// One axis of a uniform cell-centered grid.
struct Axis {
  double lower = 0.0;
  double upper = 1.0;
  int cells = 1;

  double spacing() const { return (upper - lower) / cells; }
  double center(int j) const { return lower + (j + 0.5) * spacing(); }
  double edge(int j) const { return lower + j * spacing(); }

  bool operator==(const Axis&) const = default;
};

// The only supported boundary: a closed box with no-flux walls. Whole-space
// problems are approximated by a box large enough to carry negligible mass
// at its boundary cells.
enum class Boundary { kBoxNoFlux };

// Uniform cell-centered grid on a 1-D interval or a 2-D rectangle. Cells are
// stored x-fastest: index = i + nx * j.
class Grid {
 public:
  Grid() = default;
  static Grid line(double lower, double upper, int cells);
  static Grid plane(Axis x, Axis y);

  int dim() const { return dim_; }
  const Axis& axis(int a) const { return axes_[a]; }
  int cells(int a) const { return axes_[a].cells; }
  std::size_t size() const;
  double cell_volume() const;
  Boundary boundary() const { return Boundary::kBoxNoFlux; }

  std::size_t index(int i, int j = 0) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(axes_[0].cells) * static_cast<std::size_t>(j);
  }
  Point center(std::size_t index) const;

  bool operator==(const Grid&) const = default;

 private:
  Grid(int dim, Axis x, Axis y);

  int dim_ = 1;
  std::array<Axis, 2> axes_{};
};

// Nonnegative cell values with unit discrete mass. The constructor rejects
// negative or non-finite values, and renormalizes only small mass defects
// (|mass - 1| <= kMassRenormTolerance).
class Density {
 public:
  static constexpr double kMassRenormTolerance = 1e-6;

  Density() = default;
  Density(Grid grid, std::vector<double> values);

  // Scales arbitrary nonnegative values of positive total mass to unit mass.
  static Density normalized(Grid grid, std::vector<double> values);
  static Density uniform(const Grid& grid);
  // Samples f at cell centers, then normalizes.
  static Density from_function(const Grid& grid,
                               const std::function<double(const Point&)>& f);

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t c) const { return values_[c]; }
  std::size_t size() const { return values_.size(); }
  // Raw discrete mass, sum(value * |cell|).
  double mass() const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

struct ScalarField {
  Grid grid;
  std::vector<double> values;

  static ScalarField constant(const Grid& grid, double c);
  static ScalarField from_function(const Grid& grid,
                                   const std::function<double(const Point&)>& f);
  double max_abs() const;
};

struct VectorField {
  Grid grid;
  std::array<std::vector<double>, 2> components;

  // Pointwise Euclidean norm, per cell.
  std::vector<double> norms() const;
  double max_norm() const;
};

double integrate(const ScalarField& f, const Density& rho);
double second_moment(const Density& rho);

// Central differences in the interior, one-sided differences at the boundary
// cells of each axis. Exact on affine fields.
VectorField discrete_gradient(const ScalarField& f);

using OffsetFunction = std::function<double(const Point& offset)>;

// Direct summation (W * rho)(x_c) = sum_c' W(x_c - x_c') rho_c' |cell|.
// The kernel is tabulated once on the lattice of cell offsets. Mass outside
// the box is not represented: there are no periodic images.
ScalarField convolve(const OffsetFunction& kernel, const Density& rho);

double l1_distance(const Density& a, const Density& b);

void require_same_grid(const Grid& a, const Grid& b, const char* where);

// Density snapshot CSV. Header `# grid: dim,lo,hi,cells` (2-D grids append
// lo,hi,cells of the y axis), then `index,x[,y],value` per cell. Numbers use
// 17 significant digits so a write/read cycle is bit-exact.
void write_snapshot(std::ostream& out, const Density& rho);
void write_snapshot(const std::string& path, const Density& rho);
Density read_snapshot(std::istream& in);
Density read_snapshot(const std::string& path);

// Shortest round-trip decimal rendering with 17 significant digits.
std::string format_exact(double v);

}  // namespace jkoflow
