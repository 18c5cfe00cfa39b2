#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jkoflow/grid.hpp"

namespace jkoflow {

enum class KernelFamily { kZero, kConstant, kGaussian };

// Pair kernel W(z) >= 0, evaluated analytically at cell offsets.
//   constant: W = A
//   gaussian: W = A exp(-|z|^2 / (2 sigma^2))
struct Kernel {
  KernelFamily family = KernelFamily::kZero;
  double amplitude = 0.0;
  double sigma = 1.0;

  static Kernel zero() { return {}; }
  static Kernel constant(double a) { return {KernelFamily::kConstant, a, 1.0}; }
  static Kernel gaussian(double a, double sigma) { return {KernelFamily::kGaussian, a, sigma}; }

  void validate() const;
  double operator()(const Point& z) const;
  // sup |grad W| and sup |D^2 W| (operator norm); the same in one and two
  // dimensions for the radial gaussian.
  double gradient_bound() const;
  double hessian_bound() const;
  bool is_zero() const { return family == KernelFamily::kZero || amplitude == 0.0; }
};

enum class ExternalFamily { kZero, kConfining };

// Smoothed quadratic confinement about `center`:
//   U(x) = min(|x|^2 / 2, R^2/2 + R (|x| - R)),  x measured from center.
struct ExternalPotential {
  ExternalFamily family = ExternalFamily::kZero;
  double radius = 1.0;
  Point center{0.0, 0.0};

  static ExternalPotential zero() { return {}; }
  static ExternalPotential confining(double radius, Point center = {0.0, 0.0}) {
    return {ExternalFamily::kConfining, radius, center};
  }

  void validate() const;
  double operator()(const Point& x) const;
  double gradient_bound(const Grid& grid) const;
  double hessian_bound() const;
};

// V_i[rho] = U_i + sum_j W_ij * rho_j for l species.
class InteractionSpec {
 public:
  InteractionSpec() = default;
  InteractionSpec(std::vector<std::vector<Kernel>> kernels, std::vector<ExternalPotential> external);
  static InteractionSpec none(int species);

  int species() const { return static_cast<int>(external_.size()); }
  const Kernel& kernel(int i, int j) const;
  const ExternalPotential& external(int i) const;

  // max_i (||grad U_i|| + sum_j ||grad W_ij||) over the grid's box.
  double lipschitz_constant(const Grid& grid) const;
  // max_i (||D^2 U_i|| + sum_j ||D^2 W_ij||).
  double hessian_constant() const;

 private:
  void check_species(int i) const;

  std::vector<std::vector<Kernel>> kernels_;
  std::vector<ExternalPotential> external_;
};

ScalarField assemble_potential(const InteractionSpec& spec, int i,
                               std::span<const Density> rhos);

// Integral of V_i[mu] against rho.
double eval_interaction_functional(const InteractionSpec& spec, int i, const Density& rho,
                                   std::span<const Density> frozen);

// A pair of species vectors (nu, sigma) used to probe the W2-Lipschitz
// bound of grad V.
using TrialPair = std::pair<std::vector<Density>, std::vector<Density>>;

// Four deterministic pairs of gaussian bumps per species, shifted and
// widened against each other; enough to exercise certify_hypotheses.
std::vector<TrialPair> standard_trial_pairs(const Grid& grid, int species);

struct CertificationReport {
  double c_lip = 0.0;
  double c_hess = 0.0;
  // Ratios are accepted up to c_hess * sqrt(dim) + tolerance.
  double bound = 0.0;
  double tolerance = 0.0;
  std::vector<double> ratios;
  double max_ratio = 0.0;
  int skipped = 0;
  bool nonnegative = true;
  bool pass = true;
};

// W2 between species vectors is the sum of the per-species distances,
// computed exactly in 1-D and with debiased Sinkhorn in 2-D.
CertificationReport certify_hypotheses(const InteractionSpec& spec, const Grid& grid,
                                       std::span<const TrialPair> pairs,
                                       double tolerance = 1e-8);

}  // namespace jkoflow
