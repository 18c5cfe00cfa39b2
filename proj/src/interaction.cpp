#include "jkoflow/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jkoflow/error.hpp"
#include "jkoflow/transport.hpp"

namespace jkoflow {

void Kernel::validate() const {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
    throw ConfigError("kernel amplitude must be finite and >= 0");
  if (family == KernelFamily::kGaussian && (!(sigma > 0.0) || !std::isfinite(sigma)))
    throw ConfigError("gaussian kernel needs sigma > 0");
}

double Kernel::operator()(const Point& z) const {
  switch (family) {
    case KernelFamily::kZero:
      return 0.0;
    case KernelFamily::kConstant:
      return amplitude;
    case KernelFamily::kGaussian:
      return amplitude * std::exp(-(z[0] * z[0] + z[1] * z[1]) / (2.0 * sigma * sigma));
  }
  return 0.0;
}

double Kernel::gradient_bound() const {
  if (family != KernelFamily::kGaussian) return 0.0;
  return amplitude * std::exp(-0.5) / sigma;
}

double Kernel::hessian_bound() const {
  if (family != KernelFamily::kGaussian) return 0.0;
  // Eigenvalues of D^2 W are W/sigma^2 (r^2/sigma^2 - 1) and -W/sigma^2;
  // both are bounded by A/sigma^2, attained at the origin.
  return amplitude / (sigma * sigma);
}

void ExternalPotential::validate() const {
  if (family == ExternalFamily::kConfining && (!(radius > 0.0) || !std::isfinite(radius)))
    throw ConfigError("confining potential needs radius > 0");
}

double ExternalPotential::operator()(const Point& x) const {
  if (family == ExternalFamily::kZero) return 0.0;
  const double dx = x[0] - center[0];
  const double dy = x[1] - center[1];
  const double r = std::sqrt(dx * dx + dy * dy);
  if (r <= radius) return 0.5 * r * r;
  return 0.5 * radius * radius + radius * (r - radius);
}

double ExternalPotential::gradient_bound(const Grid& grid) const {
  if (family == ExternalFamily::kZero) return 0.0;
  // |grad U| = min(|x|, R); the largest |x| on the box is at a corner.
  double s = 0.0;
  for (int a = 0; a < grid.dim(); ++a) {
    const Axis& ax = grid.axis(a);
    const double far = std::max(std::abs(ax.lower - center[a]), std::abs(ax.upper - center[a]));
    s += far * far;
  }
  return std::min(radius, std::sqrt(s));
}

double ExternalPotential::hessian_bound() const {
  return family == ExternalFamily::kZero ? 0.0 : 1.0;
}

InteractionSpec::InteractionSpec(std::vector<std::vector<Kernel>> kernels,
                                 std::vector<ExternalPotential> external)
    : kernels_(std::move(kernels)), external_(std::move(external)) {
  const std::size_t l = external_.size();
  if (l == 0) throw ConfigError("interaction: at least one species required");
  if (kernels_.size() != l) throw ConfigError("interaction: kernel matrix must be l x l");
  for (const auto& row : kernels_) {
    if (row.size() != l) throw ConfigError("interaction: kernel matrix must be l x l");
    for (const auto& k : row) k.validate();
  }
  for (const auto& u : external_) u.validate();
}

InteractionSpec InteractionSpec::none(int species) {
  const auto l = static_cast<std::size_t>(species);
  return InteractionSpec(std::vector<std::vector<Kernel>>(l, std::vector<Kernel>(l)),
                         std::vector<ExternalPotential>(l));
}

void InteractionSpec::check_species(int i) const {
  if (i < 0 || i >= species())
    throw ConfigError("interaction: species index " + std::to_string(i) + " out of range");
}

const Kernel& InteractionSpec::kernel(int i, int j) const {
  check_species(i);
  check_species(j);
  return kernels_[i][j];
}

const ExternalPotential& InteractionSpec::external(int i) const {
  check_species(i);
  return external_[i];
}

double InteractionSpec::lipschitz_constant(const Grid& grid) const {
  double best = 0.0;
  for (int i = 0; i < species(); ++i) {
    double s = external_[i].gradient_bound(grid);
    for (const auto& k : kernels_[i]) s += k.gradient_bound();
    best = std::max(best, s);
  }
  return best;
}

double InteractionSpec::hessian_constant() const {
  double best = 0.0;
  for (int i = 0; i < species(); ++i) {
    double s = external_[i].hessian_bound();
    for (const auto& k : kernels_[i]) s += k.hessian_bound();
    best = std::max(best, s);
  }
  return best;
}

ScalarField assemble_potential(const InteractionSpec& spec, int i,
                               std::span<const Density> rhos) {
  if (static_cast<int>(rhos.size()) != spec.species())
    throw ConfigError("assemble_potential: expected one density per species");
  const ExternalPotential& u = spec.external(i);
  const Grid& g = rhos[0].grid();
  ScalarField out = ScalarField::from_function(g, [&](const Point& x) { return u(x); });
  for (int j = 0; j < spec.species(); ++j) {
    require_same_grid(g, rhos[j].grid(), "assemble_potential");
    const Kernel& k = spec.kernel(i, j);
    if (k.is_zero()) continue;
    if (k.family == KernelFamily::kConstant) {
      const double c = k.amplitude * rhos[j].mass();
      for (double& v : out.values) v += c;
      continue;
    }
    const ScalarField w = convolve([&k](const Point& z) { return k(z); }, rhos[j]);
    for (std::size_t c = 0; c < out.values.size(); ++c) out.values[c] += w.values[c];
  }
  return out;
}

double eval_interaction_functional(const InteractionSpec& spec, int i, const Density& rho,
                                   std::span<const Density> frozen) {
  return integrate(assemble_potential(spec, i, frozen), rho);
}

namespace {

double species_distance(const Density& a, const Density& b) {
  if (a.grid().dim() == 1) return w2_exact_1d(a, b, CellModel::kAtoms).distance();
  const Axis& ax = a.grid().axis(0);
  SinkhornOptions opt;
  opt.epsilon = ax.spacing() * ax.spacing();
  return std::sqrt(std::max(0.0, sinkhorn_divergence(a, b, opt)));
}

}  // namespace

CertificationReport certify_hypotheses(const InteractionSpec& spec, const Grid& grid,
                                       std::span<const TrialPair> pairs, double tolerance) {
  if (pairs.size() < 3) throw ConfigError("certify_hypotheses: need at least 3 trial pairs");
  CertificationReport rep;
  rep.c_lip = spec.lipschitz_constant(grid);
  rep.c_hess = spec.hessian_constant();
  rep.tolerance = tolerance;
  rep.bound = rep.c_hess * std::sqrt(static_cast<double>(grid.dim())) + tolerance;

  const int l = spec.species();
  for (const auto& [nu, sg] : pairs) {
    if (static_cast<int>(nu.size()) != l || static_cast<int>(sg.size()) != l)
      throw ConfigError("certify_hypotheses: trial pair has the wrong species count");
    double w2 = 0.0;
    for (int j = 0; j < l; ++j) w2 += species_distance(nu[j], sg[j]);
    for (int i = 0; i < l; ++i) {
      const ScalarField va = assemble_potential(spec, i, nu);
      const ScalarField vb = assemble_potential(spec, i, sg);
      for (std::size_t c = 0; c < va.values.size(); ++c) {
        if (va.values[c] < 0.0 || vb.values[c] < 0.0) rep.nonnegative = false;
      }
      if (!(w2 > 0.0)) {
        ++rep.skipped;
        continue;
      }
      // Only the interaction part depends on the densities; U_i cancels.
      const VectorField ga = discrete_gradient(va);
      const VectorField gb = discrete_gradient(vb);
      double worst = 0.0;
      for (std::size_t c = 0; c < va.values.size(); ++c) {
        double s = 0.0;
        for (int a = 0; a < grid.dim(); ++a) {
          const double d = ga.components[a][c] - gb.components[a][c];
          s += d * d;
        }
        worst = std::max(worst, std::sqrt(s));
      }
      const double ratio = worst / w2;
      rep.ratios.push_back(ratio);
      rep.max_ratio = std::max(rep.max_ratio, ratio);
    }
  }
  rep.pass = rep.nonnegative && rep.max_ratio <= rep.bound;
  return rep;
}

std::vector<TrialPair> standard_trial_pairs(const Grid& grid, int species) {
  std::vector<TrialPair> pairs;
  auto bump = [&](double frac, double width) {
    return Density::from_function(grid, [&](const Point& x) {
      double r2 = 0.0;
      for (int a = 0; a < grid.dim(); ++a) {
        const Axis& ax = grid.axis(a);
        const double L = ax.upper - ax.lower;
        const double z = (x[a] - (ax.lower + frac * L)) / (width * L);
        r2 += z * z;
      }
      return std::exp(-0.5 * r2);
    });
  };
  for (int p = 0; p < 4; ++p) {
    TrialPair tp;
    for (int i = 0; i < species; ++i) {
      const double f = 0.35 + 0.05 * p + 0.03 * i;
      tp.first.push_back(bump(f, 0.08));
      tp.second.push_back(bump(f + 0.04 * (p + 1), 0.08 * (1.0 + 0.1 * p)));
    }
    pairs.push_back(std::move(tp));
  }
  return pairs;
}

}  // namespace jkoflow
