#include "jkoflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "jkoflow/error.hpp"
#include "jkoflow/interaction.hpp"
#include "jkoflow/transport.hpp"

namespace jkoflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double pair_distance_sq(const Density& a, const Density& b) {
  if (a.grid().dim() == 1) return w2_exact_1d(a, b).cost;
  const double dx = a.grid().axis(0).spacing();
  SinkhornOptions opt;
  opt.epsilon = dx * dx;
  return std::max(0.0, sinkhorn_divergence(a, b, opt));
}

ScalarField power_field(const Density& rho, double p) {
  ScalarField f{rho.grid(), std::vector<double>(rho.size())};
  for (std::size_t c = 0; c < rho.size(); ++c) f.values[c] = std::pow(rho[c], p);
  return f;
}

double ratio_spread(const std::vector<double>& v) {
  double lo = kInf, hi = -kInf;
  bool pos = true, neg = true;
  for (double x : v) {
    lo = std::min(lo, std::abs(x));
    hi = std::max(hi, std::abs(x));
    pos = pos && x > 0.0;
    neg = neg && x < 0.0;
  }
  if (!(pos || neg)) return kInf;
  return hi / lo;
}

}  // namespace

const Check& DiagnosticsReport::add(std::string name, double statistic, double bound,
                                    double lower) {
  Check c;
  c.name = std::move(name);
  c.statistic = statistic;
  c.bound = bound;
  c.lower = lower;
  c.pass = statistic <= bound && statistic >= lower;
  checks.push_back(std::move(c));
  return checks.back();
}

bool DiagnosticsReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* DiagnosticsReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

SpeciesSeries species_series(const Trajectory& traj, const SpeciesSystem& sys, int i) {
  SpeciesSeries s;
  const std::vector<double> actions = step_actions(traj, sys, i);
  const int N = traj.step_count();
  for (int k = 0; k <= N; ++k) {
    const Density& rho = traj.density(k, i);
    s.t.push_back(k * traj.h);
    s.moment.push_back(second_moment(rho));
    s.internal.push_back(eval_functional(sys.energy(i), rho));
    if (k == 0) {
      s.mass.push_back(rho.mass());
      const ScalarField V = assemble_potential(sys.interaction(), i, traj.initial);
      s.potential.push_back(integrate(V, rho));
      s.w2sq.push_back(0.0);
      s.residual.push_back(std::nullopt);
      s.action.push_back(0.0);
      continue;
    }
    const SpeciesStep& rec = traj.steps[k - 1].species[i];
    s.mass.push_back(rec.mass_before_renorm);
    s.potential.push_back(rec.potential);
    s.w2sq.push_back(rec.w2sq);
    s.residual.push_back(rec.residual);
    s.action.push_back(actions[k - 1]);
  }
  return s;
}

double gradient_estimate_L2H1(const Trajectory& traj, const SpeciesSystem& sys, int i) {
  const double m = sys.energy(i).m();
  const double vol = sys.grid().cell_volume();
  double total = 0.0;
  for (int k = 1; k <= traj.step_count(); ++k) {
    const ScalarField u = power_field(traj.density(k, i), 0.5 * m);
    const std::vector<double> g = discrete_gradient(u).norms();
    double s = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) s += (g[c] * g[c] + u.values[c] * u.values[c]) * vol;
    total += traj.h * s;
  }
  return total;
}

double gradient_estimate_L1W11(const Trajectory& traj, const SpeciesSystem& sys, int i) {
  const double m = sys.energy(i).m();
  const double vol = sys.grid().cell_volume();
  double total = 0.0;
  for (int k = 1; k <= traj.step_count(); ++k) {
    const ScalarField u = power_field(traj.density(k, i), m);
    const std::vector<double> g = discrete_gradient(u).norms();
    double s = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) s += (g[c] + std::abs(u.values[c])) * vol;
    total += traj.h * s;
  }
  return total;
}

double action_density(double r, const std::array<double, 2>& m) {
  const double m2 = m[0] * m[0] + m[1] * m[1];
  if (r > 0.0) return m2 / r;
  return m2 == 0.0 ? 0.0 : kInf;
}

double benamou_brenier_action(std::span<const Density> rho, std::span<const VectorField> momentum,
                              double h) {
  if (rho.size() != momentum.size())
    throw ConfigError("benamou_brenier_action: one momentum field per density");
  double total = 0.0;
  for (std::size_t k = 0; k < rho.size(); ++k) {
    const Grid& g = rho[k].grid();
    require_same_grid(g, momentum[k].grid, "benamou_brenier_action");
    double s = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
      const std::array<double, 2> m{momentum[k].components[0][c],
                                    g.dim() > 1 ? momentum[k].components[1][c] : 0.0};
      s += action_density(rho[k][c], m);
    }
    total += h * s * g.cell_volume();
  }
  return total;
}

std::vector<double> step_actions(const Trajectory& traj, const SpeciesSystem& sys, int i) {
  const Grid& g = sys.grid();
  const InternalEnergy& e = sys.energy(i);
  std::vector<double> out;
  for (int k = 1; k <= traj.step_count(); ++k) {
    const Density& rho = traj.density(k, i);
    const std::vector<double>& V = traj.steps[k - 1].species[i].frozen_potential;
    std::vector<double> P(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) P[c] = e.pressure(rho[c]);
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const double dx = g.axis(a).spacing();
      const int nx = g.cells(0), ny = g.dim() > 1 ? g.cells(1) : 1;
      for (int j = 0; j < ny; ++j) {
        for (int q = 0; q < nx; ++q) {
          const int qi = a == 0 ? q + 1 : q, qj = a == 1 ? j + 1 : j;
          if (qi >= nx || qj >= ny) continue;
          const std::size_t c0 = g.index(q, j), c1 = g.index(qi, qj);
          const double r = 0.5 * (rho[c0] + rho[c1]);
          const double m = (P[c1] - P[c0]) / dx + r * (V[c1] - V[c0]) / dx;
          s += action_density(r, {m, 0.0});
        }
      }
    }
    out.push_back(s * g.cell_volume());
  }
  return out;
}

double benamou_brenier_action(const Trajectory& traj, const SpeciesSystem& sys, int i) {
  double total = 0.0;
  for (double a : step_actions(traj, sys, i)) total += traj.h * a;
  return total;
}

std::optional<double> holder_constant(const Trajectory& traj, int i) {
  if (traj.initial.empty() || traj.initial[0].grid().dim() != 1) return std::nullopt;
  const int N = traj.step_count();
  const int samples = std::min(N, 16);
  std::vector<int> ks;
  for (int q = 0; q <= samples; ++q) ks.push_back(static_cast<int>(std::lround(double(q) * N / samples)));
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  double worst = 0.0;
  for (std::size_t a = 0; a < ks.size(); ++a) {
    for (std::size_t b = a + 1; b < ks.size(); ++b) {
      const double w = w2_exact_1d(traj.density(ks[a], i), traj.density(ks[b], i)).distance();
      const double dt = std::abs(ks[b] - ks[a]) * traj.h;
      worst = std::max(worst, w / std::sqrt(dt + traj.h));
    }
  }
  return worst;
}

double displacement_energy_1d(const InternalEnergy& e, const Density& rho, const Density& mu,
                              double t) {
  if (rho.grid().dim() != 1) throw ConfigError("displacement_energy_1d: requires a 1-D grid");
  require_same_grid(rho.grid(), mu.grid(), "displacement_energy_1d");
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("displacement_energy_1d: t must lie in [0, 1]");
  const double dx = rho.grid().axis(0).spacing();
  const std::size_t n = rho.size();
  std::size_t i = 0, j = 0;
  while (i < n && !(rho[i] > 0.0)) ++i;
  while (j < n && !(mu[j] > 0.0)) ++j;
  double ra = i < n ? rho[i] * dx : 0.0, rb = j < n ? mu[j] * dx : 0.0;
  double total = 0.0;
  while (i < n && j < n) {
    const double w = std::min(ra, rb);
    const double len = (1.0 - t) * w / rho[i] + t * w / mu[j];
    total += len * e.F(w / len);
    ra -= w;
    rb -= w;
    if (ra <= 0.0) {
      while (++i < n && !(rho[i] > 0.0)) {
      }
      if (i < n) ra = rho[i] * dx;
    }
    if (rb <= 0.0) {
      while (++j < n && !(mu[j] > 0.0)) {
      }
      if (j < n) rb = mu[j] * dx;
    }
  }
  return total;
}

double vector_distance(std::span<const Density> a, std::span<const Density> b) {
  if (a.size() != b.size()) throw ConfigError("vector_distance: species counts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    require_same_grid(a[i].grid(), b[i].grid(), "vector_distance");
    s += pair_distance_sq(a[i], b[i]);
  }
  return s;
}

double fit_growth_rate(std::span<const double> t, std::span<const double> d) {
  if (t.size() != d.size()) throw ConfigError("fit_growth_rate: size mismatch");
  const std::size_t start = t.size() / 2;
  std::vector<double> xs, ys;
  for (std::size_t k = start; k < t.size(); ++k) {
    if (!(d[k] > 0.0)) continue;
    xs.push_back(t[k]);
    ys.push_back(std::log(d[k]));
  }
  if (xs.size() < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= xs.size();
  my /= xs.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

ContractionReport contraction_from_series(std::vector<double> t, std::vector<double> d,
                                          double c_cert, double epsilon) {
  ContractionReport rep;
  rep.growth_rate = fit_growth_rate(t, d);
  rep.t = std::move(t);
  rep.distance = std::move(d);
  rep.c_cert = c_cert;
  rep.bound = 4.0 * c_cert + rep.margin;
  rep.epsilon = epsilon;
  rep.pass = rep.growth_rate <= rep.bound;
  return rep;
}

ContractionReport contraction_check(const SpeciesSystem& sys, std::vector<Density> first,
                                    std::vector<Density> second, double h, double T,
                                    const SolverOptions& solver) {
  const Trajectory a = run_scheme(sys, std::move(first), h, T, solver);
  const Trajectory b = run_scheme(sys, std::move(second), h, T, solver);
  std::vector<double> t, d;
  for (int k = 0; k <= a.step_count(); ++k) {
    const auto& da = k == 0 ? a.initial : a.steps[k - 1].densities;
    const auto& db = k == 0 ? b.initial : b.steps[k - 1].densities;
    t.push_back(k * h);
    d.push_back(vector_distance(da, db));
  }
  const std::vector<TrialPair> pairs = standard_trial_pairs(sys.grid(), sys.species());
  const CertificationReport cert = certify_hypotheses(sys.interaction(), sys.grid(), pairs);
  const double dx = sys.grid().axis(0).spacing();
  ContractionReport rep = contraction_from_series(std::move(t), std::move(d), cert.c_hess,
                                                  sys.grid().dim() == 1 ? 0.0 : dx * dx);
  rep.c_lip = cert.c_lip;
  return rep;
}

BaselineKind parse_baseline(const std::string& name) {
  if (name == "heat") return BaselineKind::kHeat;
  if (name == "barenblatt") return BaselineKind::kBarenblatt;
  if (name == "gibbs") return BaselineKind::kGibbs;
  throw ConfigError("unknown baseline '" + name + "' (expected heat, barenblatt or gibbs)");
}

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kHeat:
      return "heat";
    case BaselineKind::kBarenblatt:
      return "barenblatt";
    case BaselineKind::kGibbs:
      return "gibbs";
  }
  return "";
}

SpeciesSystem baseline_system(BaselineKind kind, const BaselineParams& p, const Grid& grid) {
  switch (kind) {
    case BaselineKind::kHeat:
      return SpeciesSystem(grid, {InternalEnergy::entropy()}, InteractionSpec::none(1));
    case BaselineKind::kBarenblatt:
      if (grid.dim() != 1) throw ConfigError("barenblatt baseline is 1-D");
      return SpeciesSystem(grid, {InternalEnergy::power(2.0)}, InteractionSpec::none(1));
    case BaselineKind::kGibbs:
      return SpeciesSystem(grid, {InternalEnergy::entropy()},
                           InteractionSpec({{Kernel::zero()}}, {ExternalPotential::confining(p.radius)}));
  }
  throw ConfigError("unknown baseline");
}

Density baseline_exact(BaselineKind kind, const BaselineParams& p, const Grid& grid, double t) {
  switch (kind) {
    case BaselineKind::kHeat: {
      const double var = p.sigma0 * p.sigma0 + 2.0 * t;
      return Density::from_function(grid, [&](const Point& x) {
        const double r2 = x[0] * x[0] + (grid.dim() > 1 ? x[1] * x[1] : 0.0);
        return std::exp(-r2 / (2.0 * var));
      });
    }
    case BaselineKind::kBarenblatt: {
      // F(x) = x^2: rho = (12 s)^(-1/3) (B - x^2 (12 s)^(-2/3))_+, unit mass.
      const double B = std::pow(0.75, 2.0 / 3.0);
      const double s = 12.0 * (p.t0 + t);
      return Density::from_function(grid, [&](const Point& x) {
        return std::pow(s, -1.0 / 3.0) * std::max(0.0, B - x[0] * x[0] * std::pow(s, -2.0 / 3.0));
      });
    }
    case BaselineKind::kGibbs: {
      const ExternalPotential U = ExternalPotential::confining(p.radius);
      return Density::from_function(grid, [&](const Point& x) { return std::exp(-U(x)); });
    }
  }
  throw ConfigError("unknown baseline");
}

BaselineReport closed_form_baseline(BaselineKind kind, const BaselineParams& p, double h,
                                    const Grid& grid, const SolverOptions& solver) {
  if (!(h > 0.0)) throw ConfigError("closed_form_baseline: h must be positive");
  const SpeciesSystem sys = baseline_system(kind, p, grid);
  const double T = kind == BaselineKind::kGibbs ? p.steps * h : p.T;
  BaselineReport rep;
  rep.kind = kind;
  rep.h = h;
  rep.T = T;
  rep.trajectory = run_scheme(sys, {baseline_exact(kind, p, grid, 0.0)}, h, T, solver);
  const Density& last = rep.trajectory.density(rep.trajectory.step_count(), 0);
  const Density exact = baseline_exact(kind, p, grid, kind == BaselineKind::kGibbs ? 0.0 : T);
  rep.l1_error = l1_distance(last, exact);
  rep.w2_error = std::sqrt(pair_distance_sq(last, exact));
  if (solver.kind == SolverKind::kEntropic) rep.epsilon = solver.effective_epsilon(grid);
  for (const auto& st : rep.trajectory.steps)
    if (st.species[0].residual) rep.max_residual = std::max(rep.max_residual, *st.species[0].residual);
  return rep;
}

DiagnosticsReport scheme_estimates(const SpeciesSystem& sys, const std::vector<Density>& initial,
                                   std::span<const double> hs, double T,
                                   const SolverOptions& solver, const EstimatesOptions& opt) {
  if (hs.size() < 2) throw ConfigError("scheme_estimates: need at least two time steps");
  const int l = sys.species();
  const CertificationReport cert =
      certify_hypotheses(sys.interaction(), sys.grid(), standard_trial_pairs(sys.grid(), l));

  double mass = 0.0, renorm = 0.0, dissipation = -kInf, energy_excess = -kInf;
  // [species][level]
  std::vector<std::vector<double>> moments(l), energies(l), sums(l), holders(l);
  for (double h : hs) {
    const Trajectory traj = run_scheme(sys, initial, h, T, solver);
    for (int i = 0; i < l; ++i) {
      const InternalEnergy& e = sys.energy(i);
      const double F0 = eval_functional(e, traj.initial[i]);
      double max_m = second_moment(traj.initial[i]), max_f = F0, sum = 0.0;
      for (int k = 1; k <= traj.step_count(); ++k) {
        const SpeciesStep& rec = traj.steps[k - 1].species[i];
        mass = std::max(mass, std::abs(rec.mass_before_renorm - 1.0));
        renorm = std::max(renorm, rec.renorm_factor - 1.0);
        dissipation = std::max(dissipation, rec.objective_new - rec.objective_prev);
        max_m = std::max(max_m, second_moment(traj.density(k, i)));
        max_f = std::max(max_f, rec.internal);
        sum += rec.w2sq;
      }
      energy_excess = std::max(energy_excess, max_f - F0 - cert.c_lip * cert.c_lip * T);
      moments[i].push_back(max_m);
      energies[i].push_back(max_f);
      sums[i].push_back(sum);
      if (auto hc = holder_constant(traj, i)) holders[i].push_back(*hc);
    }
  }

  DiagnosticsReport rep;
  rep.add("mass_defect", mass, 1e-8);
  rep.add("renormalization_excess", renorm, 1e-6);
  rep.add("dissipation_excess", dissipation, 10.0 * solver.tol);
  rep.add("energy_bound_excess", energy_excess, 0.0);
  double moment_spread = 0.0, energy_spread = 0.0, holder_spread = 0.0;
  double ratio_min = kInf, ratio_max = -kInf;
  for (int i = 0; i < l; ++i) {
    moment_spread = std::max(moment_spread, ratio_spread(moments[i]));
    energy_spread = std::max(energy_spread, ratio_spread(energies[i]));
    if (!holders[i].empty()) holder_spread = std::max(holder_spread, ratio_spread(holders[i]));
    for (std::size_t q = 1; q < sums[i].size(); ++q) {
      const double r = sums[i][q] / sums[i][q - 1];
      ratio_min = std::min(ratio_min, r);
      ratio_max = std::max(ratio_max, r);
    }
  }
  rep.add("moment_stability", moment_spread, opt.stability);
  rep.add("energy_stability", energy_spread, opt.stability);
  rep.add("distance_sum_ratio_max", ratio_max, opt.ratio_hi, opt.ratio_lo);
  rep.add("distance_sum_ratio_min", ratio_min, opt.ratio_hi, opt.ratio_lo);
  if (sys.grid().dim() == 1) rep.add("holder_stability", holder_spread, 1.5);
  return rep;
}

DiagnosticsReport analyze_trajectory(const Trajectory& traj, const SpeciesSystem& sys) {
  DiagnosticsReport rep;
  double mass = 0.0, renorm = 0.0, dissipation = -kInf, residual = 0.0;
  bool has_residual = false;
  for (const auto& st : traj.steps) {
    for (const auto& rec : st.species) {
      mass = std::max(mass, std::abs(rec.mass_before_renorm - 1.0));
      renorm = std::max(renorm, rec.renorm_factor - 1.0);
      dissipation = std::max(dissipation, rec.objective_new - rec.objective_prev);
      if (rec.residual) {
        has_residual = true;
        residual = std::max(residual, *rec.residual);
      }
    }
  }
  rep.add("mass_defect", mass, 1e-8);
  rep.add("renormalization_excess", renorm, 1e-6);
  rep.add("dissipation_excess", dissipation, 10.0 * traj.solver.tol);
  double action = 0.0;
  for (int i = 0; i < sys.species(); ++i) action = std::max(action, benamou_brenier_action(traj, sys, i));
  rep.add("action", action, std::numeric_limits<double>::max());
  if (has_residual) rep.add("max_optimality_residual", residual, kInf);
  return rep;
}

}  // namespace jkoflow
