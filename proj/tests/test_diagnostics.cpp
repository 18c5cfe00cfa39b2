#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "jkoflow/diagnostics.hpp"
#include "jkoflow/error.hpp"
#include "jkoflow/transport.hpp"

using namespace jkoflow;

namespace {

Density gaussian(const Grid& g, double mean, double sigma) {
  return Density::from_function(g, [&](const Point& x) {
    return std::exp(-(x[0] - mean) * (x[0] - mean) / (2.0 * sigma * sigma));
  });
}

SpeciesSystem coupled_pair(const Grid& g) {
  return SpeciesSystem(g, {InternalEnergy::entropy(), InternalEnergy::power(2.0)},
                       InteractionSpec({{Kernel::zero(), Kernel::gaussian(1.0, 1.0)},
                                        {Kernel::gaussian(1.0, 1.0), Kernel::zero()}},
                                       {ExternalPotential::zero(), ExternalPotential::zero()}));
}

}  // namespace

TEST(GradientEstimates, UniformDensityIsLinearInT) {
  const Grid g = Grid::line(0.0, 2.0, 40);
  for (const InternalEnergy& e : {InternalEnergy::entropy(), InternalEnergy::power(2.0)}) {
    const SpeciesSystem sys(g, {e}, InteractionSpec::none(1));
    // u = rho^(m/2) with rho = 1/2: ||u||^2 = 2 (1/2)^m, no gradient.
    const double per_t = 2.0 * std::pow(0.5, e.m());
    for (double T : {0.1, 0.2, 0.4}) {
      const Trajectory tr = run_scheme(sys, {Density::uniform(g)}, 0.05, T, SolverOptions{});
      EXPECT_NEAR(gradient_estimate_L2H1(tr, sys, 0), per_t * T, 1e-9);
      EXPECT_NEAR(gradient_estimate_L1W11(tr, sys, 0), per_t * T, 1e-9);
      EXPECT_NEAR(benamou_brenier_action(tr, sys, 0), 0.0, 1e-12);
    }
  }
}

TEST(GradientEstimates, InvariantUnderRelabeling) {
  const Grid g = Grid::line(-4.0, 4.0, 64);
  const SpeciesSystem ab = coupled_pair(g);
  const SpeciesSystem ba(g, {InternalEnergy::power(2.0), InternalEnergy::entropy()},
                         InteractionSpec({{Kernel::zero(), Kernel::gaussian(1.0, 1.0)},
                                          {Kernel::gaussian(1.0, 1.0), Kernel::zero()}},
                                         {ExternalPotential::zero(), ExternalPotential::zero()}));
  const Density a = gaussian(g, -1.0, 0.5), b = gaussian(g, 1.0, 0.5);
  const Trajectory t1 = run_scheme(ab, {a, b}, 0.01, 0.1, SolverOptions{});
  const Trajectory t2 = run_scheme(ba, {b, a}, 0.01, 0.1, SolverOptions{});
  EXPECT_DOUBLE_EQ(gradient_estimate_L2H1(t1, ab, 0), gradient_estimate_L2H1(t2, ba, 1));
  EXPECT_DOUBLE_EQ(gradient_estimate_L2H1(t1, ab, 1), gradient_estimate_L2H1(t2, ba, 0));
  EXPECT_DOUBLE_EQ(gradient_estimate_L1W11(t1, ab, 1), gradient_estimate_L1W11(t2, ba, 0));
}

TEST(GradientEstimates, PorousMediumIsBounded) {
  // Barenblatt start, F(x) = x^2: the L2H1 estimate grows sublinearly in T
  // and the L1W11 estimate per unit time is stable under h-halving.
  const Grid g = Grid::line(-3.0, 3.0, 128);
  BaselineParams p;
  const SpeciesSystem sys = baseline_system(BaselineKind::kBarenblatt, p, g);
  const Density r0 = baseline_exact(BaselineKind::kBarenblatt, p, g, 0.0);
  const Trajectory a = run_scheme(sys, {r0}, 4e-3, 0.25, SolverOptions{});
  const Trajectory b = run_scheme(sys, {r0}, 4e-3, 0.5, SolverOptions{});
  const double ea = gradient_estimate_L2H1(a, sys, 0), eb = gradient_estimate_L2H1(b, sys, 0);
  EXPECT_TRUE(std::isfinite(eb));
  EXPECT_LE(eb / ea, 2.5);
  EXPECT_GE(eb / ea, 1.0);
  const Trajectory c = run_scheme(sys, {r0}, 2e-3, 0.25, SolverOptions{});
  const double wa = gradient_estimate_L1W11(a, sys, 0), wc = gradient_estimate_L1W11(c, sys, 0);
  EXPECT_LE(std::max(wa, wc) / std::min(wa, wc), 1.5);
}

TEST(Action, DensityConventionsAndArithmetic) {
  EXPECT_EQ(action_density(0.0, {0.0, 0.0}), 0.0);
  EXPECT_TRUE(std::isinf(action_density(0.0, {1e-3, 0.0})));
  EXPECT_DOUBLE_EQ(action_density(2.0, {1.0, 1.0}), 1.0);
  const Grid g = Grid::line(0.0, 1.0, 10);
  const Density u = Density::uniform(g);
  VectorField m{g, {std::vector<double>(10, 1.0), std::vector<double>(10, 0.0)}};
  const Density rho[] = {u};
  const VectorField mom[] = {m};
  EXPECT_NEAR(benamou_brenier_action(rho, mom, 1.0), 1.0, 1e-14);
  VectorField z{g, {std::vector<double>(10, 0.0), std::vector<double>(10, 0.0)}};
  const VectorField zero[] = {z};
  EXPECT_EQ(benamou_brenier_action(rho, zero, 1.0), 0.0);
}

TEST(DisplacementEnergy, EndpointsAndConvexity) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Grid g = Grid::line(-2.0, 2.0, 64);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> va(64), vb(64);
    for (int c = 0; c < 64; ++c) {
      va[c] = u(rng) < 0.2 ? 0.0 : u(rng);
      vb[c] = u(rng) < 0.2 ? 0.0 : u(rng);
    }
    const Density a = Density::normalized(g, va), b = Density::normalized(g, vb);
    for (const InternalEnergy& e :
         {InternalEnergy::entropy(), InternalEnergy::power(2.0), InternalEnergy::power(1.5, 0.4)}) {
      EXPECT_NEAR(displacement_energy_1d(e, a, b, 0.0), eval_functional(e, a), 1e-12);
      EXPECT_NEAR(displacement_energy_1d(e, a, b, 1.0), eval_functional(e, b), 1e-12);
      std::vector<double> f;
      for (int q = 0; q <= 10; ++q) f.push_back(displacement_energy_1d(e, a, b, q / 10.0));
      for (int q = 1; q < 10; ++q) EXPECT_GE(f[q + 1] - 2.0 * f[q] + f[q - 1], -1e-6);
    }
  }
}

TEST(DisplacementEnergy, AgreesWithBinnedInterpolant) {
  const Grid g = Grid::line(-4.0, 4.0, 256);
  const Density a = gaussian(g, -1.0, 0.4), b = gaussian(g, 1.0, 0.7);
  const InternalEnergy e = InternalEnergy::entropy();
  for (double t : {0.3, 0.6}) {
    const double exact = displacement_energy_1d(e, a, b, t);
    const double binned = eval_functional(e, displacement_interpolate_1d(a, b, t));
    EXPECT_NEAR(binned, exact, 1e-3);
  }
}

TEST(GrowthRate, ExactExponential) {
  std::vector<double> t, d;
  for (int k = 0; k <= 20; ++k) {
    t.push_back(0.1 * k);
    d.push_back(3.0 * std::exp(-1.7 * 0.1 * k));
  }
  EXPECT_NEAR(fit_growth_rate(t, d), -1.7, 1e-12);
  std::vector<double> zeros(21, 0.0);
  EXPECT_EQ(fit_growth_rate(t, zeros), 0.0);
}

TEST(Contraction, IdenticalDataStayAtZero) {
  const Grid g = Grid::line(-4.0, 4.0, 64);
  const SpeciesSystem sys = coupled_pair(g);
  const std::vector<Density> init{gaussian(g, -1.0, 0.5), gaussian(g, 1.0, 0.5)};
  const ContractionReport rep = contraction_check(sys, init, init, 0.01, 0.1, SolverOptions{});
  for (double d : rep.distance) EXPECT_LE(d, 1e-10);
  EXPECT_TRUE(rep.pass);
}

TEST(Contraction, HeatDistanceIsNonincreasing) {
  const Grid g = Grid::line(-5.0, 5.0, 128);
  const SpeciesSystem sys(g, {InternalEnergy::entropy()}, InteractionSpec::none(1));
  const ContractionReport rep =
      contraction_check(sys, {gaussian(g, -0.8, 0.4)}, {gaussian(g, 0.6, 0.3)}, 0.01, 0.2, SolverOptions{});
  for (std::size_t k = 1; k < rep.distance.size(); ++k)
    EXPECT_LE(rep.distance[k], rep.distance[k - 1] + 1e-12);
  EXPECT_LE(rep.growth_rate, 0.0);
}

TEST(Contraction, CoupledPairWithinBound) {
  const Grid g = Grid::line(-4.0, 4.0, 128);
  const SpeciesSystem sys = coupled_pair(g);
  const ContractionReport rep = contraction_check(
      sys, {gaussian(g, -1.0, 0.5), gaussian(g, 1.0, 0.5)},
      {gaussian(g, -0.5, 0.6), gaussian(g, 1.5, 0.4)}, 4e-3, 0.25, SolverOptions{});
  EXPECT_NEAR(rep.c_cert, 1.0, 1e-12);
  EXPECT_NEAR(rep.bound, 4.5, 1e-12);
  EXPECT_TRUE(rep.pass);
  // Frozen from the reference run.
  EXPECT_NEAR(rep.growth_rate, -0.054, 0.01);
}

TEST(Baselines, HeatConvergesMonotonically) {
  const Grid g = Grid::line(-4.0, 4.0, 256);
  BaselineParams p;
  std::vector<double> errs;
  for (double h : {2e-3, 1e-3, 5e-4})
    errs.push_back(closed_form_baseline(BaselineKind::kHeat, p, h, g, SolverOptions{}).l1_error);
  EXPECT_LE(errs[0], 0.02);
  EXPECT_LT(errs[1], errs[0]);
  EXPECT_LT(errs[2], errs[1]);
  // Frozen from the reference runs.
  EXPECT_NEAR(errs[0], 1.508e-3, 2e-5);
  EXPECT_NEAR(errs[1], 8.14e-4, 1e-5);
  EXPECT_NEAR(errs[2], 4.78e-4, 1e-5);
}

TEST(Baselines, BarenblattAndGibbs) {
  BaselineParams p;
  p.T = 0.5;
  const Grid g = Grid::line(-3.0, 3.0, 256);
  const BaselineReport b = closed_form_baseline(BaselineKind::kBarenblatt, p, 2e-3, g, SolverOptions{});
  EXPECT_LE(b.l1_error, 0.05);
  EXPECT_NEAR(b.l1_error, 2.29e-4, 1e-5);
  const Grid w = Grid::line(-5.0, 5.0, 256);
  const BaselineReport s = closed_form_baseline(BaselineKind::kGibbs, p, 1e-2, w, SolverOptions{});
  EXPECT_EQ(s.trajectory.step_count(), 100);
  EXPECT_LE(s.w2_error, 2.0 * w.axis(0).spacing());
}

TEST(SchemeEstimates, CoupledPairPasses) {
  const Grid g = Grid::line(-4.0, 4.0, 128);
  const double hs[] = {4e-3, 2e-3, 1e-3};
  const DiagnosticsReport rep = scheme_estimates(
      coupled_pair(g), {gaussian(g, -1.0, 0.5), gaussian(g, 1.0, 0.5)}, hs, 0.25, SolverOptions{});
  for (const Check& c : rep.checks) EXPECT_TRUE(c.pass) << c.name << " = " << c.statistic;
  ASSERT_NE(rep.find("distance_sum_ratio_max"), nullptr);
  EXPECT_NEAR(rep.find("distance_sum_ratio_max")->statistic, 0.5, 0.05);
  EXPECT_THROW(scheme_estimates(coupled_pair(g), {gaussian(g, 0, 1), gaussian(g, 0, 1)},
                                std::span<const double>(hs, 1), 0.25, SolverOptions{}),
               ConfigError);
}

TEST(AnalyzeTrajectory, ReportsAllChecks) {
  const Grid g = Grid::line(-4.0, 4.0, 64);
  const SpeciesSystem sys = coupled_pair(g);
  const Trajectory tr = run_scheme(sys, {gaussian(g, -1.0, 0.5), gaussian(g, 1.0, 0.5)}, 0.01, 0.05, SolverOptions{});
  const DiagnosticsReport rep = analyze_trajectory(tr, sys);
  for (const char* name : {"mass_defect", "renormalization_excess", "dissipation_excess", "action",
                           "max_optimality_residual"})
    ASSERT_NE(rep.find(name), nullptr) << name;
  EXPECT_TRUE(rep.pass());
  const SpeciesSeries s = species_series(tr, sys, 1);
  EXPECT_EQ(s.t.size(), 6u);
  EXPECT_FALSE(s.residual[0].has_value());
  EXPECT_TRUE(s.residual[1].has_value());
  EXPECT_NEAR(s.mass[3], 1.0, 1e-8);
}

TEST(VectorDistance, SumsSpecies) {
  const Grid g = Grid::line(-3.0, 3.0, 96);
  const Density a = gaussian(g, 0.0, 0.4), b = gaussian(g, 0.5, 0.4), c = gaussian(g, -0.2, 0.3);
  const Density x[] = {a, c}, y[] = {b, a};
  EXPECT_NEAR(vector_distance(x, y), w2_exact_1d(a, b).cost + w2_exact_1d(c, a).cost, 1e-14);
}
