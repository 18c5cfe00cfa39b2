// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are pinned
// here; the exit status is nonzero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "jkoflow/cli.hpp"
#include "jkoflow/diagnostics.hpp"
#include "jkoflow/energy.hpp"
#include "jkoflow/transport.hpp"

using namespace jkoflow;
namespace fs = std::filesystem;

namespace {

// Heat: box [-4, 4], 256 cells, sigma0 = 0.3, T = 0.25.
constexpr double kHeatL1 = 0.02;
// Barenblatt: box [-3, 3], 256 cells, t0 = 0.5, T = 0.5.
constexpr double kBarenblattL1 = 0.05;
// Gibbs: drift over 100 steps in units of dx.
constexpr double kGibbsDriftCells = 2.0;
// Scheme estimates: mass, stability factor, sum W2^2 ratio window.
constexpr double kMassTol = 1e-8;
constexpr double kStability = 1.2;
constexpr double kRatioLo = 0.3, kRatioHi = 0.8;
// Residual: required reduction per refinement level.
constexpr double kResidualFactor = 2.0;
// OT oracle.
constexpr double kLpTol = 1e-8;
constexpr double kEntropicGapFactor = 5.0;
// Convexity along geodesics.
constexpr double kSecondDifferenceTol = -1e-6;
// Contraction.
constexpr double kIdenticalTol = 1e-10;
// Gradient estimates.
constexpr double kL2H1Ratio = 2.5;
constexpr double kL1W11Stability = 1.5;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << " " << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Density gaussian(const Grid& g, double mean, double sigma) {
  return Density::from_function(g, [&](const Point& x) {
    return std::exp(-(x[0] - mean) * (x[0] - mean) / (2.0 * sigma * sigma));
  });
}

Density random_density(const Grid& g, std::mt19937& rng, double zero_prob) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(g.size());
  for (auto& x : v) x = u(rng) < zero_prob ? 0.0 : 0.05 + u(rng);
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
  return Density::normalized(g, v);
}

SpeciesSystem coupled_pair(const Grid& g) {
  return SpeciesSystem(g, {InternalEnergy::entropy(), InternalEnergy::power(2.0)},
                       InteractionSpec({{Kernel::zero(), Kernel::gaussian(1.0, 1.0)},
                                        {Kernel::gaussian(1.0, 1.0), Kernel::zero()}},
                                       {ExternalPotential::zero(), ExternalPotential::zero()}));
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] < v[k - 1])) return false;
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt(v[k]);
  return s;
}

void heat_baseline() {
  const Grid g = Grid::line(-4.0, 4.0, 256);
  BaselineParams p;
  std::vector<double> errs;
  for (double h : {2e-3, 1e-3, 5e-4})
    errs.push_back(closed_form_baseline(BaselineKind::kHeat, p, h, g, SolverOptions{}).l1_error);
  report(1, "heat baseline", errs[0] <= kHeatL1 && strictly_decreasing(errs),
         "L1 at h = 2e-3, 1e-3, 5e-4: " + join(errs) + " (<= " + fmt(kHeatL1) + ", decreasing)");
}

void barenblatt_baseline() {
  const Grid g = Grid::line(-3.0, 3.0, 256);
  BaselineParams p;
  p.t0 = 0.5;
  p.T = 0.5;
  std::vector<double> errs;
  for (double h : {2e-3, 1e-3, 5e-4})
    errs.push_back(closed_form_baseline(BaselineKind::kBarenblatt, p, h, g, SolverOptions{}).l1_error);
  report(2, "barenblatt baseline", errs[0] <= kBarenblattL1 && strictly_decreasing(errs),
         "L1 at h = 2e-3, 1e-3, 5e-4: " + join(errs) + " (<= " + fmt(kBarenblattL1) + ", decreasing)");
}

void gibbs_fixed_point() {
  const Grid g = Grid::line(-5.0, 5.0, 256);
  BaselineParams p;
  p.radius = 3.0;
  p.steps = 100;
  const BaselineReport r = closed_form_baseline(BaselineKind::kGibbs, p, 1e-2, g, SolverOptions{});
  const double bound = kGibbsDriftCells * g.axis(0).spacing();
  report(3, "gibbs fixed point", r.trajectory.step_count() == 100 && r.w2_error <= bound,
         "W2 drift over " + std::to_string(r.trajectory.step_count()) + " steps " + fmt(r.w2_error) +
             " (<= 2 dx = " + fmt(bound) + ")");
}

void scheme_estimates_suite() {
  const Grid g = Grid::line(-4.0, 4.0, 128);
  const double hs[] = {4e-3, 2e-3, 1e-3};
  EstimatesOptions opt;
  opt.stability = kStability;
  opt.ratio_lo = kRatioLo;
  opt.ratio_hi = kRatioHi;
  const DiagnosticsReport rep = scheme_estimates(
      coupled_pair(g), {gaussian(g, -1.0, 0.5), gaussian(g, 1.0, 0.5)}, hs, 0.25, SolverOptions{}, opt);
  const Check* mass = rep.find("mass_defect");
  const bool mass_ok = mass && mass->statistic <= kMassTol;
  std::string detail;
  for (const Check& c : rep.checks) detail += (detail.empty() ? "" : ", ") + c.name + " " + fmt(c.statistic);
  report(4, "scheme estimates", rep.pass() && mass_ok, detail);
}

// Largest per-step residual of a baseline run on n cells with tol scaled to
// the grid.
double baseline_residual(BaselineKind kind, int n) {
  BaselineParams p;
  Grid g;
  double h = 2e-3;
  switch (kind) {
    case BaselineKind::kHeat:
      g = Grid::line(-4.0, 4.0, n);
      break;
    case BaselineKind::kBarenblatt:
      g = Grid::line(-3.0, 3.0, n);
      p.T = 0.5;
      break;
    case BaselineKind::kGibbs:
      g = Grid::line(-5.0, 5.0, n);
      h = 1e-2;
      break;
  }
  SolverOptions opt;
  opt.tol = 1e-8 * 64.0 / n;
  return closed_form_baseline(kind, p, h, g, opt).max_residual;
}

void optimality_residuals() {
  bool pass = true;
  std::string detail;
  for (BaselineKind kind : {BaselineKind::kHeat, BaselineKind::kBarenblatt, BaselineKind::kGibbs}) {
    std::vector<double> r;
    for (int n : {128, 256, 512}) r.push_back(baseline_residual(kind, n));
    double worst = INFINITY;
    for (std::size_t k = 1; k < r.size(); ++k) worst = std::min(worst, r[k - 1] / r[k]);
    pass = pass && worst >= kResidualFactor;
    detail += (detail.empty() ? "" : "; ") + baseline_name(kind) + " " + join(r) + " (min factor " +
              fmt(worst) + ")";
  }
  report(5, "optimality residual", pass, detail + " over n = 128, 256, 512, >= 2 per level");
}

void ot_oracle() {
  std::mt19937 rng(2024);
  const Grid g = Grid::line(0.0, 1.0, 8);
  double worst_lp = 0.0, worst_gap = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < 15; ++trial) {
    const Density a = random_density(g, rng, 0.2), b = random_density(g, rng, 0.2);
    const double lp = brute_force_ot(a, b).cost;
    worst_lp = std::max(worst_lp, std::abs(w2_exact_1d(a, b, CellModel::kAtoms).cost - lp));
    double prev = INFINITY;
    for (double eps : {0.1, 0.05, 0.025}) {
      SinkhornOptions opt;
      opt.epsilon = eps;
      opt.tol = 1e-12;
      const double c = sinkhorn(a, b, opt).objective;
      worst_gap = std::max(worst_gap, (c - lp) / eps);
      monotone = monotone && c < prev && c >= lp - 1e-12;
      prev = c;
    }
  }
  report(6, "OT oracle", worst_lp <= kLpTol && worst_gap <= kEntropicGapFactor && monotone,
         "max |W2^2 - LP| " + fmt(worst_lp) + " (<= 1e-8), max gap/eps " + fmt(worst_gap) +
             " (<= 5), decreasing in eps: " + (monotone ? "yes" : "no"));
}

void displacement_convexity() {
  const auto xs = log_samples(1e-6, 1e6, 241);
  bool mccann = true;
  const std::vector<InternalEnergy> energies{InternalEnergy::entropy(), InternalEnergy::power(2.0),
                                             InternalEnergy::power(3.0)};
  for (const auto& e : energies)
    for (int n : {1, 2}) mccann = mccann && check_mccann(e, n, xs).pass;

  std::mt19937 rng(77);
  const Grid g = Grid::line(-2.0, 2.0, 64);
  double worst = INFINITY;
  for (int trial = 0; trial < 10; ++trial) {
    const Density a = random_density(g, rng, 0.2), b = random_density(g, rng, 0.2);
    for (const auto& e : energies) {
      std::vector<double> f;
      for (int q = 0; q <= 10; ++q) f.push_back(displacement_energy_1d(e, a, b, q / 10.0));
      for (int q = 1; q < 10; ++q) worst = std::min(worst, f[q + 1] - 2.0 * f[q] + f[q - 1]);
    }
  }
  report(7, "displacement convexity", mccann && worst >= kSecondDifferenceTol,
         std::string("McCann checks ") + (mccann ? "pass" : "fail") +
             ", min second difference over 10 pairs " + fmt(worst) + " (>= -1e-6)");
}

void contraction() {
  const Grid g = Grid::line(-4.0, 4.0, 128);
  const SpeciesSystem sys = coupled_pair(g);
  const std::vector<Density> first{gaussian(g, -1.0, 0.5), gaussian(g, 1.0, 0.5)};
  const std::vector<Density> second{gaussian(g, -0.5, 0.6), gaussian(g, 1.5, 0.4)};
  const ContractionReport rep = contraction_check(sys, first, second, 4e-3, 0.25, SolverOptions{});
  const ContractionReport same = contraction_check(sys, first, first, 4e-3, 0.25, SolverOptions{});
  const double worst = *std::max_element(same.distance.begin(), same.distance.end());
  report(8, "contraction", rep.pass && worst <= kIdenticalTol,
         "growth rate " + fmt(rep.growth_rate) + " (<= 4 C_cert + 0.5 = " + fmt(rep.bound) +
             "), identical data max distance " + fmt(worst) + " (<= 1e-10)");
}

void gradient_estimates() {
  const Grid g = Grid::line(-3.0, 3.0, 256);
  BaselineParams p;
  const SpeciesSystem sys = baseline_system(BaselineKind::kBarenblatt, p, g);
  const Density r0 = baseline_exact(BaselineKind::kBarenblatt, p, g, 0.0);
  const Trajectory t1 = run_scheme(sys, {r0}, 2e-3, 0.25, SolverOptions{});
  const Trajectory t2 = run_scheme(sys, {r0}, 2e-3, 0.5, SolverOptions{});
  const Trajectory t3 = run_scheme(sys, {r0}, 1e-3, 0.5, SolverOptions{});
  const double ratio = gradient_estimate_L2H1(t2, sys, 0) / gradient_estimate_L2H1(t1, sys, 0);
  const double wa = gradient_estimate_L1W11(t2, sys, 0), wb = gradient_estimate_L1W11(t3, sys, 0);
  const double spread = std::max(wa, wb) / std::min(wa, wb);
  report(9, "gradient estimates", ratio <= kL2H1Ratio && spread <= kL1W11Stability,
         "L2H1(2T)/L2H1(T) " + fmt(ratio) + " (<= 2.5), L1W11 under h-halving " + fmt(wa) + " vs " +
             fmt(wb) + " (factor " + fmt(spread) + " <= 1.5)");
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "jkoflow_acceptance_determinism";
  fs::remove_all(root);
  bool pass = true;
  int files = 0;
  for (const char* name : {"heat", "coupled", "plane_entropic"}) {
    const fs::path cfg = fs::path(JKOFLOW_CONFIG_DIR) / (std::string(name) + ".json");
    const fs::path a = root / name / "a", b = root / name / "b";
    std::ostringstream out, err;
    RunOptions oa, ob;
    oa.output = a;
    ob.output = b;
    pass = pass && cmd_run(cfg, oa, out, err) == 0 && cmd_run(cfg, ob, out, err) == 0;
    if (!pass) break;
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      pass = pass && slurp(e.path()) == slurp(b / e.path().filename());
    }
  }
  fs::remove_all(root);
  report(10, "determinism", pass && files > 0,
         std::to_string(files) + " files compared byte for byte across two runs of 3 configs");
}

}  // namespace

int main() {
  heat_baseline();
  barenblatt_baseline();
  gibbs_fixed_point();
  scheme_estimates_suite();
  optimality_residuals();
  ot_oracle();
  displacement_convexity();
  contraction();
  gradient_estimates();
  determinism();
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
