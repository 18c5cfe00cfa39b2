#include <cmath>

#include <gtest/gtest.h>

#include "jkoflow/energy.hpp"
#include "jkoflow/error.hpp"

using namespace jkoflow;

namespace {

// Bisection on a monotone scalar function, the oracle for the prox.
double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(EvalF, PointValues) {
  const InternalEnergy h = InternalEnergy::entropy();
  const InternalEnergy p = InternalEnergy::power(2.0, 1.0);
  EXPECT_EQ(eval_F(h, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(eval_F(p, 1.0), 1.0);
  EXPECT_NEAR(eval_F(h, std::exp(1.0)), std::exp(1.0), 1e-14);
  EXPECT_EQ(eval_F(h, 0.0), 0.0);
  EXPECT_THROW(eval_F(h, -1.0), ConfigError);
  EXPECT_DOUBLE_EQ(InternalEnergy::power(3.0, 2.0, 0.5).F(2.0), 0.5 * 2.0 * 8.0 / 2.0);
}

TEST(EvalFunctional, UniformAndQuadratureOracle) {
  const Grid unit = Grid::line(0.0, 1.0, 50);
  EXPECT_NEAR(eval_functional(InternalEnergy::entropy(), Density::uniform(unit)), 0.0, 1e-14);
  EXPECT_NEAR(eval_functional(InternalEnergy::power(2.0), Density::uniform(unit)), 1.0, 1e-14);

  // Gaussian entropy: the discrete value against a 4x finer grid.
  auto g = [](const Point& x) { return std::exp(-x[0] * x[0] / (2.0 * 0.36)); };
  const double coarse = eval_functional(InternalEnergy::entropy(), Density::from_function(Grid::line(-5, 5, 1024), g));
  const double fine = eval_functional(InternalEnergy::entropy(), Density::from_function(Grid::line(-5, 5, 4096), g));
  EXPECT_NEAR(coarse, fine, 1e-6);
  // -(1/2) log(2 pi e sigma^2) for sigma = 0.6.
  EXPECT_NEAR(fine, -0.5 * std::log(2.0 * M_PI * std::exp(1.0) * 0.36), 1e-6);
}

TEST(Pressure, Values) {
  EXPECT_NEAR(pressure(InternalEnergy::entropy(), 0.7), 0.7, 1e-15);
  EXPECT_DOUBLE_EQ(pressure(InternalEnergy::power(2.0), 3.0), 9.0);
  EXPECT_EQ(pressure(InternalEnergy::entropy(), 0.0), 0.0);
  EXPECT_EQ(pressure(InternalEnergy::power(2.5), 0.0), 0.0);
}

TEST(KlProx, ClosedFormsAndOracles) {
  const InternalEnergy h = InternalEnergy::entropy();
  const InternalEnergy p = InternalEnergy::power(2.0);
  EXPECT_NEAR(kl_prox(h, 1.0, 1.0), std::exp(-0.5), 1e-12);
  EXPECT_NEAR(kl_prox(p, 0.5, 1.0), 0.5671432904097838, 1e-10);
  for (double z : {0.3, 1.0, 4.0}) EXPECT_NEAR(kl_prox(h, 1e-12, z), z, 1e-9 * z);
  EXPECT_EQ(kl_prox(h, 1.0, 0.0), 0.0);
  // Stationarity tau F'(s) + log(s/z) = 0 for a power law, solved by bisection.
  const InternalEnergy q = InternalEnergy::power(3.0, 0.7);
  for (double tau : {0.1, 1.0, 5.0})
    for (double z : {0.01, 1.0, 30.0}) {
      const double s = bisect([&](double x) { return tau * q.dF(x) + std::log(x / z); }, 1e-300, z);
      EXPECT_NEAR(kl_prox(q, tau, z), s, 1e-10 * s);
    }
  EXPECT_NEAR(kl_prox_log(h, 1.0, 0.0), -0.5, 1e-12);
  EXPECT_EQ(kl_prox_log(h, 1.0, -INFINITY), -INFINITY);
}

TEST(ClassHm, BuiltInFamilies) {
  const auto xs = log_samples(1e-6, 1e6, 121);
  const EnergyReport p = check_class_Hm(InternalEnergy::power(2.0), xs);
  EXPECT_TRUE(p.pass);
  EXPECT_DOUBLE_EQ(p.certified_lower, 2.0);
  EXPECT_DOUBLE_EQ(p.certified_upper, 1.0);
  EXPECT_NEAR(p.empirical_lower, 2.0, 1e-12);
  const EnergyReport h = check_class_Hm(InternalEnergy::entropy(), xs);
  EXPECT_TRUE(h.pass);
  EXPECT_DOUBLE_EQ(h.certified_upper, 1.0);
  for (double m : {1.2, 1.5, 3.0, 7.0}) EXPECT_TRUE(check_class_Hm(InternalEnergy::power(m, 0.3), xs).pass);
}

TEST(ClassHm, NegativeControl) {
  // P(x) = x^3 grows faster than x + x^m for m = 2.
  EnergyProfile bad;
  bad.m = 2.0;
  bad.F = [](double x) { return x * x * x / 2.0; };
  bad.dF = [](double x) { return 1.5 * x * x; };
  bad.d2F = [](double x) { return 3.0 * x; };
  bad.certified_lower = 0.0;
  bad.certified_upper = 1.0;
  EXPECT_FALSE(check_class_Hm(bad, log_samples(1e-3, 1e3, 61)).pass);
}

TEST(McCann, PassesAndNegativeControl) {
  const auto xs = log_samples(1e-4, 1e4, 81);
  EXPECT_TRUE(check_mccann(InternalEnergy::entropy(), 1, xs).pass);
  EXPECT_TRUE(check_mccann(InternalEnergy::entropy(), 2, xs).pass);
  EXPECT_TRUE(check_mccann(InternalEnergy::power(2.0), 1, xs).pass);
  EXPECT_TRUE(check_mccann(InternalEnergy::power(2.0), 2, xs).pass);
  EXPECT_FALSE(check_mccann([](double x) { return -x * x; }, 1, xs).pass);
  // -x^m is admissible for m >= 1 - 1/n only.
  EXPECT_TRUE(check_mccann([](double x) { return -std::pow(x, 0.3); }, 1, xs).pass);
  EXPECT_FALSE(check_mccann([](double x) { return -std::pow(x, 0.3); }, 2, xs).pass);
}

TEST(LogSamples, Spacing) {
  const auto xs = log_samples(1e-2, 1e2, 5);
  ASSERT_EQ(xs.size(), 5u);
  EXPECT_NEAR(xs[0], 1e-2, 1e-16);
  EXPECT_NEAR(xs[2], 1.0, 1e-14);
  EXPECT_NEAR(xs[4], 1e2, 1e-12);
}
