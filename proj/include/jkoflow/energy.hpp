#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "jkoflow/grid.hpp"

namespace jkoflow {

enum class EnergyKind { kEntropy, kPower };

// Internal energy density F of class H_m:
//   entropy (m = 1):  F(x) = alpha * x log x
//   power   (m > 1):  F(x) = alpha * c * x^m / (m - 1)
// The diffusion weight alpha is folded into F.
class InternalEnergy {
 public:
  static InternalEnergy entropy(double alpha = 1.0);
  static InternalEnergy power(double m, double c = 1.0, double alpha = 1.0);

  EnergyKind kind() const { return kind_; }
  double m() const { return m_; }
  double c() const { return c_; }
  double alpha() const { return alpha_; }

  // All of these require x >= 0 (F' and F'' additionally x > 0 for entropy).
  double F(double x) const;
  double dF(double x) const;
  double d2F(double x) const;
  double pressure(double x) const;

  // Certified constants: F''(x) >= lower * x^(m-2), P(x) <= upper * (x + x^m).
  double class_lower_constant() const;
  double class_upper_constant() const;

  std::string describe() const;

 private:
  InternalEnergy(EnergyKind kind, double m, double c, double alpha);

  EnergyKind kind_ = EnergyKind::kEntropy;
  double m_ = 1.0;
  double c_ = 1.0;
  double alpha_ = 1.0;
};

double eval_F(const InternalEnergy& e, double x);
// sum F(rho_c) |cell|, with 0 log 0 = 0.
double eval_functional(const InternalEnergy& e, const Density& rho);
double pressure(const InternalEnergy& e, double x);

// argmin_{s >= 0} tau F(s) + s log(s/z) - s + z.
double kl_prox(const InternalEnergy& e, double tau, double z);
// Same map on logarithms: returns log s given log z (-inf maps to -inf).
double kl_prox_log(const InternalEnergy& e, double tau, double log_z);

// A generic energy description, used to run the class checks on energies
// outside the built-in families (negative controls in particular).
struct EnergyProfile {
  double m = 1.0;
  std::function<double(double)> F;
  std::function<double(double)> dF;
  std::function<double(double)> d2F;
  double certified_lower = 0.0;
  double certified_upper = 0.0;
};

EnergyProfile profile_of(const InternalEnergy& e);

struct InequalityCheck {
  std::string name;
  std::size_t evaluated = 0;
  std::size_t violations = 0;
  bool pass = true;
};

struct EnergyReport {
  std::vector<InequalityCheck> checks;
  std::vector<double> samples;
  double certified_lower = 0.0;
  double certified_upper = 0.0;
  // Tightest constants supported by the samples.
  double empirical_lower = 0.0;
  double empirical_upper = 0.0;
  bool pass = true;
};

EnergyReport check_class_Hm(const EnergyProfile& profile, std::span<const double> samples);
EnergyReport check_class_Hm(const InternalEnergy& e, std::span<const double> samples);

// McCann's condition: x -> x^n F(x^-n) convex and nonincreasing on the
// (increasing, positive) samples.
EnergyReport check_mccann(const std::function<double(double)>& F, int n,
                          std::span<const double> samples);
EnergyReport check_mccann(const InternalEnergy& e, int n, std::span<const double> samples);

// Log-spaced positive samples, handy for both checks.
std::vector<double> log_samples(double lo, double hi, int count);

}  // namespace jkoflow
