#include "jkoflow/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "jkoflow/error.hpp"

namespace jkoflow {

namespace {

void require_nonnegative(double x, const char* what) {
  if (!(x >= 0.0)) throw ConfigError(std::string(what) + ": argument must be >= 0");
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

InternalEnergy::InternalEnergy(EnergyKind kind, double m, double c, double alpha)
    : kind_(kind), m_(m), c_(c), alpha_(alpha) {
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_))
    throw ConfigError("energy: alpha must be positive");
  if (kind_ == EnergyKind::kPower) {
    if (!(m_ > 1.0) || !std::isfinite(m_)) throw ConfigError("energy: power needs m > 1");
    if (!(c_ > 0.0) || !std::isfinite(c_)) throw ConfigError("energy: power needs c > 0");
  }
}

InternalEnergy InternalEnergy::entropy(double alpha) {
  return InternalEnergy(EnergyKind::kEntropy, 1.0, 1.0, alpha);
}

InternalEnergy InternalEnergy::power(double m, double c, double alpha) {
  return InternalEnergy(EnergyKind::kPower, m, c, alpha);
}

double InternalEnergy::F(double x) const {
  require_nonnegative(x, "F");
  if (kind_ == EnergyKind::kEntropy) return x > 0.0 ? alpha_ * x * std::log(x) : 0.0;
  return alpha_ * c_ * std::pow(x, m_) / (m_ - 1.0);
}

double InternalEnergy::dF(double x) const {
  require_nonnegative(x, "F'");
  if (kind_ == EnergyKind::kEntropy) return alpha_ * (std::log(x) + 1.0);
  return alpha_ * c_ * m_ * std::pow(x, m_ - 1.0) / (m_ - 1.0);
}

double InternalEnergy::d2F(double x) const {
  require_nonnegative(x, "F''");
  if (kind_ == EnergyKind::kEntropy) return alpha_ / x;
  return alpha_ * c_ * m_ * std::pow(x, m_ - 2.0);
}

double InternalEnergy::pressure(double x) const {
  require_nonnegative(x, "pressure");
  if (kind_ == EnergyKind::kEntropy) return alpha_ * x;
  return alpha_ * c_ * std::pow(x, m_);
}

double InternalEnergy::class_lower_constant() const {
  return kind_ == EnergyKind::kEntropy ? alpha_ : alpha_ * c_ * m_;
}

double InternalEnergy::class_upper_constant() const {
  return kind_ == EnergyKind::kEntropy ? alpha_ : alpha_ * c_;
}

std::string InternalEnergy::describe() const {
  std::ostringstream os;
  if (kind_ == EnergyKind::kEntropy) {
    os << "entropy(alpha=" << alpha_ << ")";
  } else {
    os << "power(m=" << m_ << ", c=" << c_ << ", alpha=" << alpha_ << ")";
  }
  return os.str();
}

double eval_F(const InternalEnergy& e, double x) { return e.F(x); }

double eval_functional(const InternalEnergy& e, const Density& rho) {
  double s = 0.0;
  for (double v : rho.values()) s += e.F(v);
  return s * rho.grid().cell_volume();
}

double pressure(const InternalEnergy& e, double x) { return e.pressure(x); }

double kl_prox_log(const InternalEnergy& e, double tau, double log_z) {
  if (!(tau > 0.0)) throw ConfigError("kl_prox: tau must be positive");
  if (log_z == kNegInf) return kNegInf;
  if (std::isnan(log_z)) throw ConfigError("kl_prox: NaN argument");
  const double t = tau * e.alpha();
  if (e.kind() == EnergyKind::kEntropy) return (log_z - t) / (1.0 + t);

  // Stationarity in u = log s: phi(u) = tau F'(e^u) + u - log z. phi is
  // convex and increasing, and phi(log z) >= 0, so Newton started at log z
  // decreases monotonically onto the root; the bracket guards roundoff.
  const auto phi = [&](double u) { return tau * e.dF(std::exp(u)) + u - log_z; };
  const auto dphi = [&](double u) {
    const double s = std::exp(u);
    return tau * e.d2F(s) * s + 1.0;
  };
  double hi = log_z;
  double lo = log_z - tau * e.dF(std::exp(log_z));
  double u = hi;
  constexpr int kMaxIter = 200;
  for (int it = 0; it < kMaxIter; ++it) {
    const double f = phi(u);
    if (f > 0.0) {
      hi = u;
    } else {
      lo = u;
    }
    double next = u - f / dphi(u);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) <= 1e-12 * std::max(1.0, std::abs(u))) return next;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(u))) return 0.5 * (lo + hi);
    u = next;
  }
  throw SolverError("kl_prox: Newton/bisection did not converge", std::abs(phi(u)),
                    kMaxIter);
}

double kl_prox(const InternalEnergy& e, double tau, double z) {
  require_nonnegative(z, "kl_prox");
  if (z == 0.0) return 0.0;
  return std::exp(kl_prox_log(e, tau, std::log(z)));
}

EnergyProfile profile_of(const InternalEnergy& e) {
  return EnergyProfile{
      e.m(),
      [e](double x) { return e.F(x); },
      [e](double x) { return e.dF(x); },
      [e](double x) { return e.d2F(x); },
      e.class_lower_constant(),
      e.class_upper_constant(),
  };
}

EnergyReport check_class_Hm(const EnergyProfile& p, std::span<const double> samples) {
  EnergyReport rep;
  rep.samples.assign(samples.begin(), samples.end());
  rep.certified_lower = p.certified_lower;
  rep.certified_upper = p.certified_upper;
  constexpr double kRel = 1e-12;

  InequalityCheck lower{"F''(x) >= C x^(m-2)"};
  InequalityCheck upper{"P(x) <= C (x + x^m)"};
  rep.empirical_lower = std::numeric_limits<double>::infinity();
  rep.empirical_upper = 0.0;
  for (double x : samples) {
    const double f2 = p.d2F(x);
    const double w = std::pow(x, p.m - 2.0);
    ++lower.evaluated;
    rep.empirical_lower = std::min(rep.empirical_lower, f2 / w);
    if (!(f2 >= p.certified_lower * w * (1.0 - kRel))) ++lower.violations;

    const double P = x * p.dF(x) - p.F(x);
    const double g = x + std::pow(x, p.m);
    ++upper.evaluated;
    rep.empirical_upper = std::max(rep.empirical_upper, P / g);
    if (!(P <= p.certified_upper * g * (1.0 + kRel) + 1e-300)) ++upper.violations;
  }
  lower.pass = lower.violations == 0;
  upper.pass = upper.violations == 0;
  rep.checks.push_back(lower);
  rep.checks.push_back(upper);

  if (p.m > 1.0) {
    InequalityCheck origin{"F(0) = F'(0) = 0"};
    origin.evaluated = 1;
    if (std::abs(p.F(0.0)) > 1e-300 || std::abs(p.dF(0.0)) > 1e-300) origin.violations = 1;
    origin.pass = origin.violations == 0;
    rep.checks.push_back(origin);
  }
  for (const auto& c : rep.checks) rep.pass = rep.pass && c.pass;
  return rep;
}

EnergyReport check_class_Hm(const InternalEnergy& e, std::span<const double> samples) {
  return check_class_Hm(profile_of(e), samples);
}

EnergyReport check_mccann(const std::function<double(double)>& F, int n,
                          std::span<const double> samples) {
  EnergyReport rep;
  rep.samples.assign(samples.begin(), samples.end());
  const auto G = [&](double x) { return std::pow(x, n) * F(std::pow(x, -n)); };
  std::vector<double> g(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) g[k] = G(samples[k]);

  InequalityCheck mono{"x^n F(x^-n) nonincreasing"};
  InequalityCheck convex{"x^n F(x^-n) convex"};
  for (std::size_t k = 0; k + 1 < g.size(); ++k) {
    ++mono.evaluated;
    if (g[k + 1] > g[k] + 1e-10 * std::max(1.0, std::abs(g[k]))) ++mono.violations;
  }
  for (std::size_t k = 1; k + 1 < g.size(); ++k) {
    const double left = (g[k] - g[k - 1]) / (samples[k] - samples[k - 1]);
    const double right = (g[k + 1] - g[k]) / (samples[k + 1] - samples[k]);
    ++convex.evaluated;
    if (right - left < -1e-10 * std::max(1.0, std::abs(left))) ++convex.violations;
  }
  mono.pass = mono.violations == 0;
  convex.pass = convex.violations == 0;
  rep.checks = {mono, convex};
  rep.pass = mono.pass && convex.pass;
  return rep;
}

EnergyReport check_mccann(const InternalEnergy& e, int n, std::span<const double> samples) {
  return check_mccann([e](double x) { return e.F(x); }, n, samples);
}

std::vector<double> log_samples(double lo, double hi, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int k = 0; k < count; ++k)
    out[static_cast<std::size_t>(k)] = std::exp(a + (b - a) * k / std::max(1, count - 1));
  return out;
}

}  // namespace jkoflow
