#pragma once

#include <stdexcept>
#include <string>

namespace jkoflow {

// Exit codes are part of the CLI contract.
enum class ExitCode : int {
  kSuccess = 0,
  kHypothesisFailure = 1,
  kConfigError = 2,
  kSolverFailure = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode code() const { return ExitCode::kConfigError; }
};

// Malformed input: bad config keys, invalid densities, grid mismatches.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode code() const override { return ExitCode::kConfigError; }
};

// A modelling hypothesis (class H_m, bounded potentials, finite initial
// energy) does not hold for the requested problem.
class HypothesisError : public Error {
 public:
  using Error::Error;
  ExitCode code() const override { return ExitCode::kHypothesisFailure; }
};

// An inner solver exceeded its iteration budget.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  ExitCode code() const override { return ExitCode::kSolverFailure; }
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace jkoflow
