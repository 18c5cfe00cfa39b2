#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jkoflow/diagnostics.hpp"
#include "jkoflow/energy.hpp"
#include "jkoflow/grid.hpp"
#include "jkoflow/interaction.hpp"
#include "jkoflow/jko.hpp"

namespace jkoflow {

enum class ProfileKind { kGaussian, kUniform, kBump, kBarenblatt, kGibbs, kFile };

// Named initial profile; the unused fields keep their defaults.
//   gaussian   {mean, sigma}
//   uniform    {support: [lo, hi] per axis}
//   bump       {center, radius}: exp(1 - 1/(1 - r^2/R^2)) inside the ball
//   barenblatt {t0}: the porous-medium profile of F(x) = x^2 at time t0 (1-D)
//   gibbs      {radius, center}: exp(-U) for the smoothed confinement
//   file       {path}: a density snapshot on the configured grid
struct InitialProfile {
  ProfileKind kind = ProfileKind::kGaussian;
  Point mean{0.0, 0.0};
  double sigma = 1.0;
  std::vector<std::array<double, 2>> support;
  double radius = 1.0;
  double t0 = 0.5;
  std::filesystem::path path;
};

// Optional analytic reference for error reporting.
struct ReferenceSpec {
  BaselineKind kind = BaselineKind::kHeat;
  BaselineParams params;
};

struct RunConfig {
  std::filesystem::path source;  // config file, for relative paths
  Grid grid;
  std::vector<std::string> names;
  std::vector<InternalEnergy> energies;
  InteractionSpec interaction;
  std::vector<InitialProfile> initial;
  double h = 0.0;
  double T = 0.0;
  SolverOptions solver;
  int record_every = 1;
  std::filesystem::path output_dir;
  bool write_csv = true;
  bool write_json = true;
  std::optional<ReferenceSpec> reference;
};

// Parses the JSON schema documented in the README. Unknown keys, missing
// required keys, out-of-range values and missing files raise ConfigError.
RunConfig parse_config(const std::string& text, const std::filesystem::path& source = {});
RunConfig load_config(const std::filesystem::path& path);

SpeciesSystem make_system(const RunConfig& cfg);
Density make_initial(const InitialProfile& p, const Grid& grid, const std::filesystem::path& base);
std::vector<Density> make_initial(const RunConfig& cfg);

// exp(-F) for the entropy and (int rho^m)^(-1/(m-1)) for power laws: the
// volume of a uniform density with the same energy. A value of a few cells
// marks atom-like data whose energy diverges under refinement.
double effective_support(const InternalEnergy& e, const Density& rho);
constexpr double kMinEffectiveCells = 4.0;

}  // namespace jkoflow
