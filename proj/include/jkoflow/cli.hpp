#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jkoflow/config.hpp"
#include "jkoflow/diagnostics.hpp"

namespace jkoflow {

// Result of the hypothesis checks run before every simulation.
struct ValidationReport {
  DiagnosticsReport checks;
  std::vector<std::string> failures;  // human-readable, one per failed check
  double c_lip = 0.0;
  double c_hess = 0.0;
  bool pass() const { return failures.empty(); }
};

// Class H_m and McCann checks per species, certification of the interaction
// on the standard trial pairs, finite initial energy, and the
// effective-support test against atom-like initial data.
ValidationReport validate_config(const RunConfig& cfg);

struct RunOptions {
  bool best_effort = false;
  std::optional<std::filesystem::path> output;  // overrides outputs.directory
  int threads = 0;
};

// Each command returns its exit code (see ExitCode) and never throws.
int cmd_validate(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_run(const std::filesystem::path& config, const RunOptions& opt, std::ostream& out,
            std::ostream& err);
int cmd_convergence(const std::filesystem::path& config, const std::vector<double>& levels,
                    const RunOptions& opt, std::ostream& out, std::ostream& err);
int cmd_compare(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b,
                std::ostream& out, std::ostream& err);

// Parses "h1,h2,h3"; throws ConfigError on malformed entries.
std::vector<double> parse_levels(const std::string& text);
// At least three levels, each half of the previous one.
void check_levels(const std::vector<double>& levels);

// Snapshot steps written by `run`: 0, every `record_every`, and the last.
std::vector<int> snapshot_steps(int steps, int record_every);

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace jkoflow
