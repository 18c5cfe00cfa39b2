#include "jkoflow/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "jkoflow/error.hpp"

namespace jkoflow {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kIndexFile = "index.json";
constexpr const char* kTimeseriesFile = "timeseries.csv";
constexpr const char* kSummaryFile = "summary.json";
constexpr const char* kConvergenceFile = "convergence.csv";

// JSON has no infinities; unbounded limits are written as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json check_json(const Check& c) {
  json j{{"statistic", finite_or_null(c.statistic)}, {"bound", finite_or_null(c.bound)},
         {"pass", c.pass}};
  if (std::isfinite(c.lower)) j["lower"] = c.lower;
  return j;
}

json grid_json(const Grid& g) {
  json lo = json::array(), hi = json::array(), cells = json::array();
  for (int a = 0; a < g.dim(); ++a) {
    lo.push_back(g.axis(a).lower);
    hi.push_back(g.axis(a).upper);
    cells.push_back(g.axis(a).cells);
  }
  return {{"dim", g.dim()}, {"lower", lo}, {"upper", hi}, {"cells", cells}};
}

Grid grid_from_json(const json& j) {
  const int dim = j.at("dim").get<int>();
  auto axis = [&](int a) {
    return Axis{j.at("lower").at(a).get<double>(), j.at("upper").at(a).get<double>(),
                j.at("cells").at(a).get<int>()};
  };
  if (dim == 1) {
    const Axis x = axis(0);
    return Grid::line(x.lower, x.upper, x.cells);
  }
  return Grid::plane(axis(0), axis(1));
}

std::string snapshot_name(int i, int k) {
  std::ostringstream s;
  s << "species" << i << "_step" << std::setw(6) << std::setfill('0') << k << ".csv";
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f) throw ConfigError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunConfig load_with(const fs::path& config, const RunOptions& opt) {
  RunConfig cfg = load_config(config);
  cfg.solver.best_effort = opt.best_effort;
  if (opt.threads > 0) cfg.solver.threads = opt.threads;
  if (opt.output) cfg.output_dir = *opt.output;
  return cfg;
}

void print_report(const DiagnosticsReport& rep, std::ostream& out) {
  for (const Check& c : rep.checks) {
    out << "  " << std::left << std::setw(36) << c.name << (c.pass ? "ok    " : "FAIL  ")
        << std::setprecision(6) << c.statistic;
    if (std::isfinite(c.bound) && c.bound < std::numeric_limits<double>::max())
      out << "  (bound " << c.bound << ")";
    out << "\n";
  }
  out << std::right;
}

int report_error(const Error& e, std::ostream& err) {
  switch (e.code()) {
    case ExitCode::kConfigError:
      err << "config error: " << e.what() << "\n";
      break;
    case ExitCode::kHypothesisFailure:
      err << "hypothesis failure: " << e.what() << "\n";
      break;
    case ExitCode::kSolverFailure: {
      const auto& s = static_cast<const SolverError&>(e);
      err << "solver failure: " << e.what() << " (residual " << s.residual() << ", "
          << s.iterations() << " iterations)\n";
      break;
    }
    case ExitCode::kSuccess:
      break;
  }
  return static_cast<int>(e.code());
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    return report_error(e, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfigError);
  }
}

// Error of the final densities against the configured analytic reference.
struct ReferenceError {
  double l1 = 0.0;
  double w2 = 0.0;
};

Density reference_density(const ReferenceSpec& ref, const Grid& grid, double T) {
  return baseline_exact(ref.kind, ref.params, grid, ref.kind == BaselineKind::kGibbs ? 0.0 : T);
}

ReferenceError reference_error(const ReferenceSpec& ref, const Trajectory& traj) {
  const Density& last = traj.density(traj.step_count(), 0);
  const Density exact = reference_density(ref, last.grid(), traj.step_count() * traj.h);
  const Density a[] = {last}, b[] = {exact};
  return {l1_distance(last, exact), std::sqrt(std::max(vector_distance(a, b), 0.0))};
}

void require_single_species(const RunConfig& cfg) {
  if (cfg.reference && cfg.energies.size() != 1)
    throw ConfigError("reference: analytic baselines describe a single species");
}

std::string timeseries_csv(const Trajectory& traj, const SpeciesSystem& sys) {
  const int l = sys.species();
  std::vector<SpeciesSeries> series;
  for (int i = 0; i < l; ++i) series.push_back(species_series(traj, sys, i));
  std::ostringstream s;
  s << "t";
  for (int i = 0; i < l; ++i)
    s << ",mass_" << i << ",M_" << i << ",F_" << i << ",V_" << i << ",W2sq_" << i << ",residual_"
      << i << ",action_" << i;
  s << "\n";
  for (int k = 0; k <= traj.step_count(); ++k) {
    s << format_exact(k * traj.h);
    for (const auto& q : series) {
      s << "," << format_exact(q.mass[k]) << "," << format_exact(q.moment[k]) << ","
        << format_exact(q.internal[k]) << "," << format_exact(q.potential[k]) << ","
        << format_exact(q.w2sq[k]) << "," << (q.residual[k] ? format_exact(*q.residual[k]) : "")
        << "," << format_exact(q.action[k]);
    }
    s << "\n";
  }
  return s.str();
}

}  // namespace

std::vector<int> snapshot_steps(int steps, int record_every) {
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
  std::vector<int> ks;
  for (int k = 0; k <= steps; k += record_every) ks.push_back(k);
  if (ks.back() != steps) ks.push_back(steps);
  return ks;
}

ValidationReport validate_config(const RunConfig& cfg) {
  ValidationReport rep;
  const SpeciesSystem sys = make_system(cfg);
  const Grid& grid = cfg.grid;
  const int l = sys.species();
  const std::vector<double> samples = log_samples(1e-6, 1e6, 241);
  for (int i = 0; i < l; ++i) {
    const InternalEnergy& e = sys.energy(i);
    const std::string tag = cfg.names[i];
    const EnergyReport hm = check_class_Hm(e, samples);
    std::size_t bad = 0;
    for (const auto& c : hm.checks) bad += c.violations;
    rep.checks.add("class_Hm_violations[" + tag + "]", static_cast<double>(bad), 0.0);
    if (!hm.pass) rep.failures.push_back(tag + ": energy " + e.describe() + " is not in class H_m");
    const EnergyReport mc = check_mccann(e, grid.dim(), samples);
    bad = 0;
    for (const auto& c : mc.checks) bad += c.violations;
    rep.checks.add("mccann_violations[" + tag + "]", static_cast<double>(bad), 0.0);
    if (!mc.pass)
      rep.failures.push_back(tag + ": energy " + e.describe() + " fails McCann's condition in " +
                             std::to_string(grid.dim()) + "-D");
  }

  const std::vector<TrialPair> pairs = standard_trial_pairs(grid, l);
  const CertificationReport cert = certify_hypotheses(cfg.interaction, grid, pairs);
  rep.c_lip = cert.c_lip;
  rep.c_hess = cert.c_hess;
  rep.checks.add("lipschitz_ratio", cert.max_ratio, cert.bound + cert.tolerance);
  if (!cert.pass)
    rep.failures.push_back("interaction: W2-Lipschitz bound of grad V violated (ratio " +
                           std::to_string(cert.max_ratio) + " > " + std::to_string(cert.bound) + ")");
  if (!cert.nonnegative) rep.failures.push_back("interaction: kernels must be nonnegative");

  const std::vector<Density> initial = make_initial(cfg);
  for (int i = 0; i < l; ++i) {
    const std::string tag = cfg.names[i];
    const double energy = eval_functional(sys.energy(i), initial[i]) +
                          eval_interaction_functional(cfg.interaction, i, initial[i], initial);
    rep.checks.add("initial_energy[" + tag + "]", energy, std::numeric_limits<double>::max(),
                   std::numeric_limits<double>::lowest());
    if (!std::isfinite(energy)) {
      rep.failures.push_back(tag + ": initial energy is not finite");
      continue;
    }
    const double cells = effective_support(sys.energy(i), initial[i]) / grid.cell_volume();
    rep.checks.add("effective_support_cells[" + tag + "]", cells,
                   std::numeric_limits<double>::infinity(), kMinEffectiveCells);
    if (!(cells >= kMinEffectiveCells)) {
      std::ostringstream s;
      s << tag << ": initial energy blows up under refinement (atom-like data: effective support "
        << std::setprecision(3) << cells << " cells < " << kMinEffectiveCells << ")";
      rep.failures.push_back(s.str());
    }
  }
  return rep;
}

int cmd_validate(const fs::path& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config);
    const ValidationReport rep = validate_config(cfg);
    out << "validate " << config.string() << "\n";
    print_report(rep.checks, out);
    out << "  C_lip " << rep.c_lip << "  C_hess " << rep.c_hess << "\n";
    for (const auto& f : rep.failures) err << "hypothesis failure: " << f << "\n";
    out << (rep.pass() ? "PASS" : "FAIL") << "\n";
    return static_cast<int>(rep.pass() ? ExitCode::kSuccess : ExitCode::kHypothesisFailure);
  });
}

int cmd_run(const fs::path& config, const RunOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_with(config, opt);
    require_single_species(cfg);
    const ValidationReport val = validate_config(cfg);
    if (!val.pass()) {
      for (const auto& f : val.failures) err << "hypothesis failure: " << f << "\n";
      return static_cast<int>(ExitCode::kHypothesisFailure);
    }
    const SpeciesSystem sys = make_system(cfg);
    const Trajectory traj = run_scheme(sys, make_initial(cfg), cfg.h, cfg.T, cfg.solver);
    const int N = traj.step_count();
    const int l = sys.species();

    fs::create_directories(cfg.output_dir);
    const fs::path dir = cfg.output_dir;
    json snaps = json::array();
    for (int k : snapshot_steps(N, cfg.record_every)) {
      json files = json::array();
      for (int i = 0; i < l; ++i) {
        const std::string name = snapshot_name(i, k);
        if (cfg.write_csv) write_snapshot((dir / name).string(), traj.density(k, i));
        files.push_back(name);
      }
      snaps.push_back({{"k", k}, {"t", k * cfg.h}, {"files", files}});
    }
    if (cfg.write_csv) write_text(dir / kTimeseriesFile, timeseries_csv(traj, sys));

    DiagnosticsReport rep = analyze_trajectory(traj, sys);
    json summary;
    if (cfg.reference) {
      const ReferenceError e = reference_error(*cfg.reference, traj);
      const double dx = cfg.grid.axis(0).spacing();
      json ref{{"baseline", baseline_name(cfg.reference->kind)}, {"l1_error", e.l1},
               {"w2_error", e.w2}};
      switch (cfg.reference->kind) {
        case BaselineKind::kHeat:
          rep.add("reference_l1_error", e.l1, 0.02);
          break;
        case BaselineKind::kBarenblatt:
          rep.add("reference_l1_error", e.l1, 0.05);
          break;
        case BaselineKind::kGibbs:
          rep.add("reference_w2_drift", e.w2, 2.0 * dx);
          break;
      }
      summary["reference"] = ref;
    }

    json checks = json::object();
    for (const Check& c : rep.checks) checks[c.name] = check_json(c);
    for (const Check& c : val.checks.checks) checks["validate." + c.name] = check_json(c);
    json species = json::array();
    for (int i = 0; i < l; ++i) {
      json s{{"name", cfg.names[i]},
             {"energy", sys.energy(i).describe()},
             {"L2H1", gradient_estimate_L2H1(traj, sys, i)},
             {"L1W11", gradient_estimate_L1W11(traj, sys, i)},
             {"action", benamou_brenier_action(traj, sys, i)}};
      if (auto hc = holder_constant(traj, i)) s["holder_constant"] = *hc;
      species.push_back(s);
    }
    summary["checks"] = checks;
    summary["species"] = species;
    summary["certification"] = {{"C_lip", val.c_lip}, {"C_hess", val.c_hess}};
    summary["h"] = cfg.h;
    summary["T"] = cfg.T;
    summary["steps"] = N;
    summary["solver"] = solver_name(cfg.solver.kind);
    if (cfg.solver.kind == SolverKind::kEntropic)
      summary["epsilon"] = cfg.solver.effective_epsilon(cfg.grid);
    summary["pass"] = rep.pass();
    if (cfg.write_json) write_text(dir / kSummaryFile, summary.dump(2) + "\n");

    json index{{"h", cfg.h},
               {"T", cfg.T},
               {"steps", N},
               {"record_every", cfg.record_every},
               {"species", cfg.names},
               {"grid", grid_json(cfg.grid)},
               {"solver", solver_name(cfg.solver.kind)},
               {"C_hess", val.c_hess},
               {"snapshots", snaps}};
    if (cfg.write_csv) index["timeseries"] = kTimeseriesFile;
    if (cfg.write_json) index["summary"] = kSummaryFile;
    write_text(dir / kIndexFile, index.dump(2) + "\n");

    out << "run " << config.string() << ": " << N << " steps, " << snaps.size()
        << " snapshots -> " << dir.string() << "\n";
    print_report(rep, out);
    out << (rep.pass() ? "PASS" : "FAIL") << "\n";
    return static_cast<int>(ExitCode::kSuccess);
  });
}

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> v;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    std::size_t used = 0;
    double h = 0.0;
    try {
      h = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("--levels: '" + item + "' is not a number");
    }
    if (used != item.size()) throw ConfigError("--levels: '" + item + "' is not a number");
    v.push_back(h);
  }
  return v;
}

void check_levels(const std::vector<double>& levels) {
  if (levels.size() < 3) throw ConfigError("--levels needs at least three time steps");
  for (std::size_t q = 0; q < levels.size(); ++q) {
    if (!(levels[q] > 0.0)) throw ConfigError("--levels: time steps must be positive");
    if (q > 0 && std::abs(levels[q] - 0.5 * levels[q - 1]) > 1e-9 * levels[q - 1])
      throw ConfigError("--levels: each time step must halve the previous one");
  }
}

int cmd_convergence(const fs::path& config, const std::vector<double>& levels,
                    const RunOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_levels(levels);
    const RunConfig cfg = load_with(config, opt);
    require_single_species(cfg);
    if (cfg.T < levels.front()) throw ConfigError("--levels: time steps must not exceed T");
    const ValidationReport val = validate_config(cfg);
    if (!val.pass()) {
      for (const auto& f : val.failures) err << "hypothesis failure: " << f << "\n";
      return static_cast<int>(ExitCode::kHypothesisFailure);
    }
    const SpeciesSystem sys = make_system(cfg);
    const std::vector<Density> initial = make_initial(cfg);
    const int l = sys.species();

    std::vector<Trajectory> runs;
    for (double h : levels) runs.push_back(run_scheme(sys, initial, h, cfg.T, cfg.solver));
    // Reference: the analytic solution when configured, else the finest level.
    std::vector<Density> ref;
    if (cfg.reference) {
      const Trajectory& fine = runs.back();
      ref.push_back(reference_density(*cfg.reference, cfg.grid, fine.step_count() * fine.h));
    } else {
      for (int i = 0; i < l; ++i) ref.push_back(runs.back().density(runs.back().step_count(), i));
    }
    const std::size_t rows = cfg.reference ? runs.size() : runs.size() - 1;

    std::ostringstream csv;
    csv << "h,steps,l1_error,w2_error,sum_w2sq,sum_w2sq_over_h,order\n";
    out << "convergence " << config.string() << " (reference: "
        << (cfg.reference ? baseline_name(cfg.reference->kind) + " analytic" : "finest level")
        << ")\n";
    out << std::setw(12) << "h" << std::setw(8) << "steps" << std::setw(14) << "L1 error"
        << std::setw(14) << "W2 error" << std::setw(14) << "sum W2^2" << std::setw(10) << "order"
        << "\n";
    std::vector<double> errors;
    bool monotone = true;
    for (std::size_t q = 0; q < runs.size(); ++q) {
      const Trajectory& tr = runs[q];
      double sum = 0.0;
      for (const auto& st : tr.steps)
        for (const auto& rec : st.species) sum += rec.w2sq;
      std::vector<Density> last;
      for (int i = 0; i < l; ++i) last.push_back(tr.density(tr.step_count(), i));
      const bool has_error = q < rows;
      double l1 = 0.0, w2 = 0.0;
      std::string order;
      if (has_error) {
        for (int i = 0; i < l; ++i) l1 += l1_distance(last[i], ref[i]);
        w2 = std::sqrt(std::max(vector_distance(last, ref), 0.0));
        if (!errors.empty()) {
          if (!(l1 < errors.back())) monotone = false;
          order = format_exact(std::log2(errors.back() / l1));
        }
        errors.push_back(l1);
      }
      csv << format_exact(tr.h) << "," << tr.step_count() << ","
          << (has_error ? format_exact(l1) : "") << "," << (has_error ? format_exact(w2) : "")
          << "," << format_exact(sum) << "," << format_exact(sum / tr.h) << "," << order << "\n";
      out << std::setprecision(5) << std::setw(12) << tr.h << std::setw(8) << tr.step_count();
      if (has_error) {
        out << std::setw(14) << l1 << std::setw(14) << w2;
      } else {
        out << std::setw(14) << "-" << std::setw(14) << "-";
      }
      out << std::setw(14) << sum << std::setw(10) << (order.empty() ? "-" : order.substr(0, 6))
          << "\n";
    }
    fs::create_directories(cfg.output_dir);
    write_text(fs::path(cfg.output_dir) / kConvergenceFile, csv.str());
    out << "monotone error decrease: " << (monotone ? "yes" : "no") << "\n";
    return static_cast<int>(ExitCode::kSuccess);
  });
}

int cmd_compare(const fs::path& dir_a, const fs::path& dir_b, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&] {
    const json a = read_json(dir_a / kIndexFile);
    const json b = read_json(dir_b / kIndexFile);
    Grid ga, gb;
    try {
      ga = grid_from_json(a.at("grid"));
      gb = grid_from_json(b.at("grid"));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("index.json: malformed grid: ") + e.what());
    }
    if (!(ga == gb)) throw ConfigError("compare: the runs use different grids");
    const json& sa = a.at("snapshots");
    const json& sb = b.at("snapshots");
    if (a.at("species").size() != b.at("species").size())
      throw ConfigError("compare: the runs have different species counts");
    if (sa.size() != sb.size()) throw ConfigError("compare: the runs have different record times");

    std::vector<double> t, d;
    const std::size_t l = a.at("species").size();
    out << std::setw(12) << "t" << std::setw(16) << "W2";
    for (std::size_t i = 0; i < l; ++i) out << std::setw(16) << ("W2[" + std::to_string(i) + "]");
    out << "\n";
    for (std::size_t q = 0; q < sa.size(); ++q) {
      const double ta = sa[q].at("t").get<double>(), tb = sb[q].at("t").get<double>();
      if (std::abs(ta - tb) > 1e-12 * (1.0 + std::abs(ta)))
        throw ConfigError("compare: the runs have different record times");
      std::vector<Density> ra, rb;
      for (std::size_t i = 0; i < l; ++i) {
        ra.push_back(read_snapshot((dir_a / sa[q].at("files")[i].get<std::string>()).string()));
        rb.push_back(read_snapshot((dir_b / sb[q].at("files")[i].get<std::string>()).string()));
        if (!(ra.back().grid() == ga) || !(rb.back().grid() == ga))
          throw ConfigError("compare: snapshot grid differs from index.json");
      }
      const double sum = std::max(vector_distance(ra, rb), 0.0);
      t.push_back(ta);
      d.push_back(sum);
      out << std::setprecision(6) << std::setw(12) << ta << std::setw(16) << std::sqrt(sum);
      for (std::size_t i = 0; i < l; ++i) {
        const Density x[] = {ra[i]}, y[] = {rb[i]};
        out << std::setw(16) << std::sqrt(std::max(vector_distance(x, y), 0.0));
      }
      out << "\n";
    }
    const double c_cert = std::max(a.value("C_hess", 0.0), b.value("C_hess", 0.0));
    const double dx = ga.axis(0).spacing();
    const ContractionReport rep =
        contraction_from_series(t, d, c_cert, ga.dim() == 1 ? 0.0 : dx * dx);
    out << "growth rate of log sum W2^2: " << rep.growth_rate << " (bound " << rep.bound
        << ", C_cert " << rep.c_cert << ") " << (rep.pass ? "PASS" : "FAIL") << "\n";
    return static_cast<int>(ExitCode::kSuccess);
  });
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"jkoflow: JKO schemes for multi-species diffusion-interaction systems"};
  app.require_subcommand(1);
  std::string config, dir_a, dir_b, levels, output;
  bool best_effort = false;
  int threads = 0;

  auto* validate = app.add_subcommand("validate", "check the modelling hypotheses of a config");
  validate->add_option("config", config, "config file")->required();

  auto* run = app.add_subcommand("run", "run a simulation and write its outputs");
  run->add_option("config", config, "config file")->required();

  auto* conv = app.add_subcommand("convergence", "refinement study over halving time steps");
  conv->add_option("config", config, "config file")->required();
  conv->add_option("--levels", levels, "comma-separated time steps, each half the previous")
      ->required();

  for (auto* sub : {run, conv}) {
    sub->add_flag("--best-effort", best_effort, "continue past inner-solver failures");
    sub->add_option("--output", output, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "species-parallel workers (default JKOFLOW_THREADS)")
        ->check(CLI::NonNegativeNumber);
  }

  auto* compare = app.add_subcommand("compare", "W2 distance table between two run directories");
  compare->add_option("dir_a", dir_a, "first run directory")->required();
  compare->add_option("dir_b", dir_b, "second run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfigError);
  }

  RunOptions opt;
  opt.best_effort = best_effort;
  opt.threads = threads;
  if (!output.empty()) opt.output = output;
  if (validate->parsed()) return cmd_validate(config, out, err);
  if (run->parsed()) return cmd_run(config, opt, out, err);
  if (conv->parsed()) {
    std::vector<double> hs;
    try {
      hs = parse_levels(levels);
      check_levels(hs);
    } catch (const Error& e) {
      return report_error(e, err);
    }
    return cmd_convergence(config, hs, opt, out, err);
  }
  return cmd_compare(dir_a, dir_b, out, err);
}

}  // namespace jkoflow
