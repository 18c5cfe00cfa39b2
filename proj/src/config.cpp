#include "jkoflow/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "jkoflow/error.hpp"

namespace jkoflow {

namespace {

using json = nlohmann::json;

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": must be finite");
  return v;
}

double number_or(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j.at(key), where + "." + key) : fallback;
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<int>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  return j.get<std::string>();
}

// A scalar or an array of `dim` numbers.
std::vector<double> per_axis(const json& j, int dim, const std::string& where) {
  if (j.is_number()) return std::vector<double>(dim, number(j, where));
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError(where + ": expected a number or " + std::to_string(dim) + " numbers");
  std::vector<double> v;
  for (std::size_t a = 0; a < j.size(); ++a) v.push_back(number(j[a], where));
  return v;
}

Point point(const json& j, int dim, const std::string& where) {
  const auto v = per_axis(j, dim, where);
  return {v[0], dim > 1 ? v[1] : 0.0};
}

Grid parse_grid(const json& j) {
  allow_keys(j, {"dim", "lower", "upper", "cells"}, "grid");
  const int dim = j.contains("dim") ? integer(j.at("dim"), "grid.dim") : 1;
  if (dim != 1 && dim != 2) throw ConfigError("grid.dim must be 1 or 2");
  const auto lo = per_axis(need(j, "lower", "grid"), dim, "grid.lower");
  const auto hi = per_axis(need(j, "upper", "grid"), dim, "grid.upper");
  const json& cj = need(j, "cells", "grid");
  std::vector<int> cells;
  if (cj.is_number_integer()) {
    cells.assign(dim, cj.get<int>());
  } else if (cj.is_array() && static_cast<int>(cj.size()) == dim) {
    for (const auto& c : cj) cells.push_back(integer(c, "grid.cells"));
  } else {
    throw ConfigError("grid.cells: expected an integer or one per axis");
  }
  for (int a = 0; a < dim; ++a) {
    if (!(hi[a] > lo[a])) throw ConfigError("grid: upper must exceed lower");
    if (cells[a] < 2) throw ConfigError("grid.cells must be >= 2");
  }
  if (dim == 1) return Grid::line(lo[0], hi[0], cells[0]);
  return Grid::plane(Axis{lo[0], hi[0], cells[0]}, Axis{lo[1], hi[1], cells[1]});
}

InternalEnergy parse_energy(const json& j, const std::string& where) {
  allow_keys(j, {"kind", "m", "c", "alpha"}, where);
  const std::string kind = text(need(j, "kind", where), where + ".kind");
  const double alpha = number_or(j, "alpha", 1.0, where);
  if (!(alpha > 0.0)) throw ConfigError(where + ".alpha must be > 0");
  if (kind == "entropy") {
    if (j.contains("m") && number(j.at("m"), where + ".m") != 1.0)
      throw ConfigError(where + ": entropy has m = 1");
    if (j.contains("c")) throw ConfigError(where + ": entropy takes no coefficient c");
    return InternalEnergy::entropy(alpha);
  }
  if (kind == "power") {
    const double m = number(need(j, "m", where), where + ".m");
    const double c = number_or(j, "c", 1.0, where);
    if (!(m > 1.0)) throw ConfigError(where + ".m must be > 1 for a power law");
    if (!(c > 0.0)) throw ConfigError(where + ".c must be > 0");
    return InternalEnergy::power(m, c, alpha);
  }
  throw ConfigError(where + ".kind must be entropy or power");
}

Kernel parse_kernel(const json& j, const std::string& where) {
  allow_keys(j, {"family", "A", "sigma"}, where);
  const std::string family = text(need(j, "family", where), where + ".family");
  Kernel k;
  if (family == "zero") {
    if (j.contains("A") || j.contains("sigma")) throw ConfigError(where + ": zero kernel takes no parameters");
    return Kernel::zero();
  }
  if (family == "constant") {
    if (j.contains("sigma")) throw ConfigError(where + ": constant kernel takes no sigma");
    k = Kernel::constant(number(need(j, "A", where), where + ".A"));
  } else if (family == "gaussian") {
    k = Kernel::gaussian(number(need(j, "A", where), where + ".A"),
                         number(need(j, "sigma", where), where + ".sigma"));
  } else {
    throw ConfigError(where + ".family must be zero, constant or gaussian");
  }
  k.validate();
  return k;
}

ExternalPotential parse_external(const json& j, int dim, const std::string& where) {
  allow_keys(j, {"family", "radius", "center"}, where);
  const std::string family = text(need(j, "family", where), where + ".family");
  if (family == "zero") return ExternalPotential::zero();
  if (family != "confining") throw ConfigError(where + ".family must be zero or confining");
  const Point center = j.contains("center") ? point(j.at("center"), dim, where + ".center") : Point{0.0, 0.0};
  ExternalPotential u = ExternalPotential::confining(number(need(j, "radius", where), where + ".radius"), center);
  u.validate();
  return u;
}

InteractionSpec parse_interaction(const json& j, int species, int dim) {
  allow_keys(j, {"kernels", "external"}, "interaction");
  std::vector<std::vector<Kernel>> kernels(species, std::vector<Kernel>(species));
  std::vector<ExternalPotential> external(species);
  if (j.contains("kernels")) {
    const json& k = j.at("kernels");
    if (!k.is_array() || static_cast<int>(k.size()) != species)
      throw ConfigError("interaction.kernels: expected one row per species");
    for (int a = 0; a < species; ++a) {
      if (!k[a].is_array() || static_cast<int>(k[a].size()) != species)
        throw ConfigError("interaction.kernels: expected one entry per species in each row");
      for (int b = 0; b < species; ++b)
        kernels[a][b] = parse_kernel(k[a][b], "interaction.kernels[" + std::to_string(a) + "][" +
                                                  std::to_string(b) + "]");
    }
  }
  if (j.contains("external")) {
    const json& e = j.at("external");
    if (!e.is_array() || static_cast<int>(e.size()) != species)
      throw ConfigError("interaction.external: expected one entry per species");
    for (int a = 0; a < species; ++a)
      external[a] = parse_external(e[a], dim, "interaction.external[" + std::to_string(a) + "]");
  }
  return InteractionSpec(std::move(kernels), std::move(external));
}

InitialProfile parse_profile(const json& j, int dim, const std::filesystem::path& base,
                             const std::string& where) {
  const std::string kind = text(need(j, "profile", where), where + ".profile");
  InitialProfile p;
  if (kind == "gaussian") {
    allow_keys(j, {"profile", "mean", "sigma"}, where);
    p.kind = ProfileKind::kGaussian;
    p.mean = j.contains("mean") ? point(j.at("mean"), dim, where + ".mean") : Point{0.0, 0.0};
    p.sigma = number(need(j, "sigma", where), where + ".sigma");
    if (!(p.sigma > 0.0)) throw ConfigError(where + ".sigma must be > 0");
  } else if (kind == "uniform") {
    allow_keys(j, {"profile", "support"}, where);
    p.kind = ProfileKind::kUniform;
    const json& s = need(j, "support", where);
    auto interval = [&](const json& iv) {
      if (!iv.is_array() || iv.size() != 2) throw ConfigError(where + ".support: expected [lo, hi]");
      const double lo = number(iv[0], where + ".support"), hi = number(iv[1], where + ".support");
      if (!(hi > lo)) throw ConfigError(where + ".support: hi must exceed lo");
      return std::array<double, 2>{lo, hi};
    };
    if (dim == 1) {
      p.support.push_back(interval(s));
    } else {
      if (!s.is_array() || s.size() != 2) throw ConfigError(where + ".support: one interval per axis");
      for (const auto& iv : s) p.support.push_back(interval(iv));
    }
  } else if (kind == "bump") {
    allow_keys(j, {"profile", "center", "radius"}, where);
    p.kind = ProfileKind::kBump;
    p.mean = j.contains("center") ? point(j.at("center"), dim, where + ".center") : Point{0.0, 0.0};
    p.radius = number(need(j, "radius", where), where + ".radius");
    if (!(p.radius > 0.0)) throw ConfigError(where + ".radius must be > 0");
  } else if (kind == "barenblatt") {
    allow_keys(j, {"profile", "t0"}, where);
    if (dim != 1) throw ConfigError(where + ": barenblatt profile is 1-D");
    p.kind = ProfileKind::kBarenblatt;
    p.t0 = number(need(j, "t0", where), where + ".t0");
    if (!(p.t0 > 0.0)) throw ConfigError(where + ".t0 must be > 0");
  } else if (kind == "gibbs") {
    allow_keys(j, {"profile", "radius", "center"}, where);
    p.kind = ProfileKind::kGibbs;
    p.radius = number(need(j, "radius", where), where + ".radius");
    if (!(p.radius > 0.0)) throw ConfigError(where + ".radius must be > 0");
    p.mean = j.contains("center") ? point(j.at("center"), dim, where + ".center") : Point{0.0, 0.0};
  } else if (kind == "file") {
    allow_keys(j, {"profile", "path"}, where);
    p.kind = ProfileKind::kFile;
    p.path = text(need(j, "path", where), where + ".path");
    if (p.path.is_relative()) p.path = base / p.path;
    if (!std::filesystem::exists(p.path))
      throw ConfigError(where + ".path: file not found: " + p.path.string());
  } else {
    throw ConfigError(where + ".profile must be gaussian, uniform, bump, barenblatt, gibbs or file");
  }
  return p;
}

SolverOptions parse_scheme(const json& j, RunConfig& cfg) {
  allow_keys(j, {"h", "T", "solver", "epsilon", "tol", "max_iter", "record_every"}, "scheme");
  cfg.h = number(need(j, "h", "scheme"), "scheme.h");
  cfg.T = number(need(j, "T", "scheme"), "scheme.T");
  if (!(cfg.h > 0.0)) throw ConfigError("scheme.h must be > 0");
  if (!(cfg.T >= cfg.h)) throw ConfigError("scheme.T must be >= scheme.h");
  SolverOptions s;
  s.kind = parse_solver(j.contains("solver") ? text(j.at("solver"), "scheme.solver") : "exact1d");
  s.epsilon = number_or(j, "epsilon", 0.0, "scheme");
  s.tol = number_or(j, "tol", s.tol, "scheme");
  s.max_iter = j.contains("max_iter") ? integer(j.at("max_iter"), "scheme.max_iter") : 0;
  cfg.record_every = j.contains("record_every") ? integer(j.at("record_every"), "scheme.record_every") : 1;
  if (s.epsilon < 0.0) throw ConfigError("scheme.epsilon must be >= 0 (0 selects dx^2)");
  if (!(s.tol > 0.0)) throw ConfigError("scheme.tol must be > 0");
  if (s.max_iter < 0) throw ConfigError("scheme.max_iter must be >= 0");
  if (cfg.record_every < 1) throw ConfigError("scheme.record_every must be >= 1");
  return s;
}

ReferenceSpec parse_reference(const json& j) {
  allow_keys(j, {"baseline", "sigma0", "t0", "radius"}, "reference");
  ReferenceSpec r;
  r.kind = parse_baseline(text(need(j, "baseline", "reference"), "reference.baseline"));
  r.params.sigma0 = number_or(j, "sigma0", r.params.sigma0, "reference");
  r.params.t0 = number_or(j, "t0", r.params.t0, "reference");
  r.params.radius = number_or(j, "radius", r.params.radius, "reference");
  return r;
}

}  // namespace

RunConfig parse_config(const std::string& source_text, const std::filesystem::path& source) {
  json j;
  try {
    j = json::parse(source_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  allow_keys(j, {"grid", "species", "initial", "interaction", "scheme", "outputs", "reference"},
             "config");
  const std::filesystem::path base = source.empty() ? std::filesystem::path(".") : source.parent_path();
  RunConfig cfg;
  cfg.source = source;
  cfg.grid = parse_grid(need(j, "grid", "config"));
  const int dim = cfg.grid.dim();

  const json& sp = need(j, "species", "config");
  if (!sp.is_array() || sp.empty()) throw ConfigError("species: expected a nonempty list");
  for (std::size_t i = 0; i < sp.size(); ++i) {
    const std::string where = "species[" + std::to_string(i) + "]";
    allow_keys(sp[i], {"name", "energy"}, where);
    cfg.names.push_back(sp[i].contains("name") ? text(sp[i].at("name"), where + ".name")
                                               : "species" + std::to_string(i));
    cfg.energies.push_back(parse_energy(need(sp[i], "energy", where), where + ".energy"));
  }
  const int l = static_cast<int>(cfg.energies.size());

  const json& in = need(j, "initial", "config");
  if (!in.is_array() || static_cast<int>(in.size()) != l)
    throw ConfigError("initial: expected one profile per species");
  for (int i = 0; i < l; ++i)
    cfg.initial.push_back(parse_profile(in[i], dim, base, "initial[" + std::to_string(i) + "]"));

  cfg.interaction = j.contains("interaction") ? parse_interaction(j.at("interaction"), l, dim)
                                              : InteractionSpec::none(l);
  cfg.solver = parse_scheme(need(j, "scheme", "config"), cfg);
  if (cfg.solver.kind == SolverKind::kExact1d && dim != 1)
    throw ConfigError("scheme.solver exact1d requires a 1-D grid");

  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    allow_keys(o, {"directory", "formats"}, "outputs");
    if (o.contains("directory")) cfg.output_dir = text(o.at("directory"), "outputs.directory");
    if (o.contains("formats")) {
      const json& f = o.at("formats");
      if (!f.is_array()) throw ConfigError("outputs.formats: expected a list");
      cfg.write_csv = cfg.write_json = false;
      for (const auto& x : f) {
        const std::string s = text(x, "outputs.formats");
        if (s == "csv") {
          cfg.write_csv = true;
        } else if (s == "json") {
          cfg.write_json = true;
        } else {
          throw ConfigError("outputs.formats: unknown format '" + s + "' (csv, json)");
        }
      }
    }
  }
  if (cfg.output_dir.empty()) cfg.output_dir = "out";
  if (cfg.output_dir.is_relative() && !source.empty())
    cfg.output_dir = (base / cfg.output_dir).lexically_normal();

  if (j.contains("reference")) {
    cfg.reference = parse_reference(j.at("reference"));
    cfg.reference->params.T = cfg.T;
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

SpeciesSystem make_system(const RunConfig& cfg) {
  return SpeciesSystem(cfg.grid, cfg.energies, cfg.interaction);
}

Density make_initial(const InitialProfile& p, const Grid& grid, const std::filesystem::path& base) {
  const int dim = grid.dim();
  auto r2_from = [&](const Point& x, const Point& c) {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += (x[a] - c[a]) * (x[a] - c[a]);
    return s;
  };
  std::function<double(const Point&)> f;
  switch (p.kind) {
    case ProfileKind::kGaussian:
      f = [&](const Point& x) { return std::exp(-r2_from(x, p.mean) / (2.0 * p.sigma * p.sigma)); };
      break;
    case ProfileKind::kUniform:
      f = [&](const Point& x) {
        for (int a = 0; a < dim; ++a)
          if (x[a] < p.support[a][0] || x[a] > p.support[a][1]) return 0.0;
        return 1.0;
      };
      break;
    case ProfileKind::kBump:
      f = [&](const Point& x) {
        const double q = r2_from(x, p.mean) / (p.radius * p.radius);
        return q < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - q)) : 0.0;
      };
      break;
    case ProfileKind::kBarenblatt: {
      BaselineParams bp;
      bp.t0 = p.t0;
      return baseline_exact(BaselineKind::kBarenblatt, bp, grid, 0.0);
    }
    case ProfileKind::kGibbs: {
      const ExternalPotential U = ExternalPotential::confining(p.radius, p.mean);
      f = [U](const Point& x) { return std::exp(-U(x)); };
      break;
    }
    case ProfileKind::kFile: {
      const std::filesystem::path path = p.path.is_relative() ? base / p.path : p.path;
      Density d = read_snapshot(path.string());
      if (!(d.grid() == grid)) throw ConfigError("initial file " + path.string() + " is on a different grid");
      return d;
    }
  }
  std::vector<double> v(grid.size());
  double total = 0.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    v[c] = f(grid.center(c));
    total += v[c];
  }
  if (!(total > 0.0)) throw ConfigError("initial profile has no mass on the grid");
  return Density::normalized(grid, std::move(v));
}

std::vector<Density> make_initial(const RunConfig& cfg) {
  const std::filesystem::path base = cfg.source.empty() ? "." : cfg.source.parent_path();
  std::vector<Density> out;
  for (const auto& p : cfg.initial) out.push_back(make_initial(p, cfg.grid, base));
  return out;
}

double effective_support(const InternalEnergy& e, const Density& rho) {
  if (e.kind() == EnergyKind::kEntropy) {
    // alpha is folded into F; undo it for the volume.
    return std::exp(-eval_functional(e, rho) / e.alpha());
  }
  double s = 0.0;
  for (std::size_t c = 0; c < rho.size(); ++c) s += std::pow(rho[c], e.m());
  s *= rho.grid().cell_volume();
  return std::pow(s, -1.0 / (e.m() - 1.0));
}

}  // namespace jkoflow
