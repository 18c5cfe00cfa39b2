#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "jkoflow/error.hpp"
#include "jkoflow/grid.hpp"

namespace jkoflow {

std::string format_exact(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("snapshot: cannot parse number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

void write_snapshot(std::ostream& out, const Density& rho) {
  const Grid& g = rho.grid();
  out << "# grid: " << g.dim();
  for (int a = 0; a < g.dim(); ++a) {
    const Axis& ax = g.axis(a);
    out << ',' << format_exact(ax.lower) << ',' << format_exact(ax.upper) << ','
        << ax.cells;
  }
  out << '\n';
  for (std::size_t c = 0; c < rho.size(); ++c) {
    const Point x = g.center(c);
    out << c << ',' << format_exact(x[0]);
    if (g.dim() == 2) out << ',' << format_exact(x[1]);
    out << ',' << format_exact(rho[c]) << '\n';
  }
}

void write_snapshot(const std::string& path, const Density& rho) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_snapshot(out, rho);
}

Density read_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# grid:", 0) != 0)
    throw ConfigError("snapshot: missing '# grid:' header");
  const auto head = split(std::string_view(line).substr(7));
  const int dim = static_cast<int>(parse_double(head.at(0)));
  if ((dim != 1 && dim != 2) || head.size() != static_cast<std::size_t>(1 + 3 * dim))
    throw ConfigError("snapshot: malformed grid header");
  auto axis = [&](int a) {
    return Axis{parse_double(head[1 + 3 * a]), parse_double(head[2 + 3 * a]),
                static_cast<int>(parse_double(head[3 + 3 * a]))};
  };
  const Grid grid = dim == 1 ? Grid::line(axis(0).lower, axis(0).upper, axis(0).cells)
                             : Grid::plane(axis(0), axis(1));
  std::vector<double> values(grid.size(), 0.0);
  std::vector<bool> seen(grid.size(), false);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line);
    if (f.size() != static_cast<std::size_t>(2 + dim))
      throw ConfigError("snapshot: wrong column count");
    const auto idx = static_cast<std::size_t>(parse_double(f[0]));
    if (idx >= grid.size() || seen[idx]) throw ConfigError("snapshot: bad cell index");
    seen[idx] = true;
    values[idx] = parse_double(f.back());
    ++rows;
  }
  if (rows != grid.size()) throw ConfigError("snapshot: missing cells");
  return Density(grid, std::move(values));
}

Density read_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open snapshot '" + path + "'");
  return read_snapshot(in);
}

}  // namespace jkoflow
