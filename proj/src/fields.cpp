#include "tse/fields.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tse {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Header line: "# grid,x0,length,t0,duration,dx,dt,nx,nt" with the actual
// values in those positions. Values print with 17 significant digits so the
// round trip is bit-exact for finite doubles.
void write_grid_header(std::ostream& os, const Grid& g) {
  os << "# grid," << fmt17(g.x0) << ',' << fmt17(g.length) << ',' << fmt17(g.t0)
     << ',' << fmt17(g.duration) << ',' << fmt17(g.dx) << ',' << fmt17(g.dt)
     << ',' << g.nx << ',' << g.nt << '\n';
}

Grid parse_grid_header(const std::string& line, const std::filesystem::path& path) {
  Grid g;
  double x0, length, t0, duration, dx, dt;
  int nx, nt;
  if (std::sscanf(line.c_str(), "# grid,%lf,%lf,%lf,%lf,%lf,%lf,%d,%d", &x0,
                  &length, &t0, &duration, &dx, &dt, &nx, &nt) != 8)
    throw std::runtime_error("bad grid header in " + path.string());
  g.x0 = x0;
  g.length = length;
  g.t0 = t0;
  g.duration = duration;
  g.dx = dx;
  g.dt = dt;
  g.nx = nx;
  g.nt = nt;
  g.validate();
  return g;
}

}  // namespace

void DensityField::validate() const {
  if (values.size() != static_cast<std::size_t>(grid.cells()))
    throw std::invalid_argument("DensityField: value count does not match grid");
  for (double v : values)
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("DensityField: values must be finite and >= 0");
}

void SpeedField::validate() const {
  if (values.size() != static_cast<std::size_t>(grid.cells()) ||
      mask.size() != values.size())
    throw std::invalid_argument("SpeedField: size mismatch");
  for (std::size_t k = 0; k < values.size(); ++k)
    if (mask[k] && (!std::isfinite(values[k]) || values[k] < 0.0))
      throw std::invalid_argument("SpeedField: valid entries must be finite and >= 0");
}

int count_suspect_density_cells(const DensityField& f, double rho_m) {
  int n = 0;
  for (double v : f.values)
    if (v > 1.5 * rho_m) ++n;
  return n;
}

void write_density_csv(const DensityField& f, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_grid_header(os, f.grid);
  for (int i = 0; i < f.grid.nx; ++i)
    for (int j = 0; j < f.grid.nt; ++j)
      os << i << ',' << j << ',' << fmt17(f.at(i, j)) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

DensityField read_density_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("empty density file " + path.string());
  DensityField f = DensityField::zeros(parse_grid_header(line, path));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    int i, j;
    char val[64];
    if (std::sscanf(line.c_str(), "%d,%d,%63s", &i, &j, val) != 3)
      throw std::runtime_error("bad row in " + path.string() + ": " + line);
    if (i < 0 || i >= f.grid.nx || j < 0 || j >= f.grid.nt)
      throw std::runtime_error("row index out of range in " + path.string());
    f.at(i, j) = std::strtod(val, nullptr);
  }
  f.validate();
  return f;
}

void write_speed_csv(const SpeedField& f, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_grid_header(os, f.grid);
  // masked cells are omitted; absence encodes the mask
  for (int i = 0; i < f.grid.nx; ++i)
    for (int j = 0; j < f.grid.nt; ++j)
      if (f.valid(i, j)) os << i << ',' << j << ',' << fmt17(f.at(i, j)) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

SpeedField read_speed_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("empty speed file " + path.string());
  SpeedField f = SpeedField::masked(parse_grid_header(line, path));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    int i, j;
    char val[64];
    if (std::sscanf(line.c_str(), "%d,%d,%63s", &i, &j, val) != 3)
      throw std::runtime_error("bad row in " + path.string() + ": " + line);
    if (i < 0 || i >= f.grid.nx || j < 0 || j >= f.grid.nt)
      throw std::runtime_error("row index out of range in " + path.string());
    f.set(i, j, std::strtod(val, nullptr));
  }
  f.validate();
  return f;
}

}  // namespace tse
