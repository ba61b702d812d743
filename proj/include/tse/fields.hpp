#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tse/grid.hpp"

namespace tse {

// Gridded density state, row-major in i (space outermost).
struct DensityField {
  Grid grid;
  std::vector<double> values;  // nx * nt

  static DensityField zeros(const Grid& g) {
    DensityField f;
    f.grid = g;
    f.values.assign(static_cast<std::size_t>(g.cells()), 0.0);
    return f;
  }

  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * grid.nt + j]; }
  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * grid.nt + j];
  }

  // Throws if any value is non-finite or negative.
  void validate() const;
};

// Gridded speed state; cells with no occupancy carry no speed and are masked.
struct SpeedField {
  Grid grid;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  // 1 = valid

  static SpeedField masked(const Grid& g) {
    SpeedField f;
    f.grid = g;
    f.values.assign(static_cast<std::size_t>(g.cells()), 0.0);
    f.mask.assign(static_cast<std::size_t>(g.cells()), 0);
    return f;
  }

  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * grid.nt + j]; }
  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * grid.nt + j];
  }
  bool valid(int i, int j) const {
    return mask[static_cast<std::size_t>(i) * grid.nt + j] != 0;
  }
  void set(int i, int j, double v) {
    const auto k = static_cast<std::size_t>(i) * grid.nt + j;
    values[k] = v;
    mask[k] = 1;
  }

  void validate() const;
};

// Densities beyond 1.5x jam density are physically suspect; ingestion warns
// about them but does not reject.
int count_suspect_density_cells(const DensityField& f, double rho_m);

void write_density_csv(const DensityField& f, const std::filesystem::path& path);
DensityField read_density_csv(const std::filesystem::path& path);
void write_speed_csv(const SpeedField& f, const std::filesystem::path& path);
SpeedField read_speed_csv(const std::filesystem::path& path);

}  // namespace tse
