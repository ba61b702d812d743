#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tse/fd.hpp"
#include "tse/fields.hpp"
#include "tse/kernels.hpp"

namespace tse {

enum class SolverBC { Periodic, InflowOutflow };

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Lax-Friedrichs reference solver for the local and nonlocal conservation
// laws. The state lives on the x-cells of `grid`; the output is sampled at
// the grid's time-bin centers. Sub-stepping keeps every internal step within
// the CFL bound cfl * dx / v_f.
struct SolverConfig {
  Grid grid;
  FDParams fd{54.30, 0.11};
  std::optional<KernelSpec> kernel;  // absent: local Greenshields flux
  Quadrature quad{};
  SolverBC bc = SolverBC::Periodic;
  std::function<double(double)> rho_in;  // inflow density, InflowOutflow only
  double cfl = 0.9;
  long max_substeps_per_column = 2'000'000;
};

DensityField solve(const std::vector<double>& ic, const SolverConfig& cfg);

struct Benchmark {
  std::vector<double> ic;
  DensityField truth;
};

// Deterministic ground-truth scenarios: "riemann" (inflow-outflow),
// "gaussian-jam" and "two-wave" (periodic). The scenario overrides cfg.bc.
Benchmark make_benchmark(const std::string& name, SolverConfig cfg);

}  // namespace tse
