#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tse/fd.hpp"
#include "tse/fields.hpp"
#include "tse/trainer.hpp"

namespace tse {

struct TrajectoryRecord {
  long vehicle_id = 0;
  double time = 0.0;      // s
  double position = 0.0;  // ft along the segment
  std::optional<double> speed;  // ft/s, informational
  std::optional<int> lane;      // metadata only; densities are lane-aggregated
};

struct TrajectoryTable {
  std::vector<TrajectoryRecord> records;
  // time must be strictly increasing per vehicle
  void validate() const;
};

struct ParseError : std::runtime_error {
  long line;
  ParseError(const std::string& msg, long line_)
      : std::runtime_error(msg + " (line " + std::to_string(line_) + ")"),
        line(line_) {}
};

// header: vehicle_id,time_s,position_ft[,speed_fps][,lane]
TrajectoryTable read_trajectory_csv(const std::filesystem::path& path);

struct SpillRecord {
  long vehicle_id;
  double time, position;
  std::string reason;
};

struct SpillReport {
  std::vector<SpillRecord> records;
  double spilled_vehicle_seconds = 0.0;
  void write_jsonl(const std::filesystem::path& path) const;
};

struct BinResult {
  DensityField density;
  SpeedField speed;
  SpillReport spill;
};

// Edie's generalized definitions: density is occupancy time over bin area,
// speed is distance over occupancy time, lane-aggregated.
BinResult bin_trajectories(const TrajectoryTable& traj, const Grid& grid);

struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordinary least squares of v on rho: intercept is v_f, jam density is where
// the fitted line hits zero speed. Rejects degenerate spreads and
// non-negative slopes.
FDParams estimate_fd_params(const DensityField& density, const SpeedField& speed);

struct SamplingPlan {
  int n_obs = 1000;
  int n_coll = 5000;
  std::uint64_t seed = 0;
  enum class Strategy { UniformRandom, LatinHypercube };
  Strategy strategy = Strategy::LatinHypercube;  // collocation draw
};

// Observations sit at distinct cell centers carrying the binned density;
// collocation points are drawn continuously over the domain.
std::pair<ObservationSet, CollocationSet> sample_points(const DensityField& field,
                                                        const SamplingPlan& plan);

// 100 * ||est - truth||_2 / ||truth||_2 over all cells
double relative_l2_error(const DensityField& est, const DensityField& truth);

}  // namespace tse
