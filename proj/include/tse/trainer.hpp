#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tse/cost.hpp"
#include "tse/fieldnet.hpp"
#include "tse/physics.hpp"

namespace tse {

struct Observation {
  double x, t, rho;
};

struct ObservationSet {
  std::vector<Observation> points;
  void validate(const Domain& dom) const;
};

struct CollocationPoint {
  double x, t;
};

struct CollocationSet {
  std::vector<CollocationPoint> points;
  void validate(const Domain& dom) const;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

enum class StopReason { MaxEpochs, Plateau, NonFiniteAbort };

struct TrainConfig {
  double mu = 0.5;  // J = mu J_DL + (1 - mu) J_PHY
  int max_epochs = 2000;
  AdamConfig adam;
  double tolerance = 1e-6;  // relative cost-plateau threshold
  int patience = 500;       // consecutive plateau epochs before stopping
  std::uint64_t seed = 0;   // recorded for provenance; sampling/init seed elsewhere
  ResidualKind residual_kind = ResidualKind::NonlocalTwoVar;
  KernelSpec kernel = KernelSpec::fixed(KernelFamily::Constant, 60.0);
  Quadrature quad{};
  BoundaryPolicy boundary = BoundaryPolicy::TruncateRenormalize;
  bool deterministic = true;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
};

struct TrainReport {
  // per logged epoch, index 0 holding the costs before the first step
  std::vector<double> J, J_DL, J_PHY;
  StopReason reason = StopReason::MaxEpochs;
  int epochs_run = 0;  // optimizer steps actually taken
  double wall_seconds = 0.0;
  int abort_epoch = -1;  // set on NonFiniteAbort
};

// Mean squared data mismatch over the observations.
double compute_J_DL(const FieldNet& net, const ObservationSet& obs);

// Mean squared residual of the configured form over the collocation points.
double compute_J_PHY(const FieldNet& net, const CollocationSet& coll,
                     const FDParams& fd, const TrainConfig& cfg);

// Full-batch Adam on J = mu J_DL + (1 - mu) J_PHY until max_epochs or a cost
// plateau. On a non-finite cost the net is restored to the last finite
// parameters and the report says so.
TrainReport train(FieldNet& net, const ObservationSet& obs,
                  const CollocationSet& coll, const FDParams& fd,
                  const TrainConfig& cfg);

// Tape-path functionals mirroring the costs above; the general (slow) route
// used as a cross-check oracle and for variable-length kernels.
CostFunctional make_jdl_functional(const ObservationSet& obs);
CostFunctional make_jphy_functional(const CollocationSet& coll, const FDParams& fd,
                                    const TrainConfig& cfg);

// One epoch's costs and unweighted gradients, exactly as the training loop
// computes them.
struct CostsAndGradients {
  double j_dl = 0.0;
  double j_phy = 0.0;
  std::vector<double> g_dl, g_phy;
};
CostsAndGradients evaluate_costs(const FieldNet& net, const ObservationSet& obs,
                                 const CollocationSet& coll, const FDParams& fd,
                                 const TrainConfig& cfg);

// rows: epoch,J,J_DL,J_PHY
void write_report_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace tse
