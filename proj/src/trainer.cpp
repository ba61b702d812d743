#include "tse/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <thread>

#include "tse/net_sampler.hpp"

namespace tse {

void ObservationSet::validate(const Domain& dom) const {
  if (points.empty())
    throw std::invalid_argument("ObservationSet: need at least one observation");
  for (const auto& p : points) {
    if (!std::isfinite(p.rho) || p.rho < 0.0)
      throw std::invalid_argument("ObservationSet: densities must be finite and >= 0");
    if (p.x < dom.x_lo || p.x > dom.x_hi || p.t < dom.t_lo || p.t > dom.t_hi)
      throw std::invalid_argument("ObservationSet: point outside the domain");
  }
}

void CollocationSet::validate(const Domain& dom) const {
  if (points.empty())
    throw std::invalid_argument("CollocationSet: need at least one point");
  for (const auto& p : points)
    if (p.x < dom.x_lo || p.x > dom.x_hi || p.t < dom.t_lo || p.t > dom.t_hi)
      throw std::invalid_argument("CollocationSet: point outside the domain");
}

void TrainConfig::validate() const {
  if (!(mu >= 0.0 && mu <= 1.0))
    throw std::invalid_argument("TrainConfig: mu must lie in [0, 1]");
  if (max_epochs < 1 || adam.lr <= 0.0)
    throw std::invalid_argument("TrainConfig: epochs and learning rate must be positive");
  if (patience < 1 || tolerance < 0.0)
    throw std::invalid_argument("TrainConfig: bad plateau rule");
  kernel.check();
}

double compute_J_DL(const FieldNet& net, const ObservationSet& obs) {
  if (obs.points.empty())
    throw std::invalid_argument("compute_J_DL: empty observation set");
  double sum = 0.0;
  for (const auto& o : obs.points) {
    const double e = net.forward(o.x, o.t) - o.rho;
    sum += e * e;
  }
  return sum / static_cast<double>(obs.points.size());
}

double compute_J_PHY(const FieldNet& net, const CollocationSet& coll,
                     const FDParams& fd, const TrainConfig& cfg) {
  if (coll.points.empty())
    throw std::invalid_argument("compute_J_PHY: empty collocation set");
  const NetProbeRef sampler{&net};
  const double x_hi = net.domain().x_hi;
  double sum = 0.0;
  for (const auto& c : coll.points) {
    const double r = detail::residual_impl<double>(
        cfg.residual_kind, sampler, c.x, c.t, fd, cfg.kernel, cfg.quad,
        cfg.boundary, x_hi);
    sum += r * r;
  }
  return sum / static_cast<double>(coll.points.size());
}

CostFunctional make_jdl_functional(const ObservationSet& obs) {
  return [obs](FieldProgram& p) -> ad::Var {
    ad::Var sum(0.0);
    for (const auto& o : obs.points) {
      const ad::Var e = p.at(o.x, o.t).rho - ad::Var(o.rho);
      sum = sum + e * e;
    }
    return sum / ad::Var(static_cast<double>(obs.points.size()));
  };
}

CostFunctional make_jphy_functional(const CollocationSet& coll, const FDParams& fd,
                                    const TrainConfig& cfg) {
  return [coll, fd, cfg](FieldProgram& p) -> ad::Var {
    const ProgramSampler sampler{&p};
    const double x_hi = p.net().domain().x_hi;
    ad::Var sum(0.0);
    for (const auto& c : coll.points) {
      const ad::Var r = detail::residual_impl<ad::Var>(
          cfg.residual_kind, sampler, ad::Var(c.x), ad::Var(c.t), fd, cfg.kernel,
          cfg.quad, cfg.boundary, x_hi);
      sum = sum + r * r;
    }
    return sum / ad::Var(static_cast<double>(coll.points.size()));
  };
}

namespace {

constexpr int kCollBlock = 64;
constexpr int kObsBlock = 256;

// Precomputed quadrature layout for one collocation point. Node 0 sits at the
// point itself; nonlocal kinds append the look-ahead nodes. Fixed-length
// windows never depend on the parameters, so this is epoch-invariant.
struct PointPlan {
  double x, t;
  int n_nodes;        // 1 for local / delta-degenerate
  std::size_t base;   // offset into the shared tau/weight pools
};

struct EpochResult {
  double j_dl = 0.0;
  double j_phy = 0.0;
  bool finite = true;
};

class FastEvaluator {
public:
  FastEvaluator(const FieldNet& net, const ObservationSet& obs,
                const CollocationSet& coll, const FDParams& fd,
                const TrainConfig& cfg)
      : net_(&net), obs_(&obs), coll_(&coll), fd_(fd), cfg_(cfg) {
    build_plans();
    const std::size_t n_coll_blocks =
        (coll.points.size() + kCollBlock - 1) / kCollBlock;
    const std::size_t n_obs_blocks =
        (obs.points.size() + kObsBlock - 1) / kObsBlock;
    block_grad_.assign(n_coll_blocks + n_obs_blocks,
                       std::vector<double>(net.param_count(), 0.0));
    block_j_.assign(n_coll_blocks + n_obs_blocks, 0.0);
    n_coll_blocks_ = n_coll_blocks;
  }

  EpochResult run(std::vector<double>& g_dl, std::vector<double>& g_phy,
                  bool need_dl_grad, bool need_phy_grad);

private:
  void build_plans();
  void process_coll_block(std::size_t b, std::vector<NetWorkspace>& pool,
                          bool need_grad);
  void process_obs_block(std::size_t b, NetWorkspace& ws, bool need_grad);

  const FieldNet* net_;
  const ObservationSet* obs_;
  const CollocationSet* coll_;
  FDParams fd_;
  TrainConfig cfg_;

  std::vector<PointPlan> plans_;
  std::vector<double> tau_, weight_;  // pooled node offsets and quadrature weights
  int max_nodes_ = 1;

  std::vector<std::vector<double>> block_grad_;
  std::vector<double> block_j_;
  std::size_t n_coll_blocks_ = 0;
};

void FastEvaluator::build_plans() {
  const double x_hi = net_->domain().x_hi;
  const bool local = cfg_.residual_kind == ResidualKind::LocalLWR;
  plans_.reserve(coll_->points.size());
  for (const auto& c : coll_->points) {
    PointPlan plan;
    plan.x = c.x;
    plan.t = c.t;
    plan.base = tau_.size();
    plan.n_nodes = 1;
    if (!local) {
      const double w = detail::resolve_fixed_window(cfg_.kernel.window, c.x, x_hi,
                                                    cfg_.boundary);
      if (w >= kDeltaWindow) {
        const int n = cfg_.quad.n_points;
        const double h = w / (n - 1);
        plan.n_nodes = n;
        for (int j = 0; j < n; ++j) {
          const double tau = j * h;
          const double tw = (j == 0 || j == n - 1) ? 0.5 * h : h;
          tau_.push_back(tau);
          weight_.push_back(tw * detail_weight(cfg_.kernel.family, w, tau));
        }
      }
    }
    max_nodes_ = std::max(max_nodes_, plan.n_nodes);
    plans_.push_back(plan);
  }
}

void FastEvaluator::process_coll_block(std::size_t b,
                                       std::vector<NetWorkspace>& pool,
                                       bool need_grad) {
  const std::size_t lo = b * kCollBlock;
  const std::size_t hi = std::min(lo + kCollBlock, coll_->points.size());
  std::vector<double>& grad = block_grad_[b];
  if (need_grad) std::fill(grad.begin(), grad.end(), 0.0);

  const double v_f = fd_.v_f;
  const double inv_rho_m = 1.0 / fd_.rho_m;
  const double vf_over_rhom = fd_.v_f / fd_.rho_m;
  const double two_over_rhom = 2.0 / fd_.rho_m;
  const double n_inv = 1.0 / static_cast<double>(coll_->points.size());
  const bool integro = cfg_.residual_kind == ResidualKind::NonlocalIntegro;

  double j_sum = 0.0;
  std::vector<ad::ProbeD> probes(max_nodes_);

  for (std::size_t k = lo; k < hi; ++k) {
    const PointPlan& plan = plans_[k];
    const int n = plan.n_nodes;
    for (int j = 0; j < n; ++j)
      probes[j] = pool[j].forward(plan.x + (j == 0 ? 0.0 : tau_[plan.base + j]),
                                  plan.t, true);
    const ad::ProbeD c = probes[0];

    double r;
    double A = 0.0, B = 0.0, M = 0.0;
    if (n == 1) {
      if (cfg_.residual_kind == ResidualKind::LocalLWR) {
        r = v_f * (1.0 - two_over_rhom * c.rho) * c.rho_x + c.rho_t;
      } else {
        // delta window: rho_n collapses onto the local value
        r = c.rho_t + v_f * (1.0 - c.rho * inv_rho_m) * c.rho_x -
            c.rho * vf_over_rhom * c.rho_x;
      }
    } else if (integro) {
      // mirrors the integro form's accumulation order exactly
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        const double wq = weight_[plan.base + j];
        acc += wq * (c.rho_x -
                     inv_rho_m * (c.rho * probes[j].rho_x + c.rho_x * probes[j].rho));
        A += wq * probes[j].rho;
        B += wq * probes[j].rho_x;
        M += wq;
      }
      r = c.rho_t + v_f * acc;
    } else {
      for (int j = 0; j < n; ++j) {
        const double wq = weight_[plan.base + j];
        A = A + wq * probes[j].rho;
        B = B + wq * probes[j].rho_x;
      }
      r = c.rho_t + v_f * (1.0 - A * inv_rho_m) * c.rho_x -
          c.rho * vf_over_rhom * B;
    }
    j_sum += r * r;

    if (!need_grad) continue;
    const double s = 2.0 * r * n_inv;  // d(J_PHY)/dr

    if (n == 1) {
      double w_rho, w_rho_x;
      if (cfg_.residual_kind == ResidualKind::LocalLWR) {
        w_rho = s * (-v_f * two_over_rhom * c.rho_x);
        w_rho_x = s * (v_f * (1.0 - two_over_rhom * c.rho));
      } else {
        w_rho = s * (-2.0 * vf_over_rhom * c.rho_x);
        w_rho_x = s * (v_f * (1.0 - 2.0 * c.rho * inv_rho_m));
      }
      pool[0].backward(w_rho, w_rho_x, s, grad);
      continue;
    }

    // center-point seeds
    const double rx_factor =
        integro ? s * v_f * (M - A * inv_rho_m) : s * v_f * (1.0 - A * inv_rho_m);
    pool[0].backward(s * (-vf_over_rhom * B), rx_factor, s, grad);
    // look-ahead node seeds (node 0 carries both roles)
    for (int j = 0; j < n; ++j) {
      const double wq = weight_[plan.base + j];
      pool[j].backward(s * (-vf_over_rhom * c.rho_x) * wq,
                       s * (-vf_over_rhom * c.rho) * wq, 0.0, grad);
    }
  }
  block_j_[b] = j_sum;
}

void FastEvaluator::process_obs_block(std::size_t b, NetWorkspace& ws,
                                      bool need_grad) {
  const std::size_t ob = b - n_coll_blocks_;
  const std::size_t lo = ob * kObsBlock;
  const std::size_t hi = std::min(lo + kObsBlock, obs_->points.size());
  std::vector<double>& grad = block_grad_[b];
  if (need_grad) std::fill(grad.begin(), grad.end(), 0.0);

  const double n_inv = 1.0 / static_cast<double>(obs_->points.size());
  double j_sum = 0.0;
  for (std::size_t k = lo; k < hi; ++k) {
    const Observation& o = obs_->points[k];
    const ad::ProbeD p = ws.forward(o.x, o.t, false);
    const double e = p.rho - o.rho;
    j_sum += e * e;
    if (need_grad) ws.backward(2.0 * e * n_inv, 0.0, 0.0, grad);
  }
  block_j_[b] = j_sum;
}

EpochResult FastEvaluator::run(std::vector<double>& g_dl, std::vector<double>& g_phy,
                               bool need_dl_grad, bool need_phy_grad) {
  const std::size_t n_blocks = block_grad_.size();
  std::atomic<std::size_t> next{0};

  int threads = cfg_.threads > 0
                    ? cfg_.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, 64);

  auto worker = [&]() {
    std::vector<NetWorkspace> pool(max_nodes_);
    for (auto& ws : pool) ws.bind(*net_);
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_blocks) break;
      if (b < n_coll_blocks_)
        process_coll_block(b, pool, need_phy_grad);
      else
        process_obs_block(b, pool[0], need_dl_grad);
    }
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> ts;
    ts.reserve(threads);
    for (int i = 0; i < threads; ++i) ts.emplace_back(worker);
    for (auto& t : ts) t.join();
  }

  // ordered reduction: identical bytes for any thread count
  EpochResult res;
  double phy_sum = 0.0, dl_sum = 0.0;
  for (std::size_t b = 0; b < n_coll_blocks_; ++b) phy_sum += block_j_[b];
  for (std::size_t b = n_coll_blocks_; b < n_blocks; ++b) dl_sum += block_j_[b];
  res.j_phy = phy_sum / static_cast<double>(coll_->points.size());
  res.j_dl = dl_sum / static_cast<double>(obs_->points.size());

  if (need_phy_grad) {
    std::fill(g_phy.begin(), g_phy.end(), 0.0);
    for (std::size_t b = 0; b < n_coll_blocks_; ++b)
      for (std::size_t i = 0; i < g_phy.size(); ++i) g_phy[i] += block_grad_[b][i];
  }
  if (need_dl_grad) {
    std::fill(g_dl.begin(), g_dl.end(), 0.0);
    for (std::size_t b = n_coll_blocks_; b < n_blocks; ++b)
      for (std::size_t i = 0; i < g_dl.size(); ++i) g_dl[i] += block_grad_[b][i];
  }

  res.finite = std::isfinite(res.j_dl) && std::isfinite(res.j_phy);
  return res;
}

// Variable-length kernels route through the tape: window lengths depend on
// the predicted density, so quadrature positions move with the parameters.
// One tape per collocation point keeps memory bounded.
class TapeEvaluator {
public:
  TapeEvaluator(const FieldNet& net, const ObservationSet& obs,
                const CollocationSet& coll, const FDParams& fd,
                const TrainConfig& cfg)
      : net_(&net), obs_(&obs), coll_(&coll), fd_(fd), cfg_(cfg) {}

  EpochResult run(std::vector<double>& g_dl, std::vector<double>& g_phy,
                  bool need_dl_grad, bool need_phy_grad) {
    EpochResult res;
    const double x_hi = net_->domain().x_hi;
    std::fill(g_dl.begin(), g_dl.end(), 0.0);
    std::fill(g_phy.begin(), g_phy.end(), 0.0);

    const double n_phy_inv = 1.0 / static_cast<double>(coll_->points.size());
    double phy_sum = 0.0;
    ad::Tape tape;
    for (const auto& c : coll_->points) {
      tape.clear();
      FieldProgram program(*net_, tape);
      const ProgramSampler sampler{&program};
      const ad::Var r = detail::residual_impl<ad::Var>(
          cfg_.residual_kind, sampler, ad::Var(c.x), ad::Var(c.t), fd_,
          cfg_.kernel, cfg_.quad, cfg_.boundary, x_hi);
      phy_sum += r.value() * r.value();
      if (need_phy_grad && r.tracked()) {
        const auto adj = tape.gradient(r.index());
        const double scale = 2.0 * r.value() * n_phy_inv;
        const auto& leaves = program.params();
        for (std::size_t i = 0; i < leaves.size(); ++i)
          g_phy[i] += scale * adj[leaves[i].index()];
      }
    }
    res.j_phy = phy_sum * n_phy_inv;

    const double n_dl_inv = 1.0 / static_cast<double>(obs_->points.size());
    double dl_sum = 0.0;
    for (const auto& o : obs_->points) {
      tape.clear();
      FieldProgram program(*net_, tape);
      const ad::Var e = program.at(o.x, o.t).rho - ad::Var(o.rho);
      dl_sum += e.value() * e.value();
      if (need_dl_grad && e.tracked()) {
        const auto adj = tape.gradient(e.index());
        const double scale = 2.0 * e.value() * n_dl_inv;
        const auto& leaves = program.params();
        for (std::size_t i = 0; i < leaves.size(); ++i)
          g_dl[i] += scale * adj[leaves[i].index()];
      }
    }
    res.j_dl = dl_sum * n_dl_inv;

    res.finite = std::isfinite(res.j_dl) && std::isfinite(res.j_phy);
    return res;
  }

private:
  const FieldNet* net_;
  const ObservationSet* obs_;
  const CollocationSet* coll_;
  FDParams fd_;
  TrainConfig cfg_;
};

struct AdamState {
  std::vector<double> m, v;
  double b1t = 1.0, b2t = 1.0;
};

void adam_step(std::vector<double>& theta, const std::vector<double>& g,
               AdamState& st, const AdamConfig& cfg) {
  st.b1t *= cfg.beta1;
  st.b2t *= cfg.beta2;
  const double c1 = 1.0 / (1.0 - st.b1t);
  const double c2 = 1.0 / (1.0 - st.b2t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = st.m[i] * c1;
    const double vhat = st.v[i] * c2;
    theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace

CostsAndGradients evaluate_costs(const FieldNet& net, const ObservationSet& obs,
                                 const CollocationSet& coll, const FDParams& fd,
                                 const TrainConfig& cfg) {
  cfg.validate();
  obs.validate(net.domain());
  coll.validate(net.domain());
  CostsAndGradients out;
  out.g_dl.assign(net.param_count(), 0.0);
  out.g_phy.assign(net.param_count(), 0.0);
  const bool use_tape = cfg.kernel.mode == WindowMode::VariableLength &&
                        cfg.residual_kind != ResidualKind::LocalLWR;
  EpochResult r;
  if (use_tape) {
    TapeEvaluator ev(net, obs, coll, fd, cfg);
    r = ev.run(out.g_dl, out.g_phy, true, true);
  } else {
    FastEvaluator ev(net, obs, coll, fd, cfg);
    r = ev.run(out.g_dl, out.g_phy, true, true);
  }
  out.j_dl = r.j_dl;
  out.j_phy = r.j_phy;
  return out;
}

TrainReport train(FieldNet& net, const ObservationSet& obs,
                  const CollocationSet& coll, const FDParams& fd,
                  const TrainConfig& cfg) {
  cfg.validate();
  obs.validate(net.domain());
  coll.validate(net.domain());

  const auto t_start = std::chrono::steady_clock::now();
  const std::size_t np = net.param_count();
  std::vector<double> g_dl(np, 0.0), g_phy(np, 0.0), g(np, 0.0);
  std::vector<double> snapshot = net.params();

  // variable-length windows move with the predicted density, which only the
  // tape path differentiates; everything else takes the fast path
  const bool use_tape = cfg.kernel.mode == WindowMode::VariableLength &&
                        cfg.residual_kind != ResidualKind::LocalLWR;
  // plan construction may throw ThickBoundaryError for points violating the
  // window policy
  std::unique_ptr<FastEvaluator> fast;
  std::unique_ptr<TapeEvaluator> slow;
  if (use_tape)
    slow = std::make_unique<TapeEvaluator>(net, obs, coll, fd, cfg);
  else
    fast = std::make_unique<FastEvaluator>(net, obs, coll, fd, cfg);

  const bool need_dl_grad = cfg.mu > 0.0;
  const bool need_phy_grad = cfg.mu < 1.0;

  TrainReport report;
  report.reason = StopReason::MaxEpochs;
  AdamState adam;
  adam.m.assign(np, 0.0);
  adam.v.assign(np, 0.0);
  int plateau_streak = 0;
  double prev_j = 0.0;

  for (int epoch = 0;; ++epoch) {
    const EpochResult r = fast ? fast->run(g_dl, g_phy, need_dl_grad, need_phy_grad)
                               : slow->run(g_dl, g_phy, need_dl_grad, need_phy_grad);
    if (!r.finite) {
      net.params() = snapshot;  // last finite parameters
      report.reason = StopReason::NonFiniteAbort;
      report.abort_epoch = epoch;
      break;
    }
    const double j = cfg.mu * r.j_dl + (1.0 - cfg.mu) * r.j_phy;
    report.J.push_back(j);
    report.J_DL.push_back(r.j_dl);
    report.J_PHY.push_back(r.j_phy);

    if (epoch > 0) {
      if (std::abs(j - prev_j) < cfg.tolerance * std::abs(prev_j))
        ++plateau_streak;
      else
        plateau_streak = 0;
      if (plateau_streak >= cfg.patience) {
        report.reason = StopReason::Plateau;
        break;
      }
    }
    prev_j = j;
    if (epoch == cfg.max_epochs) break;

    // zero-weight terms are skipped outright so e.g. mu = 1 reproduces pure
    // supervised training bit for bit
    if (need_dl_grad && need_phy_grad) {
      for (std::size_t i = 0; i < np; ++i)
        g[i] = cfg.mu * g_dl[i] + (1.0 - cfg.mu) * g_phy[i];
    } else if (need_dl_grad) {
      for (std::size_t i = 0; i < np; ++i) g[i] = cfg.mu * g_dl[i];
    } else {
      for (std::size_t i = 0; i < np; ++i) g[i] = (1.0 - cfg.mu) * g_phy[i];
    }

    snapshot = net.params();
    adam_step(net.params(), g, adam, cfg.adam);
    ++report.epochs_run;
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "epoch,J,J_DL,J_PHY\n";
  char buf[160];
  for (std::size_t e = 0; e < report.J.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e, report.J[e],
                  report.J_DL[e], report.J_PHY[e]);
    os << buf;
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace tse
