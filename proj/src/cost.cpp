#include "tse/cost.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tse {

ad::FieldProbe<ad::Var> FieldProgram::at(const ad::Var& x, const ad::Var& t) const {
  const auto p =
      net_->eval_probe<ad::Var>(std::span<const ad::Var>(params_), x, t);
  if (!std::isfinite(p.rho.value()) || !std::isfinite(p.rho_x.value()) ||
      !std::isfinite(p.rho_t.value()))
    throw std::runtime_error("FieldProgram: non-finite probe at (x=" +
                             std::to_string(x.value()) +
                             ", t=" + std::to_string(t.value()) + ")");
  return p;
}

ParamGradient cost_gradient(const FieldNet& net, const CostFunctional& cost,
                            double* value_out) {
  ad::Tape tape;
  FieldProgram program(net, tape);
  const ad::Var j = cost(program);
  if (!std::isfinite(j.value()))
    throw std::runtime_error("cost_gradient: cost evaluated non-finite");
  if (value_out) *value_out = j.value();

  ParamGradient g;
  g.values.assign(net.param_count(), 0.0);
  if (!j.tracked()) return g;  // constant cost, e.g. an empty point set

  const std::vector<double> adj = tape.gradient(j.index());
  const auto& leaves = program.params();
  for (std::size_t i = 0; i < leaves.size(); ++i)
    g.values[i] = adj[leaves[i].index()];
  return g;
}

}  // namespace tse
