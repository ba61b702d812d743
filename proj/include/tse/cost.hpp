#pragma once

#include <functional>
#include <span>

#include "tse/ad.hpp"
#include "tse/fieldnet.hpp"

namespace tse {

// Records network evaluations of one cost expression on a tape. Every probe
// runs the forward-mode tangent program in tape scalars, so a reverse sweep
// of the final cost differentiates through the input derivatives as well
// (including probes whose positions themselves depend on parameters).
class FieldProgram {
public:
  FieldProgram(const FieldNet& net, ad::Tape& tape) : net_(&net), tape_(&tape) {
    params_.reserve(net.param_count());
    for (double p : net.params()) params_.emplace_back(tape, p);
  }

  ad::FieldProbe<ad::Var> at(const ad::Var& x, const ad::Var& t) const;
  ad::FieldProbe<ad::Var> at(double x, double t) const {
    return at(ad::Var(x), ad::Var(t));
  }

  const std::vector<ad::Var>& params() const { return params_; }
  ad::Tape& tape() const { return *tape_; }
  const FieldNet& net() const { return *net_; }

private:
  const FieldNet* net_;
  ad::Tape* tape_;
  std::vector<ad::Var> params_;
};

// Scalar functional assembled from probes of the program.
using CostFunctional = std::function<ad::Var(FieldProgram&)>;

// Adapts a FieldProgram to the templated sampler concept with Var scalars,
// so kernel and residual formulas run unchanged on the tape.
struct ProgramSampler {
  const FieldProgram* program;
  ad::FieldProbe<ad::Var> probe(const ad::Var& x, const ad::Var& t) const {
    return program->at(x, t);
  }
};

// Gradient of an arbitrary probe-built cost with respect to all parameters.
// General but tape-bound: intended for oracles, small costs, and residual
// forms without a hand-derived reverse pass.
ParamGradient cost_gradient(const FieldNet& net, const CostFunctional& cost,
                            double* value_out = nullptr);

}  // namespace tse
