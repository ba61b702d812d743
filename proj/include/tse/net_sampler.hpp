#pragma once

#include "tse/fieldnet.hpp"
#include "tse/kernels.hpp"

namespace tse {

// DensitySampler backed by a FieldNet: the network's own domain bounds the
// look-ahead windows.
class FieldNetSampler final : public DensitySampler {
public:
  explicit FieldNetSampler(const FieldNet& net) : net_(&net) {}

  double rho(double x, double t) const override { return net_->forward(x, t); }
  double drho_dx(double x, double t) const override {
    return net_->probe(x, t).rho_x;
  }
  double drho_dt(double x, double t) const override {
    return net_->probe(x, t).rho_t;
  }
  ad::ProbeD probe(double x, double t) const override { return net_->probe(x, t); }
  double x_min() const override { return net_->domain().x_lo; }
  double x_max() const override { return net_->domain().x_hi; }

private:
  const FieldNet* net_;
};

// Lightweight adapter satisfying the templated sampler concept for double
// scalars.
struct NetProbeRef {
  const FieldNet* net;
  ad::ProbeD probe(double x, double t) const { return net->probe(x, t); }
};

// Network prediction sampled at every cell center.
inline DensityField evaluate_on_grid(const FieldNet& net, const Grid& g) {
  DensityField f = DensityField::zeros(g);
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.nt; ++j) f.at(i, j) = net.forward(g.x_center(i), g.t_center(j));
  return f;
}

}  // namespace tse
