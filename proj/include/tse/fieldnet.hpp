#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tse/dual.hpp"
#include "tse/grid.hpp"
#include "tse/rng.hpp"

namespace tse {

namespace detail {
template <class S>
struct scalar_base {
  using type = S;
};
template <class T>
struct scalar_base<ad::Dual2<T>> {
  using type = T;
};
template <class S>
using scalar_base_t = typename scalar_base<S>::type;
}  // namespace detail

// Rectangle the network inputs are normalized over.
struct Domain {
  double x_lo = 0.0, x_hi = 1.0, t_lo = 0.0, t_hi = 1.0;

  static Domain of(const Grid& g) {
    return {g.x0, g.x_end(), g.t0, g.t_end()};
  }
};

// Gradient with the same flat layout as the network parameters.
struct ParamGradient {
  std::vector<double> values;
};

// Fully connected tanh network mapping (x, t) to a density in (0, rho_m).
// Inputs are affinely normalized into [0,1]^2; the output head is a logistic
// scaled by the jam density. Evaluation is templated over the scalar type so
// the same code serves plain prediction, forward-mode input derivatives, and
// tape-recorded evaluation for parameter gradients.
class FieldNet {
public:
  static constexpr int kMaxWidth = 64;

  static FieldNet make(std::vector<int> layer_sizes, const Domain& dom,
                       double rho_m, std::uint64_t seed);

  // hidden_layers copies of hidden_width between the fixed 2-in/1-out ends
  static FieldNet make_mlp(int hidden_layers, int hidden_width, const Domain& dom,
                           double rho_m, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& params() { return params_; }
  std::size_t param_count() const { return params_.size(); }
  const Domain& domain() const { return dom_; }
  double rho_m() const { return rho_m_; }
  int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
  std::size_t weight_offset(int layer) const { return w_off_[layer]; }
  std::size_t bias_offset(int layer) const { return b_off_[layer]; }

  // rho_hat(x, t)
  double forward(double x, double t) const;

  struct InputGrads {
    double drho_dx;
    double drho_dt;
  };
  // Exact derivatives of the forward map (forward-mode), not finite differences.
  InputGrads input_gradients(double x, double t) const;

  // Value and both input derivatives in one pass.
  ad::ProbeD probe(double x, double t) const;

  // Generic evaluation: S is double, Var, or a Dual2 of either; P is the
  // matching base scalar supplying the parameters.
  template <class S>
  S eval_on(std::span<const detail::scalar_base_t<S>> params, S x, S t) const;

  template <class S>
  ad::FieldProbe<S> eval_probe(std::span<const S> params, const S& x,
                               const S& t) const;

  void save_checkpoint(const std::filesystem::path& path) const;
  static FieldNet load_checkpoint(const std::filesystem::path& path);

private:
  std::vector<int> sizes_;
  std::vector<double> params_;
  std::vector<std::size_t> w_off_, b_off_;
  Domain dom_;
  double rho_m_ = 0.11;

  void build_offsets();
};

// Keeps the output strictly inside (0, rho_m) even when the logistic
// saturates to 0 or 1 in floating point. Clamped values are treated as
// constants, so derivatives vanish there consistently across all paths.
template <class S>
void clamp_density(S& rho, double rho_m) {
  const double v = ad::value_of(rho);
  if (v <= 0.0) rho = S(rho_m * 1e-300);
  else if (v >= rho_m) rho = S(std::nextafter(rho_m, 0.0));
}

template <class S>
S FieldNet::eval_on(std::span<const detail::scalar_base_t<S>> params, S x,
                    S t) const {
  if (!std::isfinite(ad::value_of(x)) || !std::isfinite(ad::value_of(t)))
    throw std::invalid_argument("FieldNet: non-finite input");
  using ad::sigmoid;
  using ad::tanh;
  using std::tanh;

  S a[kMaxWidth], z[kMaxWidth];
  a[0] = (x - S(dom_.x_lo)) * S(1.0 / (dom_.x_hi - dom_.x_lo));
  a[1] = (t - S(dom_.t_lo)) * S(1.0 / (dom_.t_hi - dom_.t_lo));

  const int layers = layer_count();
  int in = sizes_[0];
  for (int l = 0; l < layers; ++l) {
    const int out = sizes_[l + 1];
    const auto* wrow = params.data() + w_off_[l];
    const auto* bias = params.data() + b_off_[l];
    for (int i = 0; i < out; ++i, wrow += in) {
      S acc = S(bias[i]);
      for (int j = 0; j < in; ++j) acc = acc + wrow[j] * a[j];
      z[i] = acc;
    }
    if (l + 1 < layers) {
      for (int i = 0; i < out; ++i) a[i] = tanh(z[i]);
      in = out;
    }
  }
  S rho = S(rho_m_) * sigmoid(z[0]);
  clamp_density(rho, rho_m_);
  return rho;
}

template <class S>
ad::FieldProbe<S> FieldNet::eval_probe(std::span<const S> params, const S& x,
                                       const S& t) const {
  const ad::Dual2<S> out = eval_on<ad::Dual2<S>>(
      params, ad::Dual2<S>(x, S(1.0), S(0.0)), ad::Dual2<S>(t, S(0.0), S(1.0)));
  return {out.v, out.dx, out.dt};
}

// Caches one forward pass (values + both tangent streams) and replays it
// backwards, accumulating d(cost)/d(params) from adjoint seeds on the probe
// outputs. This is the nested-differentiation hot path the trainer uses;
// the tape-based cost_gradient is the general (and much slower) route.
class NetWorkspace {
public:
  void bind(const FieldNet& net);

  // forward at (x, t); with_tangents=false skips the derivative streams
  ad::ProbeD forward(double x, double t, bool with_tangents = true);

  // seeds are d(cost)/d(rho), d(cost)/d(rho_x), d(cost)/d(rho_t)
  void backward(double w_rho, double w_rho_x, double w_rho_t,
                std::span<double> grad_acc);

private:
  const FieldNet* net_ = nullptr;
  int layers_ = 0;
  std::vector<int> width_;
  std::vector<std::size_t> off_;  // per-layer offsets into the state buffers
  // per hidden layer: post-activation a, s = 1 - a^2, pre-activation tangents
  // tzx/tzt, post-activation tangents tax/tat
  std::vector<double> a_, s_, tzx_, tzt_, tax_, tat_;
  // scratch adjoints (two ping-pong buffers)
  std::vector<double> adj_a_, adj_tax_, adj_tat_, adj_z_, adj_tzx_, adj_tzt_;
  double in_[2] = {0, 0};
  double seed_x_ = 0, seed_t_ = 0;  // d(normalized input)/d(physical input)
  double sig_ = 0, tzox_ = 0, tzot_ = 0;
  bool tangents_ = false, clamped_ = false;
};

}  // namespace tse
