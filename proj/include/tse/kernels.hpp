#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "tse/dual.hpp"
#include "tse/fd.hpp"
#include "tse/fields.hpp"

namespace tse {

enum class KernelFamily { Constant, LinearDecreasing };
enum class WindowMode { FixedLength, VariableLength };

// Declarative look-ahead kernel description. `window` is the fixed window w
// or, in variable-length mode, the maximum window w0.
struct KernelSpec {
  KernelFamily family = KernelFamily::Constant;
  WindowMode mode = WindowMode::FixedLength;
  double window = 60.0;

  static KernelSpec fixed(KernelFamily f, double w) {
    KernelSpec s{f, WindowMode::FixedLength, w};
    s.check();
    return s;
  }
  static KernelSpec variable(KernelFamily f, double w0) {
    KernelSpec s{f, WindowMode::VariableLength, w0};
    s.check();
    return s;
  }
  void check() const {
    if (!std::isfinite(window) || window <= 0.0)
      throw std::invalid_argument("KernelSpec: window must be finite and > 0");
  }
};

// Composite trapezoid rule over the kernel support.
struct Quadrature {
  int n_points = 33;

  Quadrature() = default;
  explicit Quadrature(int n) : n_points(n) {
    if (n < 3) throw std::invalid_argument("Quadrature: need at least 3 points");
  }
};

enum class BoundaryPolicy { Error, TruncateRenormalize };

// Raised when a fixed-length window would need data past the segment end and
// truncation was not enabled.
struct ThickBoundaryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Windows shorter than this collapse to the delta kernel: the nonlocal density
// degenerates to the local value.
inline constexpr double kDeltaWindow = 1e-9;

// Continuous-coordinate view of a density field, with first derivatives.
class DensitySampler {
public:
  virtual ~DensitySampler() = default;
  virtual double rho(double x, double t) const = 0;
  virtual double drho_dx(double x, double t) const = 0;
  virtual double drho_dt(double x, double t) const = 0;
  virtual double x_min() const = 0;
  virtual double x_max() const = 0;

  virtual ad::ProbeD probe(double x, double t) const {
    return {rho(x, t), drho_dx(x, t), drho_dt(x, t)};
  }
};

// Bilinear interpolation between cell centers, linearly extrapolated in the
// half-cell margins.
class BilinearSampler final : public DensitySampler {
public:
  explicit BilinearSampler(const DensityField& f) : f_(&f) {}

  double rho(double x, double t) const override { return interp(x, t).rho; }
  double drho_dx(double x, double t) const override { return interp(x, t).rho_x; }
  double drho_dt(double x, double t) const override { return interp(x, t).rho_t; }
  double x_min() const override { return f_->grid.x0; }
  double x_max() const override { return f_->grid.x_end(); }

  ad::ProbeD probe(double x, double t) const override { return interp(x, t); }

  ad::ProbeD interp(double x, double t) const {
    const Grid& g = f_->grid;
    const double u = (x - g.x_center(0)) / g.dx;
    const double v = (t - g.t_center(0)) / g.dt;
    const int i = std::clamp(static_cast<int>(std::floor(u)), 0, g.nx - 2);
    const int j = std::clamp(static_cast<int>(std::floor(v)), 0, g.nt - 2);
    const double a = u - i;
    const double b = v - j;
    const double f00 = f_->at(i, j), f10 = f_->at(i + 1, j);
    const double f01 = f_->at(i, j + 1), f11 = f_->at(i + 1, j + 1);
    ad::ProbeD p;
    p.rho = (1 - a) * ((1 - b) * f00 + b * f01) + a * ((1 - b) * f10 + b * f11);
    p.rho_x = ((1 - b) * (f10 - f00) + b * (f11 - f01)) / g.dx;
    p.rho_t = ((1 - a) * (f01 - f00) + a * (f11 - f10)) / g.dt;
    return p;
  }

private:
  const DensityField* f_;
};

// Closed-form field for tests and synthetic scenarios.
class FunctionSampler final : public DensitySampler {
public:
  using Fn = std::function<double(double, double)>;
  FunctionSampler(Fn rho, Fn rho_x, Fn rho_t, double x_lo, double x_hi)
      : rho_(std::move(rho)),
        rho_x_(std::move(rho_x)),
        rho_t_(std::move(rho_t)),
        x_lo_(x_lo),
        x_hi_(x_hi) {}

  double rho(double x, double t) const override { return rho_(x, t); }
  double drho_dx(double x, double t) const override { return rho_x_(x, t); }
  double drho_dt(double x, double t) const override { return rho_t_(x, t); }
  double x_min() const override { return x_lo_; }
  double x_max() const override { return x_hi_; }

private:
  Fn rho_, rho_x_, rho_t_;
  double x_lo_, x_hi_;
};

// --- kernel shapes -----------------------------------------------------

inline double detail_weight(KernelFamily family, double w, double offset) {
  if (offset > w) return 0.0;
  if (family == KernelFamily::Constant) return 1.0 / w;
  return (2.0 / w) * (1.0 - offset / w);
}

// Weight of a fixed-length kernel at a downstream offset; support is [0, w].
inline double kernel_weight(const KernelSpec& spec, double offset) {
  if (spec.mode != WindowMode::FixedLength)
    throw std::invalid_argument("kernel_weight: fixed-length spec required");
  if (!std::isfinite(offset) || offset < 0.0)
    throw std::invalid_argument("kernel_weight: offset must be >= 0");
  return detail_weight(spec.family, spec.window, offset);
}

// Numeric mass of a fixed-length kernel; 1 within quadrature tolerance.
inline double kernel_mass(const KernelSpec& spec, const Quadrature& quad) {
  if (spec.mode != WindowMode::FixedLength)
    throw std::invalid_argument("kernel_mass: fixed-length spec required");
  if (quad.n_points < 3) throw std::invalid_argument("kernel_mass: bad quadrature");
  const int n = quad.n_points;
  const double h = spec.window / (n - 1);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    const double tw = (j == 0 || j == n - 1) ? 0.5 * h : h;
    sum += tw * detail_weight(spec.family, spec.window, j * h);
  }
  return sum;
}

// Window of the density-modulated variable-length kernel: w0 (1 - rho/rho_m),
// clamped below at zero.
inline double window_length(const KernelSpec& spec, double rho_local,
                            const FDParams& fd) {
  if (spec.mode != WindowMode::VariableLength)
    throw std::invalid_argument("window_length: variable-length spec required");
  if (!std::isfinite(rho_local))
    throw std::invalid_argument("window_length: non-finite density");
  return std::max(0.0, spec.window * (1.0 - rho_local / fd.rho_m));
}

struct ModulatedWeight {
  double value = 0.0;
  bool delta = false;  // w collapsed; consumers use the local density directly
};

// Rescaled base kernel theta_(x,t)(y) = (w0/w) theta0((w0/w) y).
inline ModulatedWeight modulated_weight(const KernelSpec& spec, double w_xt,
                                        double offset) {
  if (spec.mode != WindowMode::VariableLength)
    throw std::invalid_argument("modulated_weight: variable-length spec required");
  if (!std::isfinite(w_xt) || w_xt < 0.0 || !std::isfinite(offset) || offset < 0.0)
    throw std::invalid_argument("modulated_weight: w_xt and offset must be >= 0");
  if (w_xt < kDeltaWindow) return {0.0, true};
  const double scale = spec.window / w_xt;
  return {scale * detail_weight(spec.family, spec.window, scale * offset), false};
}

// --- nonlocal density and its spatial derivative -----------------------

template <class S>
struct NonlocalPair {
  S rho_n{};
  S drho_n_dx{};
};

namespace detail {

// Shared-node quadrature of the nonlocal density and Eq.-9-style derivative
// for a fixed window. The window never depends on the field here, so the
// derivative is the plain convolution of rho_x.
template <class S, class Sampler>
NonlocalPair<S> fixed_window_pair(const Sampler& f, const S& x, const S& t,
                                  KernelFamily family, double w, int n) {
  const double h = w / (n - 1);
  S rho_n(0.0), dsum(0.0);
  for (int j = 0; j < n; ++j) {
    const double tau = j * h;
    const double tw = (j == 0 || j == n - 1) ? 0.5 * h : h;
    const double weight = tw * detail_weight(family, w, tau);
    const auto p = f.probe(x + S(tau), t);
    rho_n = rho_n + weight * p.rho;
    dsum = dsum + weight * p.rho_x;
  }
  return {rho_n, dsum};
}

// Variable-length pair in the change-of-variable form: nodes tau live on the
// fixed reference interval [0, w0], positions are x + (w/w0) tau. The factor
// (1 + (tau/w0) dw/dx) accounts for the window moving with the local state;
// dw/dx is w'(rho) rho_x in the interior and -1 where the boundary caps the
// window.
template <class S, class Sampler>
NonlocalPair<S> variable_window_pair(const Sampler& f, const S& x, const S& t,
                                     const KernelSpec& spec, const FDParams& fd,
                                     int n, double x_hi) {
  const double w0 = spec.window;
  const auto center = f.probe(x, t);
  S w_rho = S(w0) * (S(1.0) - center.rho * S(1.0 / fd.rho_m));
  if (ad::value_of(w_rho) < 0.0) w_rho = S(0.0);
  const double dist = x_hi - ad::value_of(x);
  const bool capped = std::isfinite(dist) && dist < ad::value_of(w_rho);
  const S w_eff = capped ? S(dist) : w_rho;

  if (ad::value_of(w_eff) < kDeltaWindow) return {center.rho, center.rho_x};

  const S scale = w_eff * S(1.0 / w0);
  const S dw_dx = capped ? S(-1.0) : S(-w0 / fd.rho_m) * center.rho_x;

  const double h = w0 / (n - 1);
  S rho_n(0.0), dsum(0.0);
  for (int j = 0; j < n; ++j) {
    const double tau = j * h;
    const double tw = (j == 0 || j == n - 1) ? 0.5 * h : h;
    const double weight = tw * detail_weight(spec.family, w0, tau);
    const auto p = f.probe(x + scale * S(tau), t);
    rho_n = rho_n + weight * p.rho;
    dsum = dsum + weight * (p.rho_x * (S(1.0) + S(tau / w0) * dw_dx));
  }
  return {rho_n, dsum};
}

inline double resolve_fixed_window(double w, double x, double x_hi,
                                   BoundaryPolicy policy) {
  const double dist = x_hi - x;
  if (w <= dist + 1e-9) return w;
  if (policy == BoundaryPolicy::Error)
    throw ThickBoundaryError(
        "look-ahead window of " + std::to_string(w) + " ft at x=" +
        std::to_string(x) + " extends past the segment end at " +
        std::to_string(x_hi) + "; enable truncation or move the point");
  return std::max(dist, 0.0);
}

template <class S, class Sampler>
NonlocalPair<S> nonlocal_pair(const Sampler& f, const S& x, const S& t,
                              const KernelSpec& spec, const FDParams& fd,
                              const Quadrature& quad, BoundaryPolicy policy,
                              double x_hi) {
  if (quad.n_points < 3)
    throw std::invalid_argument("nonlocal density: bad quadrature");
  if (spec.mode == WindowMode::VariableLength)
    return variable_window_pair<S>(f, x, t, spec, fd, quad.n_points, x_hi);
  const double w =
      resolve_fixed_window(spec.window, ad::value_of(x), x_hi, policy);
  if (w < kDeltaWindow) {
    const auto c = f.probe(x, t);
    return {c.rho, c.rho_x};
  }
  return fixed_window_pair<S>(f, x, t, spec.family, w, quad.n_points);
}

struct SamplerRef {
  const DensitySampler* s;
  ad::ProbeD probe(double x, double t) const { return s->probe(x, t); }
};

}  // namespace detail

inline NonlocalPair<double> nonlocal_pair(const DensitySampler& sampler, double x,
                                          double t, const KernelSpec& spec,
                                          const FDParams& fd, const Quadrature& quad,
                                          BoundaryPolicy policy = BoundaryPolicy::Error) {
  return detail::nonlocal_pair<double>(detail::SamplerRef{&sampler}, x, t, spec,
                                       fd, quad, policy, sampler.x_max());
}

// Convolved look-ahead density at (x, t).
inline double nonlocal_density(const DensitySampler& sampler, double x, double t,
                               const KernelSpec& spec, const FDParams& fd,
                               const Quadrature& quad,
                               BoundaryPolicy policy = BoundaryPolicy::Error) {
  return nonlocal_pair(sampler, x, t, spec, fd, quad, policy).rho_n;
}

// Spatial derivative of the nonlocal density, on the same quadrature nodes.
inline double nonlocal_density_dx(const DensitySampler& sampler, double x, double t,
                                  const KernelSpec& spec, const FDParams& fd,
                                  const Quadrature& quad,
                                  BoundaryPolicy policy = BoundaryPolicy::Error) {
  return nonlocal_pair(sampler, x, t, spec, fd, quad, policy).drho_n_dx;
}

// A window longer than the segment cannot be satisfied anywhere.
inline void validate_kernel_for_domain(const KernelSpec& spec, double x_lo,
                                       double x_hi) {
  if (spec.window > x_hi - x_lo)
    throw std::invalid_argument("kernel window exceeds segment length");
}

}  // namespace tse
