#pragma once

#include "tse/kernels.hpp"

namespace tse {

// Which conservation-law residual is penalized at collocation points.
enum class ResidualKind { LocalLWR, NonlocalTwoVar, NonlocalIntegro };

namespace detail {

template <class S, class Sampler>
S local_residual_impl(const Sampler& f, const S& x, const S& t,
                      const FDParams& fd) {
  const auto p = f.probe(x, t);
  return S(fd.v_f) * (S(1.0) - S(2.0 / fd.rho_m) * p.rho) * p.rho_x + p.rho_t;
}

// rho_t + v_f (1 - rho_n/rho_m) rho_x - rho (v_f/rho_m) d(rho_n)/dx, with the
// nonlocal pair evaluated on shared quadrature nodes.
template <class S, class Sampler>
S two_var_residual_impl(const Sampler& f, const S& x, const S& t,
                        const FDParams& fd, const KernelSpec& spec,
                        const Quadrature& quad, BoundaryPolicy policy,
                        double x_hi) {
  const auto c = f.probe(x, t);
  const auto nl = nonlocal_pair<S>(f, x, t, spec, fd, quad, policy, x_hi);
  return c.rho_t +
         S(fd.v_f) * (S(1.0) - nl.rho_n * S(1.0 / fd.rho_m)) * c.rho_x -
         c.rho * S(fd.v_f / fd.rho_m) * nl.drho_n_dx;
}

// Single-variable integro-differential form: the convolution is folded into
// one integral so rho_n never appears. Algebraically identical to the
// two-variable form; numerically identical up to the quadrature mass.
template <class S, class Sampler>
S integro_residual_impl(const Sampler& f, const S& x, const S& t,
                        const FDParams& fd, const KernelSpec& spec,
                        const Quadrature& quad, BoundaryPolicy policy,
                        double x_hi) {
  if (spec.mode != WindowMode::FixedLength)
    throw std::invalid_argument(
        "integro residual requires a fixed-length kernel");
  const auto c = f.probe(x, t);
  const double w =
      resolve_fixed_window(spec.window, ad::value_of(x), x_hi, policy);
  const double inv_rho_m = 1.0 / fd.rho_m;
  if (w < kDeltaWindow) {
    // delta kernel: the integrand collapses onto the center point
    return c.rho_t + S(fd.v_f) * (c.rho_x - S(inv_rho_m) * (c.rho * c.rho_x +
                                                            c.rho_x * c.rho));
  }
  const int n = quad.n_points;
  const double h = w / (n - 1);
  S acc(0.0);
  for (int j = 0; j < n; ++j) {
    const double tau = j * h;
    const double tw = (j == 0 || j == n - 1) ? 0.5 * h : h;
    const double weight = tw * detail_weight(spec.family, w, tau);
    const auto p = f.probe(x + S(tau), t);
    acc = acc +
          weight * (c.rho_x - S(inv_rho_m) * (c.rho * p.rho_x + c.rho_x * p.rho));
  }
  return c.rho_t + S(fd.v_f) * acc;
}

template <class S, class Sampler>
S residual_impl(ResidualKind kind, const Sampler& f, const S& x, const S& t,
                const FDParams& fd, const KernelSpec& spec,
                const Quadrature& quad, BoundaryPolicy policy, double x_hi) {
  switch (kind) {
    case ResidualKind::LocalLWR:
      return local_residual_impl<S>(f, x, t, fd);
    case ResidualKind::NonlocalTwoVar:
      return two_var_residual_impl<S>(f, x, t, fd, spec, quad, policy, x_hi);
    case ResidualKind::NonlocalIntegro:
      return integro_residual_impl<S>(f, x, t, fd, spec, quad, policy, x_hi);
  }
  throw std::logic_error("unknown residual kind");
}

}  // namespace detail

inline double local_residual(const DensitySampler& sampler, double x, double t,
                             const FDParams& fd) {
  return detail::local_residual_impl<double>(detail::SamplerRef{&sampler}, x, t,
                                             fd);
}

inline double nonlocal_residual_two_var(const DensitySampler& sampler, double x,
                                        double t, const FDParams& fd,
                                        const KernelSpec& spec,
                                        const Quadrature& quad,
                                        BoundaryPolicy policy = BoundaryPolicy::Error) {
  return detail::two_var_residual_impl<double>(detail::SamplerRef{&sampler}, x,
                                               t, fd, spec, quad, policy,
                                               sampler.x_max());
}

inline double nonlocal_residual_integro(const DensitySampler& sampler, double x,
                                        double t, const FDParams& fd,
                                        const KernelSpec& spec,
                                        const Quadrature& quad,
                                        BoundaryPolicy policy = BoundaryPolicy::Error) {
  return detail::integro_residual_impl<double>(detail::SamplerRef{&sampler}, x,
                                               t, fd, spec, quad, policy,
                                               sampler.x_max());
}

inline double pde_residual(ResidualKind kind, const DensitySampler& sampler,
                           double x, double t, const FDParams& fd,
                           const KernelSpec& spec, const Quadrature& quad,
                           BoundaryPolicy policy = BoundaryPolicy::Error) {
  return detail::residual_impl<double>(kind, detail::SamplerRef{&sampler}, x, t,
                                       fd, spec, quad, policy, sampler.x_max());
}

}  // namespace tse
