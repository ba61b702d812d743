#pragma once

#include <cmath>
#include <stdexcept>

namespace tse {

// Greenshields fundamental-diagram parameters. Units are feet and seconds
// throughout the library; densities are lane-aggregated.
struct FDParams {
  double v_f;    // free-flow speed, ft/s
  double rho_m;  // jam density, veh/ft

  FDParams(double v_f_, double rho_m_) : v_f(v_f_), rho_m(rho_m_) {
    if (!std::isfinite(v_f) || v_f <= 0.0)
      throw std::invalid_argument("FDParams: v_f must be finite and > 0");
    if (!std::isfinite(rho_m) || rho_m <= 0.0)
      throw std::invalid_argument("FDParams: rho_m must be finite and > 0");
  }
};

// v = v_f (1 - rho/rho_m). Not clamped: densities above rho_m yield negative
// speeds so that physics residuals see the raw diagram; display layers clamp.
inline double greenshields_speed(double rho, const FDParams& fd) {
  if (!std::isfinite(rho))
    throw std::invalid_argument("greenshields_speed: non-finite density");
  return fd.v_f * (1.0 - rho / fd.rho_m);
}

// q = rho * v(rho), evaluated in exactly that order so flow and speed agree
// bitwise.
inline double greenshields_flow(double rho, const FDParams& fd) {
  return rho * greenshields_speed(rho, fd);
}

// Same linear diagram driven by the convolved nonlocal density rho_n.
inline double nonlocal_greenshields_speed(double rho_n, const FDParams& fd) {
  if (!std::isfinite(rho_n))
    throw std::invalid_argument("nonlocal_greenshields_speed: non-finite density");
  return fd.v_f * (1.0 - rho_n / fd.rho_m);
}

}  // namespace tse
