#pragma once

#include <cmath>
#include <stdexcept>

namespace tse {

// Uniform space-time mesh. Values live at cell centers.
struct Grid {
  double x0 = 0.0;
  double length = 0.0;
  double t0 = 0.0;
  double duration = 0.0;
  double dx = 0.0;
  double dt = 0.0;
  int nx = 0;
  int nt = 0;

  static Grid from_counts(double x0, double t0, double dx, double dt, int nx,
                          int nt) {
    Grid g;
    g.x0 = x0;
    g.t0 = t0;
    g.dx = dx;
    g.dt = dt;
    g.nx = nx;
    g.nt = nt;
    g.length = dx * nx;
    g.duration = dt * nt;
    g.validate();
    return g;
  }

  static Grid from_extent(double x0, double length, double t0, double duration,
                          double dx, double dt) {
    Grid g;
    g.x0 = x0;
    g.length = length;
    g.t0 = t0;
    g.duration = duration;
    g.dx = dx;
    g.dt = dt;
    g.nx = static_cast<int>(std::llround(length / dx));
    g.nt = static_cast<int>(std::llround(duration / dt));
    g.validate();
    return g;
  }

  void validate() const {
    if (!(dx > 0.0) || !(dt > 0.0))
      throw std::invalid_argument("Grid: dx and dt must be > 0");
    if (nx < 2 || nt < 2) throw std::invalid_argument("Grid: nx, nt must be >= 2");
    if (!(length > 0.0) || !(duration > 0.0))
      throw std::invalid_argument("Grid: length and duration must be > 0");
    if (std::abs(nx * dx - length) > 1e-9 * length)
      throw std::invalid_argument("Grid: nx*dx does not match length");
    if (std::abs(nt * dt - duration) > 1e-9 * duration)
      throw std::invalid_argument("Grid: nt*dt does not match duration");
  }

  double x_center(int i) const { return x0 + (i + 0.5) * dx; }
  double t_center(int j) const { return t0 + (j + 0.5) * dt; }
  double x_end() const { return x0 + length; }
  double t_end() const { return t0 + duration; }
  long cells() const { return static_cast<long>(nx) * nt; }

  bool same_shape(const Grid& o) const {
    return nx == o.nx && nt == o.nt && x0 == o.x0 && t0 == o.t0 && dx == o.dx &&
           dt == o.dt;
  }
};

}  // namespace tse
