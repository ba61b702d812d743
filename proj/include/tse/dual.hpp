#pragma once

#include <cmath>

#include "tse/ad.hpp"

namespace tse::ad {

// First-order dual carrying two tangent directions (x and t). The base scalar
// T is either double or Var: with Var the tangent arithmetic itself lands on
// the tape, which is what makes parameter gradients flow through input
// derivatives.
template <class T>
struct Dual2 {
  T v{};
  T dx{};
  T dt{};

  Dual2() = default;
  explicit Dual2(const T& v_) : v(v_), dx(0.0), dt(0.0) {}
  Dual2(const T& v_, const T& dx_, const T& dt_) : v(v_), dx(dx_), dt(dt_) {}
};

template <class T>
Dual2<T> operator-(const Dual2<T>& a) {
  return {-a.v, -a.dx, -a.dt};
}

template <class T>
Dual2<T> operator+(const Dual2<T>& a, const Dual2<T>& b) {
  return {a.v + b.v, a.dx + b.dx, a.dt + b.dt};
}

template <class T>
Dual2<T> operator-(const Dual2<T>& a, const Dual2<T>& b) {
  return {a.v - b.v, a.dx - b.dx, a.dt - b.dt};
}

template <class T>
Dual2<T> operator*(const Dual2<T>& a, const Dual2<T>& b) {
  return {a.v * b.v, a.dx * b.v + a.v * b.dx, a.dt * b.v + a.v * b.dt};
}

template <class T>
Dual2<T> operator/(const Dual2<T>& a, const Dual2<T>& b) {
  const T q = a.v / b.v;
  return {q, (a.dx - q * b.dx) / b.v, (a.dt - q * b.dt) / b.v};
}

// Mixed ops with the base scalar (a parameter or a plain coefficient).
template <class T>
Dual2<T> operator*(const T& c, const Dual2<T>& a) {
  return {c * a.v, c * a.dx, c * a.dt};
}
template <class T>
Dual2<T> operator*(const Dual2<T>& a, const T& c) {
  return c * a;
}
template <class T>
Dual2<T> operator+(const Dual2<T>& a, const T& c) {
  return {a.v + c, a.dx, a.dt};
}
template <class T>
Dual2<T> operator+(const T& c, const Dual2<T>& a) {
  return a + c;
}
template <class T>
Dual2<T> operator-(const Dual2<T>& a, const T& c) {
  return {a.v - c, a.dx, a.dt};
}
template <class T>
Dual2<T> operator-(const T& c, const Dual2<T>& a) {
  return {c - a.v, -a.dx, -a.dt};
}

// double coefficients for Dual2<Var>, where double != T
inline Dual2<Var> operator*(double c, const Dual2<Var>& a) {
  return Var(c) * a;
}
inline Dual2<Var> operator*(const Dual2<Var>& a, double c) {
  return Var(c) * a;
}
inline Dual2<Var> operator+(const Dual2<Var>& a, double c) {
  return a + Var(c);
}
inline Dual2<Var> operator-(const Dual2<Var>& a, double c) {
  return a - Var(c);
}
inline Dual2<Var> operator-(double c, const Dual2<Var>& a) {
  return Var(c) - a;
}

template <class T>
Dual2<T> tanh(const Dual2<T>& a) {
  using std::tanh;
  const T th = tanh(a.v);
  const T s = T(1.0) - th * th;
  return {th, s * a.dx, s * a.dt};
}

template <class T>
Dual2<T> sigmoid(const Dual2<T>& a) {
  const T s = sigmoid(a.v);
  const T g = s * (T(1.0) - s);
  return {s, g * a.dx, g * a.dt};
}

template <class T>
double value_of(const Dual2<T>& x) {
  return value_of(x.v);
}

// Triple of field value and first derivatives at one point; the shape every
// sampler and the network probe agree on.
template <class S>
struct FieldProbe {
  S rho{};
  S rho_x{};
  S rho_t{};
};

using ProbeD = FieldProbe<double>;

}  // namespace tse::ad
