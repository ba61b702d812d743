#include <doctest.h>

#include <cmath>
#include <vector>

#include "tse/kernels.hpp"

using namespace tse;

namespace {

const FDParams kFd(54.30, 0.11);

// linear density profile rho = a x + b on [0, x_hi]
FunctionSampler linear_field(double a, double b, double x_hi = 4000.0) {
  return FunctionSampler([a, b](double x, double) { return a * x + b; },
                         [a](double, double) { return a; },
                         [](double, double) { return 0.0; }, 0.0, x_hi);
}

FunctionSampler constant_field(double c, double x_hi = 4000.0) {
  return linear_field(0.0, c, x_hi);
}

// smooth synthetic field with analytic derivatives
FunctionSampler wavy_field(double x_hi = 4000.0) {
  const double kx = 2.0 * M_PI / 1600.0;
  const double kt = 2.0 * M_PI / 120.0;
  return FunctionSampler(
      [=](double x, double t) { return 0.05 + 0.03 * std::sin(kx * x) * std::cos(kt * t); },
      [=](double x, double t) { return 0.03 * kx * std::cos(kx * x) * std::cos(kt * t); },
      [=](double x, double t) { return -0.03 * kt * std::sin(kx * x) * std::sin(kt * t); },
      0.0, x_hi);
}

}  // namespace

TEST_CASE("kernel_weight: flat value, peak, and support edge") {
  const auto constant = KernelSpec::fixed(KernelFamily::Constant, 60.0);
  const auto linear = KernelSpec::fixed(KernelFamily::LinearDecreasing, 60.0);

  CHECK(kernel_weight(constant, 30.0) == doctest::Approx(1.0 / 60.0).epsilon(1e-15));
  CHECK(kernel_weight(linear, 0.0) == doctest::Approx(2.0 / 60.0).epsilon(1e-15));
  CHECK(kernel_weight(linear, 60.0) == 0.0);
  CHECK(kernel_weight(linear, 61.0) == 0.0);
  CHECK_THROWS_AS(kernel_weight(constant, -1.0), std::invalid_argument);
}

TEST_CASE("kernel_mass is one for trapezoid-exact shapes") {
  CHECK(kernel_mass(KernelSpec::fixed(KernelFamily::Constant, 60.0), Quadrature(101)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kernel_mass(KernelSpec::fixed(KernelFamily::LinearDecreasing, 60.0),
                    Quadrature(101)) == doctest::Approx(1.0).epsilon(1e-12));
  // trapezoid is exact for degree <= 1: closed form of Eq-13 mass is
  // (2/w) * (w - w/2) = 1 for any node count
  CHECK(kernel_mass(KernelSpec::fixed(KernelFamily::LinearDecreasing, 100.0),
                    Quadrature(3)) == doctest::Approx(1.0).epsilon(1e-12));

  for (double w : {10.0, 60.0, 100.0, 250.0})
    for (int n : {3, 5, 33, 101})
      for (auto fam : {KernelFamily::Constant, KernelFamily::LinearDecreasing})
        CHECK(kernel_mass(KernelSpec::fixed(fam, w), Quadrature(n)) ==
              doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("window_length shrinks linearly with density") {
  const auto spec = KernelSpec::variable(KernelFamily::Constant, 100.0);
  CHECK(window_length(spec, 0.0, kFd) == doctest::Approx(100.0));
  CHECK(window_length(spec, kFd.rho_m, kFd) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(window_length(spec, kFd.rho_m / 2, kFd) == doctest::Approx(50.0));
  CHECK(window_length(spec, 2 * kFd.rho_m, kFd) == 0.0);  // clamped
  CHECK_THROWS_AS(window_length(spec, NAN, kFd), std::invalid_argument);

  double prev = window_length(spec, 0.0, kFd);
  for (int k = 1; k <= 200; ++k) {
    const double w = window_length(spec, kFd.rho_m * k / 200.0, kFd);
    CHECK(w < prev);
    prev = w;
  }
}

TEST_CASE("modulated_weight rescales the base kernel") {
  const auto cvar = KernelSpec::variable(KernelFamily::Constant, 100.0);
  const auto lvar = KernelSpec::variable(KernelFamily::LinearDecreasing, 100.0);

  const auto a = modulated_weight(cvar, 50.0, 25.0);
  CHECK_FALSE(a.delta);
  CHECK(a.value == doctest::Approx(0.02).epsilon(1e-15));  // == 1/w_xt

  const auto b = modulated_weight(lvar, 50.0, 0.0);
  CHECK_FALSE(b.delta);
  CHECK(b.value == doctest::Approx(0.04).epsilon(1e-15));  // == 2/w_xt

  const auto d = modulated_weight(lvar, 0.0, 0.0);
  CHECK(d.delta);
}

TEST_CASE("modulated kernel keeps unit mass at every window") {
  for (auto fam : {KernelFamily::Constant, KernelFamily::LinearDecreasing}) {
    const auto spec = KernelSpec::variable(fam, 100.0);
    for (int k = 1; k <= 20; ++k) {
      const double w_xt = 100.0 * k / 20.0;
      const int n = 33;
      const double h = w_xt / (n - 1);
      double mass = 0.0;
      for (int j = 0; j < n; ++j) {
        const double tw = (j == 0 || j == n - 1) ? 0.5 * h : h;
        mass += tw * modulated_weight(spec, w_xt, j * h).value;
      }
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("nonlocal density of a constant field is the constant") {
  const auto f = constant_field(0.042);
  const Quadrature quad(33);
  for (auto fam : {KernelFamily::Constant, KernelFamily::LinearDecreasing}) {
    CHECK(nonlocal_density(f, 500.0, 0.0, KernelSpec::fixed(fam, 60.0), kFd, quad) ==
          doctest::Approx(0.042).epsilon(1e-14));
    CHECK(nonlocal_density(f, 500.0, 0.0, KernelSpec::variable(fam, 100.0), kFd, quad) ==
          doctest::Approx(0.042).epsilon(1e-14));
  }
}

TEST_CASE("nonlocal density of a linear field: closed forms") {
  const double a = 2.0e-5, x = 700.0, w = 60.0;
  const auto f = linear_field(a, 0.0);
  const Quadrature quad(33);

  // constant kernel: integrand is linear, trapezoid is exact
  const double got_c = nonlocal_density(f, x, 0.0, KernelSpec::fixed(KernelFamily::Constant, w),
                                        kFd, quad);
  CHECK(got_c == doctest::Approx(a * (x + w / 2)).epsilon(1e-12));

  // linearly decreasing kernel: integrand is quadratic; compare against the
  // closed form a (x + w/3) within the composite-trapezoid error bound
  // |E| <= a w / (3 (n-1)^2)
  const double got_l = nonlocal_density(
      f, x, 0.0, KernelSpec::fixed(KernelFamily::LinearDecreasing, w), kFd, quad);
  const double bound = a * w / (3.0 * 32.0 * 32.0);
  CHECK(std::abs(got_l - a * (x + w / 3)) <= 1.05 * bound + 1e-15);

  // and the quadrature converges to the closed form as nodes increase
  const double fine = nonlocal_density(
      f, x, 0.0, KernelSpec::fixed(KernelFamily::LinearDecreasing, w), kFd, Quadrature(2001));
  CHECK(fine == doctest::Approx(a * (x + w / 3)).epsilon(1e-9));
}

TEST_CASE("variable-length kernel at jam density degenerates to the local value") {
  const auto f = constant_field(kFd.rho_m);
  const auto spec = KernelSpec::variable(KernelFamily::Constant, 100.0);
  CHECK(nonlocal_density(f, 500.0, 0.0, spec, kFd, Quadrature(33)) ==
        doctest::Approx(kFd.rho_m));
}

TEST_CASE("nonlocal density derivative: constant and linear fields") {
  const Quadrature quad(33);
  const auto fc = constant_field(0.03);
  CHECK(nonlocal_density_dx(fc, 400.0, 0.0, KernelSpec::fixed(KernelFamily::Constant, 60.0),
                            kFd, quad) == doctest::Approx(0.0).epsilon(1e-15));

  const double a = 3.0e-5;
  const auto fl = linear_field(a, 0.01);
  CHECK(nonlocal_density_dx(fl, 400.0, 0.0, KernelSpec::fixed(KernelFamily::Constant, 60.0),
                            kFd, quad) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("derivative commutes with quadrature: central-difference oracle") {
  const Quadrature quad(33);
  const auto f = wavy_field();
  const double t = 30.0;
  const double h = 1e-3;

  std::vector<KernelSpec> specs = {
      KernelSpec::fixed(KernelFamily::Constant, 60.0),
      KernelSpec::fixed(KernelFamily::LinearDecreasing, 60.0),
      KernelSpec::fixed(KernelFamily::Constant, 100.0),
      KernelSpec::fixed(KernelFamily::LinearDecreasing, 100.0),
      KernelSpec::variable(KernelFamily::Constant, 100.0),
      KernelSpec::variable(KernelFamily::LinearDecreasing, 100.0),
  };
  for (const auto& spec : specs) {
    for (double x : {200.0, 900.0, 1500.0, 2500.0}) {
      const double dexact = nonlocal_density_dx(f, x, t, spec, kFd, quad);
      const double dplus = nonlocal_density(f, x + h, t, spec, kFd, quad);
      const double dminus = nonlocal_density(f, x - h, t, spec, kFd, quad);
      const double dfd = (dplus - dminus) / (2 * h);
      CHECK(dexact == doctest::Approx(dfd).epsilon(1e-6));
    }
  }
}

TEST_CASE("variable-length derivative matches FD on a sloped field") {
  // the window itself moves with the local density here, exercising the
  // dw/dx correction term
  const double a = 3.0e-5, b = 0.01;
  const auto f = linear_field(a, b);
  const auto spec = KernelSpec::variable(KernelFamily::Constant, 100.0);
  const Quadrature quad(33);
  const double h = 1e-3;
  for (double x : {100.0, 800.0, 2000.0}) {
    const double dexact = nonlocal_density_dx(f, x, 0.0, spec, kFd, quad);
    const double dfd = (nonlocal_density(f, x + h, 0.0, spec, kFd, quad) -
                        nonlocal_density(f, x - h, 0.0, spec, kFd, quad)) /
                       (2 * h);
    CHECK(dexact == doctest::Approx(dfd).epsilon(1e-6));
  }
}

TEST_CASE("nonlocal density approaches the local value as the window shrinks") {
  const auto f = wavy_field();
  const double x = 1100.0, t = 10.0;
  const double local = f.rho(x, t);
  double prev = 1e9;
  for (double w : {10.0, 1.0, 0.1, 0.01}) {
    const double diff = std::abs(
        nonlocal_density(f, x, t, KernelSpec::fixed(KernelFamily::Constant, w), kFd,
                         Quadrature(33)) -
        local);
    CHECK(diff < prev);
    prev = diff;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("thick boundary raises unless truncation is enabled") {
  const auto f = constant_field(0.05, /*x_hi=*/1000.0);
  const auto spec = KernelSpec::fixed(KernelFamily::LinearDecreasing, 60.0);
  const Quadrature quad(33);

  CHECK_THROWS_AS(nonlocal_density(f, 970.0, 0.0, spec, kFd, quad), ThickBoundaryError);
  // truncate-and-renormalize: the shortened same-family kernel still has unit
  // mass, so a constant field stays exact
  CHECK(nonlocal_density(f, 970.0, 0.0, spec, kFd, quad,
                         BoundaryPolicy::TruncateRenormalize) ==
        doctest::Approx(0.05).epsilon(1e-13));
  // interior points are unaffected by the policy
  CHECK(nonlocal_density(f, 500.0, 0.0, spec, kFd, quad) ==
        doctest::Approx(nonlocal_density(f, 500.0, 0.0, spec, kFd, quad,
                                         BoundaryPolicy::TruncateRenormalize))
            .epsilon(1e-15));
}

TEST_CASE("kernel validation against the segment") {
  CHECK_THROWS_AS(validate_kernel_for_domain(
                      KernelSpec::fixed(KernelFamily::Constant, 600.0), 0.0, 500.0),
                  std::invalid_argument);
  CHECK_NOTHROW(validate_kernel_for_domain(
      KernelSpec::fixed(KernelFamily::Constant, 60.0), 0.0, 500.0));
  CHECK_THROWS_AS(KernelSpec::fixed(KernelFamily::Constant, -5.0), std::invalid_argument);
  CHECK_THROWS_AS(Quadrature(2), std::invalid_argument);
}
