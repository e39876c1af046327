#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "acx/quadrature.hpp"

using namespace acx;

namespace {
double bump1(double s) { return s * s < 1 ? std::exp(1 - 1 / (1 - s * s)) : 0.0; }
}  // namespace

TEST_CASE("Gauss-Legendre rule integrates monomials of degree 2g-1 exactly") {
  for (int g : {3, 5, 8, 12}) {
    const auto& r = gauss_rule(g);
    double wsum = 0;
    for (double w : r.w) wsum += w;
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
    for (int deg = 0; deg <= 2 * g - 1; ++deg) {
      Box b({0.2}, {1.3});
      double got = gauss_cell(b, [deg](const double* x) { return cplx(std::pow(x[0], deg)); }, g).real();
      double exact = (std::pow(1.3, deg + 1) - std::pow(0.2, deg + 1)) / (deg + 1);
      CHECK(std::abs(got - exact) <= 1e-13 * std::max(1.0, std::abs(exact)));
    }
  }
  // tensor products in 3D
  Box b3({-1, 0, 0.5}, {1, 2, 1});
  auto f = [](const double* x) { return cplx(std::pow(x[0], 7) * std::pow(x[1], 15) * std::pow(x[2], 3)); };
  double exact = 0.0 * 1;  // odd power over symmetric interval
  CHECK(std::abs(gauss_cell(b3, f, 8).real() - exact) < 1e-12);
  auto f2 = [](const double* x) { return cplx(std::pow(x[0], 6) * std::pow(x[1], 15) * std::pow(x[2], 3)); };
  double exact2 = (2.0 / 7) * (std::pow(2.0, 16) / 16) * ((1 - std::pow(0.5, 4)) / 4);
  CHECK(gauss_cell(b3, f2, 8).real() == doctest::Approx(exact2).epsilon(1e-13));
}

TEST_CASE("adaptive cubature of a compactly supported bump") {
  // reference: composite Gauss on 256 panels
  double ref = 0;
  const auto& r = gauss_rule(20);
  for (int p = 0; p < 256; ++p) {
    double a = -1 + 2.0 * p / 256, b = a + 2.0 / 256;
    for (int i = 0; i < 20; ++i) ref += 0.5 * (b - a) * r.w[i] * bump1(0.5 * (a + b) + 0.5 * (b - a) * r.x[i]);
  }
  QuadratureConfig cfg;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-14;
  auto res = integrate(Box({-1}, {1}), [](const double* x) { return cplx(bump1(x[0])); }, cfg);
  CHECK(res.converged);
  CHECK(std::abs(res.value.real() - ref) <= 1e-9 * ref);
  CHECK(res.error <= 1e-10 * ref * 1.0001);
}

TEST_CASE("adaptive cubature of a peaked 2D integrand") {
  const double eps = 0.01;
  auto f = [eps](const double* x) {
    double r2 = x[0] * x[0] + x[1] * x[1];
    return cplx(eps * eps / ((r2 + eps * eps) * (r2 + eps * eps)));
  };
  // reference from the inner integral in closed form and a 30-digit outer quadrature
  const double exact = 3.14133559573618795461;
  QuadratureConfig cfg;
  cfg.rel_tol = 1e-8;
  cfg.max_depth = 30;
  auto plain = integrate(Box({-1, -1}, {1, 1}), f, cfg);
  CHECK(std::abs(plain.value.real() - exact) <= 1e-7 * exact);
  CHECK(std::abs(plain.value.real() - exact) <= 10 * plain.error);
  cfg.hints.push_back({[](const double* x) { return std::hypot(x[0], x[1]); }, eps});
  auto hinted = integrate(Box({-1, -1}, {1, 1}), f, cfg);
  CHECK(std::abs(hinted.value.real() - exact) <= 1e-7 * exact);
}

TEST_CASE("results are bit-identical across thread counts") {
  auto f = [](const double* x) {
    return cplx(std::exp(-30 * (x[0] * x[0] + x[1] * x[1])) * std::cos(3 * x[2]), x[0] * x[1] * x[2]);
  };
  QuadratureConfig cfg;
  cfg.order = 6;
  cfg.rel_tol = 1e-8;
  Box b({-1, -1, -1}, {1, 1, 1});
  cfg.threads = 1;
  auto a = integrate(b, f, cfg);
  for (int t : {4, 8}) {
    cfg.threads = t;
    auto c = integrate(b, f, cfg);
    CHECK(std::memcmp(&a.value, &c.value, sizeof(cplx)) == 0);
    CHECK(a.error == c.error);
    CHECK(a.cells == c.cells);
  }
}

TEST_CASE("insufficient depth raises NonConvergence") {
  auto f = [](const double* x) { return cplx(1.0 / (std::abs(x[0]) + 1e-12)); };
  QuadratureConfig cfg;
  cfg.max_depth = 3;
  CHECK_THROWS_AS(integrate(Box({-1}, {1}), f, cfg), NonConvergence);
  cfg.strict = false;
  auto r = integrate(Box({-1}, {1}), f, cfg);
  CHECK_FALSE(r.converged);
}

TEST_CASE("invalid configurations are rejected") {
  QuadratureConfig cfg;
  cfg.rel_tol = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_depth = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
