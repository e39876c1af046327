#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "acx/calculus.hpp"
#include "support.hpp"

using namespace acx;
using acx::testing::random_point;
using acx::testing::random_poly_field;

namespace {

double diff(const ExteriorValue& a, const ExteriorValue& b) { return max_abs(a - b); }

Engine central() {
  Engine e;
  e.mode = Engine::Central;
  return e;
}

// |z|^2 + ... helpers as generic fields on C^n
FormField norm2_field(int n) {
  auto f = [n](const auto* x) {
    using S = scalar_of<decltype(x)>;
    coeff_t<S> s = 0.0;
    for (int a = 0; a < 2 * n; ++a) s = s + x[a] * x[a] * cplx(1.0);
    return ExtOf<S>::scalar(n, s);
  };
  return make_field(n, 0, f, "|z|^2");
}

}  // namespace

TEST_CASE("d of x1 dx2") {
  auto f = [](const auto* x) {
    using S = scalar_of<decltype(x)>;
    return ExtOf<S>::basis(1, 0b10, coeff_t<S>(x[0] * cplx(1.0)));
  };
  auto phi = make_field(1, 1, f);
  double x[2] = {0.3, -0.7};
  CHECK(diff(d(phi, x), ExteriorValue::basis(1, 0b11)) < 1e-15);
}

TEST_CASE("d squares to zero and obeys Leibniz") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    int n = 1 + t % 3, k = t % (2 * n);
    auto phi = random_poly_field(n, k, rng);
    auto x = random_point(2 * n, 1.0, rng);
    std::vector<Jet> xs(2 * n);
    for (int a = 0; a < 2 * n; ++a) xs[a] = seed(x(a), a, 2 * n);
    auto dd = values(ext_d(ext_d(phi.eval_jet(xs.data()))));
    CHECK(max_abs(dd) <= 1e-10);

    int l = (t * 7) % (2 * n - k);
    auto psi = random_poly_field(n, l, rng);
    auto lhs = d(wedge(phi, psi), x);
    double sgn = (k % 2) ? -1.0 : 1.0;
    auto rhs = wedge(d(phi, x), psi(x)) + scale(wedge(phi(x), d(psi, x)), sgn);
    CHECK(diff(lhs, rhs) <= 1e-10);
  }
}

TEST_CASE("exact and difference engines agree on polynomial fields") {
  std::mt19937_64 rng(2);
  Engine fd = central();
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    int n = 1 + t % 2, k = t % (2 * n);
    auto phi = random_poly_field(n, k, rng);
    auto x = random_point(2 * n, 1.0, rng);
    worst = std::max(worst, diff(d(phi, x), d(phi, x, fd)));
  }
  CHECK(worst <= 10 * fd.h * fd.h);
}

TEST_CASE("d of (i/2) delbar_J |z|^2 on the twisted family matches the difference engine") {
  auto T = make_twisted(0.1);
  auto beta_pot = scale(delbar_field(norm2_field(2), T), cplx(0, 0.5));
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    auto x = random_point(4, 0.5, rng);
    CHECK(diff(d(beta_pot, x), d(beta_pot, x, central())) <= 1e-6);
  }
}

TEST_CASE("split_d of zbar dz on the standard line") {
  auto f = [](const auto* x) {
    using S = scalar_of<decltype(x)>;
    coeff_t<S> zb = x[0] * cplx(1.0) + x[1] * cplx(0, -1);
    ExtOf<S> r(1);
    r.terms.push_back({0b01, zb});
    r.terms.push_back({0b10, zb * cplx(0, 1)});
    return r;
  };
  auto phi = make_field(1, 1, f);
  auto S = make_standard(1);
  double x[2] = {0.4, 0.1};
  auto s = split_d(phi, S, x);
  CHECK(s.p == 1);
  CHECK(s.q == 0);
  CHECK(max_abs(s.del) < 1e-15);
  CHECK(diff(s.delbar, wedge(dzbar(1, 0), dz(1, 0))) < 1e-14);
  CHECK(max_abs(s.theta) == 0.0);
  CHECK(max_abs(s.thetabar) == 0.0);
}

TEST_CASE("split_d reconstructs d and lands in the stated bidegrees") {
  std::mt19937_64 rng(4);
  for (double lam : {0.0, 0.1, 0.3}) {
    auto T = make_twisted(lam);
    for (int t = 0; t < 12; ++t) {
      int k = t % 4;
      int p = (t / 4) % (k + 1);
      auto phi = project_field(random_poly_field(2, k, rng), T, p);
      auto x = random_point(4, 0.5, rng);
      auto s = split_d(phi, T, x.data(), {}, std::pair{p, k - p});
      auto rec = s.del + s.delbar - s.theta - s.thetabar;
      CHECK(diff(rec, s.dphi) <= 1e-8);
      CHECK(s.residual <= 1e-10);
      auto P = projector_10(T.J(x));
      auto check_bideg = [&](const ExteriorValue& v, int pp) {
        if (v.empty()) return;
        auto sp = bidegree_split(v, P, k + 1);
        CHECK(diff(sp.parts[pp], v) <= 1e-10);
      };
      check_bideg(s.del, p + 1);
      check_bideg(s.delbar, p);
      check_bideg(s.theta, p + 2);
      check_bideg(s.thetabar, p - 1);
      if (lam == 0.0) {
        CHECK(max_abs(s.theta) <= 1e-8);
        CHECK(max_abs(s.thetabar) <= 1e-8);
      }
    }
  }
}

TEST_CASE("torsion of d vanishes on functions") {
  std::mt19937_64 rng(5);
  auto T = make_twisted(0.2);
  auto u = random_poly_field(2, 0, rng);
  auto x = random_point(4, 0.5, rng);
  auto s = split_d(u, T, x.data(), {}, std::pair{0, 0});
  CHECK(max_abs(s.theta) == 0.0);
  CHECK(max_abs(s.thetabar) == 0.0);
}

TEST_CASE("torsion components agree with the Nijenhuis probe") {
  std::mt19937_64 rng(6);
  for (double lam : {0.0, 0.2}) {
    auto T = make_twisted(lam);
    for (int t = 0; t < 5; ++t) {
      auto x = random_point(4, 0.5, rng);
      double nij = 0;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          nij = std::max(nij, nijenhuis(T, x, Eigen::VectorXd::Unit(4, a), Eigen::VectorXd::Unit(4, b)).norm());
      double tors = 0;
      for (int a = 0; a < 4; ++a) {
        auto f = [a](const auto* y) {
          using S = scalar_of<decltype(y)>;
          return ExtOf<S>::basis(2, 1u << a, coeff_t<S>(1.0));
        };
        auto dxa = make_field(2, 1, f);
        auto s = split_d(project_field(dxa, T, 0), T, x.data(), {}, std::pair{0, 1});
        tors = std::max(tors, max_abs(s.theta));
      }
      CHECK((nij <= 1e-8) == (tors <= 1e-8));
    }
  }
}

TEST_CASE("ddbar of |z|^2 is 2 beta_1") {
  for (int n = 1; n <= 3; ++n) {
    auto S = make_standard(n);
    std::mt19937_64 rng(7);
    auto x = random_point(2 * n, 1.0, rng);
    ExteriorValue expect(n);
    for (int j = 0; j < n; ++j) expect = expect + scale(wedge(dz(n, j), dzbar(n, j)), cplx(0, 1));
    CHECK(diff(ddbar(norm2_field(n), S, x), expect) <= 1e-12);
  }
}

TEST_CASE("ddbar of log(|z|^2 + eps^2) in one variable") {
  const double eps = 0.1;
  auto f = [eps](const auto* x) {
    using S = scalar_of<decltype(x)>;
    coeff_t<S> r2 = (x[0] * x[0] + x[1] * x[1]) * cplx(1.0);
    return ExtOf<S>::scalar(1, log(r2 + eps * eps));
  };
  auto u = make_field(1, 0, f);
  double x[2] = {0.2, 0.0};
  double r2 = 0.04;
  auto expect = scale(wedge(dz(1, 0), dzbar(1, 0)), cplx(0, eps * eps / ((r2 + eps * eps) * (r2 + eps * eps))));
  auto got = ddbar(u, make_standard(1), x);
  CHECK(diff(got, expect) <= 1e-12);
  CHECK(diff(ddbar(u, make_standard(1), x, central()), expect) <= 1e-5);
}

TEST_CASE("ddbar of a pluriharmonic function vanishes") {
  auto f = [](const auto* x) {
    using S = scalar_of<decltype(x)>;
    return ExtOf<S>::scalar(2, coeff_t<S>(x[0] * cplx(1.0)));
  };
  auto u = make_field(2, 0, f);
  double x[4] = {0.3, 0.1, -0.2, 0.5};
  CHECK(max_abs(ddbar(u, make_standard(2), x)) <= 1e-15);
}

TEST_CASE("ddbar of a real function is hermitian on the twisted family") {
  std::mt19937_64 rng(8);
  auto T = make_twisted(0.2);
  auto g = random_poly_field(2, 0, rng);
  auto f = [g](const auto* x) {
    using S = scalar_of<decltype(x)>;
    if constexpr (std::is_same_v<S, double>) {
      auto v = g.eval(x);
      return ExtOf<S>::scalar(2, cplx(v.coeff(0).real()));
    } else {
      auto v = g.eval_jet(x);
      return ExtOf<S>::scalar(2, real(v.coeff(0)));
    }
  };
  auto u = make_field(2, 0, f);
  for (int t = 0; t < 5; ++t) {
    auto x = random_point(4, 0.5, rng);
    auto v = ddbar(u, T, x);
    // i del delbar u is a real form for real u
    CHECK(diff(v, conj(v)) <= 1e-12);
    CHECK(bidegree_of(v, projector_10(T.J(x))) == std::pair<int, int>{1, 1});
    CHECK(diff(v, ddbar(u, T, x, central())) <= 1e-5);
  }
}

TEST_CASE("dense ddbar agrees with the exterior algebra path") {
  std::mt19937_64 rng(21);
  for (double lam : {0.0, 0.2, 0.9}) {
    auto T = make_twisted(lam);
    auto g = random_poly_field(2, 0, rng);
    for (int t = 0; t < 5; ++t) {
      auto x = random_point(4, 0.5, rng);
      Jet xs[4];
      for (int a = 0; a < 4; ++a) xs[a] = seed(x(a), a, 4);
      Jet u = g.eval_jet(xs).coeff(0);
      auto Jj = T.J_jet(xs);
      auto ref = i_ddbar_of(u, projector_data(2, Jj), projector_data(projector_10(T.J(x))));
      CHECK(diff(i_ddbar_dense(u, Jj, 2), ref) <= 1e-12);
    }
  }
}

TEST_CASE("pullback examples") {
  auto incl = make_map(2, 4, [](const auto* t, auto* x) {
    x[0] = t[0];
    x[1] = t[1];
    x[2] = 0.0;
    x[3] = 0.0;
  });
  auto dwf = make_field(2, 1, [](const auto* x) {
    using S = scalar_of<decltype(x)>;
    (void)x;
    ExtOf<S> r(2);
    r.terms.push_back({0b0100, coeff_t<S>(1.0)});
    r.terms.push_back({0b1000, coeff_t<S>(cplx(0, 1))});
    return r;
  });
  double t[2] = {0.3, 0.2};
  CHECK(pullback(dwf, incl, t).empty());

  auto id = make_map(4, 4, [](const auto* s, auto* x) {
    for (int a = 0; a < 4; ++a) x[a] = s[a];
  });
  std::mt19937_64 rng(9);
  auto phi = random_poly_field(2, 2, rng);
  double y[4] = {0.1, 0.2, 0.3, 0.4};
  CHECK(diff(pullback(phi, id, y), phi(y)) <= 1e-15);

  auto para = make_map(1, 2, [](const auto* s, auto* x) {
    x[0] = s[0];
    x[1] = s[0] * s[0];
  });
  auto dx2 = make_field(1, 1, [](const auto* x) {
    using S = scalar_of<decltype(x)>;
    (void)x;
    return ExtOf<S>::basis(1, 0b10, coeff_t<S>(1.0));
  });
  double s0 = 0.7;
  auto pb = pullback(dx2, para, &s0);
  CHECK(std::abs(pb.coeff(0b1) - 1.4) < 1e-15);
}

TEST_CASE("pullback commutes with d and with wedge") {
  std::mt19937_64 rng(10);
  auto sig = make_map(2, 4, [](const auto* t, auto* x) {
    x[0] = t[0] + t[1] * t[1] * 0.3;
    x[1] = t[1] - t[0] * t[1];
    x[2] = t[0] * t[0] * 0.5;
    x[3] = t[0] * 0.2 + t[1] * 0.7;
  });
  for (int t = 0; t < 10; ++t) {
    auto phi = random_poly_field(2, t % 2, rng);
    auto psi = random_poly_field(2, 1 - t % 2, rng);
    auto s = random_point(2, 0.5, rng);
    auto lhs = pullback(value_field(2, phi.degree + 1, [phi](const double* x) { return d(phi, x); }), sig, s.data());
    auto rhs = d(pullback_field(phi, sig), s);
    CHECK(diff(lhs, rhs) <= 1e-10);
    auto w1 = pullback(wedge(phi, psi), sig, s.data());
    auto w2 = wedge(pullback(phi, sig, s.data()), pullback(psi, sig, s.data()));
    CHECK(diff(w1, w2) <= 1e-12);
  }
}
