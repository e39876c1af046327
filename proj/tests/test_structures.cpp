#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "acx/structures.hpp"

using namespace acx;

namespace {
Eigen::VectorXd pt(double a, double b, double c, double d) {
  Eigen::VectorXd x(4);
  x << a, b, c, d;
  return x;
}
Eigen::VectorXd random_point(std::mt19937_64& rng, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  return pt(u(rng), u(rng), u(rng), u(rng));
}
}  // namespace

TEST_CASE("standard structure matrices") {
  Eigen::Matrix2d expect;
  expect << 0, -1, 1, 0;
  CHECK((make_standard(1).J(Eigen::VectorXd::Zero(2)) - expect).norm() == 0.0);
  Eigen::MatrixXd J2 = make_standard(2).J(pt(0.3, -1, 2, 0.5));
  CHECK((J2.topLeftCorner(2, 2) - expect).norm() == 0.0);
  CHECK((J2.bottomRightCorner(2, 2) - expect).norm() == 0.0);
  CHECK(J2.topRightCorner(2, 2).norm() == 0.0);
}

TEST_CASE("standard structure is integrable") {
  auto J = make_standard(2);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    auto x = random_point(rng, 1.0), X = random_point(rng, 1.0), Y = random_point(rng, 1.0);
    CHECK(nijenhuis(J, x, X, Y).norm() <= 1e-10);
  }
}

TEST_CASE("twisted family at lambda = 0 is the standard structure") {
  auto T = make_twisted(0.0);
  auto S = make_standard(2);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    auto x = random_point(rng, 0.6);
    CHECK((T.J(x) - S.J(x)).norm() == 0.0);
  }
}

TEST_CASE("twisted family squares to -Id and matches the eigenbasis assembly") {
  auto T = make_twisted(0.1);
  auto x = pt(0.2, 0.0, 0.3, 0.1);
  Eigen::MatrixXd J = T.J(x);
  CHECK((J * J + Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
  std::mt19937_64 rng(3);
  for (double lam : {0.1, 0.5, -0.8}) {
    auto Tl = make_twisted(lam);
    for (int t = 0; t < 20; ++t) {
      auto y = random_point(rng, 0.6);
      CHECK((Tl.J(y) - twisted_by_assembly(lam, y)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("twisted family converges to the standard structure linearly in lambda") {
  auto S = make_standard(2);
  std::mt19937_64 rng(4);
  for (double lam : {0.2, 0.1, 0.05}) {
    auto T = make_twisted(lam);
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
      auto x = random_point(rng, 0.7);
      worst = std::max(worst, (T.J(x) - S.J(x)).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 2.0 * 0.7 * lam + 1e-15);
  }
}

TEST_CASE("twisted family rejects points outside its validity box") {
  auto T = make_twisted(0.5);
  CHECK_THROWS_AS(T.J(pt(0, 0, 0.9, 0)), DomainViolation);
  CHECK_THROWS_AS(make_twisted(1.5), DomainViolation);
}

TEST_CASE("nijenhuis tensor of the twisted family") {
  auto x = pt(0.1, -0.05, 0.2, 0.15);
  auto X = pt(1, 0, 0, 0), Y = pt(0, 0, 1, 0);
  auto N1 = nijenhuis(make_twisted(0.1), x, X, Y);
  auto N2 = nijenhuis(make_twisted(0.2), x, X, Y);
  CHECK(N1.norm() > 1e-3);
  // J is affine in lambda, so N is lambda-linear up to an O(lambda^2) term
  CHECK(N2.norm() / N1.norm() == doctest::Approx(2.0).epsilon(0.1));
  Engine fd;
  fd.mode = Engine::Central;
  auto Nfd = nijenhuis(make_twisted(0.2), x, X, Y, fd);
  CHECK((Nfd - N2).norm() <= 1e-8);

  auto T = make_twisted(0.2);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    auto p = random_point(rng, 0.5), A = random_point(rng, 1), B = random_point(rng, 1);
    CHECK(nijenhuis(T, p, A, A).norm() <= 1e-12);
    CHECK((nijenhuis(T, p, A, B) + nijenhuis(T, p, B, A)).norm() <= 1e-12);
    Eigen::VectorXd JA = T.J(p) * A;
    CHECK((nijenhuis(T, p, JA, B) + T.J(p) * nijenhuis(T, p, A, B)).norm() <= 1e-12);
  }
}

TEST_CASE("adapted chart of the standard structure") {
  auto S = make_standard(2);
  auto c = adapted_chart(S, Eigen::VectorXd::Zero(4));
  auto z = c(pt(0.1, 0.2, 0.3, 0.4));
  CHECK(std::abs(z(0) - cplx(0.1, 0.2)) < 1e-15);
  CHECK(std::abs(z(1) - cplx(0.3, 0.4)) < 1e-15);
  CHECK(check_chart(S, c).ok);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) CHECK(dbar_chart(S, c, random_point(rng, 1.0)) <= 1e-14);
}

TEST_CASE("adapted chart of the twisted structure has dbar z = O(|x|)") {
  auto T = make_twisted(0.1);
  auto c = adapted_chart(T, Eigen::VectorXd::Zero(4));
  auto chk = check_chart(T, c);
  CHECK(chk.ok);
  CHECK(chk.dbar_at_center <= 1e-10);
  std::mt19937_64 rng(7);
  double ratio = 0;
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd x = random_point(rng, 0.3);
    ratio = std::max(ratio, dbar_chart(T, c, x) / x.norm());
  }
  CHECK(ratio > 0);
  CHECK(ratio <= 2 * 0.1 + 1e-12);
  // off-centre adapted chart
  auto c2 = adapted_chart(T, pt(0.1, 0.1, 0.3, -0.2));
  CHECK(check_chart(T, c2).ok);
}

TEST_CASE("rotated and quadratically perturbed charts keep the chart invariants") {
  auto T = make_twisted(0.1);
  auto c = adapted_chart(T, Eigen::VectorXd::Zero(4));
  Eigen::MatrixXcd U(2, 2);
  double th = 0.7;
  U << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  CHECK(check_chart(T, rotated_chart(c, U)).ok);
  std::vector<Eigen::MatrixXcd> q(2, Eigen::MatrixXcd::Zero(2, 2));
  q[0](0, 1) = cplx(0.3, 0.1);
  q[1](1, 1) = 0.5;
  auto cp = perturbed_chart(c, q);
  CHECK_FALSE(cp.linear);
  CHECK(check_chart(T, cp).ok);
  auto x = pt(0.1, 0.0, 0.2, 0.0);
  CHECK(std::abs(cp(x)(1) - (cplx(0.2) + 0.5 * cplx(0.04))) < 1e-14);
}
