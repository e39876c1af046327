#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <numeric>
#include <random>

#include "acx/algebra.hpp"
#include "acx/structures.hpp"

using namespace acx;

namespace {

ExteriorValue random_form(int n, int k, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ExteriorValue v(n);
  for (std::uint32_t m = 0; m < (1u << (2 * n)); ++m)
    if (std::popcount(m) == k) v.terms.push_back({m, cplx(g(rng), g(rng))});
  return v;
}

// antisymmetric extension of a coefficient to an arbitrary index tuple
cplx tensor_entry(const ExteriorValue& v, std::vector<int> idx) {
  int sign = 1;
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      if (idx[i] == idx[j]) return 0.0;
      if (idx[i] > idx[j]) sign = -sign;
    }
  std::uint32_t m = 0;
  for (int a : idx) m |= 1u << a;
  return double(sign) * v.coeff(m);
}

int perm_sign(const std::vector<int>& p) {
  int s = 1;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j)
      if (p[i] > p[j]) s = -s;
  return s;
}

// (a^b)_I = 1/(k! l!) sum_sigma sgn(sigma) a(I_sigma[0..k)) b(I_sigma[k..))
ExteriorValue shuffle_oracle(const ExteriorValue& a, const ExteriorValue& b, int k, int l) {
  int n = a.n;
  ExteriorValue r(n);
  double norm = std::tgamma(k + 1) * std::tgamma(l + 1);
  for (std::uint32_t m = 0; m < (1u << (2 * n)); ++m) {
    if (std::popcount(m) != k + l) continue;
    std::vector<int> I;
    for (int x = 0; x < 2 * n; ++x)
      if (m & (1u << x)) I.push_back(x);
    std::vector<int> p(k + l);
    std::iota(p.begin(), p.end(), 0);
    cplx s = 0;
    do {
      std::vector<int> A, B;
      for (int i = 0; i < k; ++i) A.push_back(I[p[i]]);
      for (int i = k; i < k + l; ++i) B.push_back(I[p[i]]);
      s += double(perm_sign(p)) * tensor_entry(a, A) * tensor_entry(b, B);
    } while (std::next_permutation(p.begin(), p.end()));
    r.terms.push_back({m, s / norm});
  }
  prune(r);
  return r;
}

double diff(const ExteriorValue& a, const ExteriorValue& b) { return max_abs(a - b); }

Eigen::MatrixXd random_J(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd S(2 * n, 2 * n);
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < 2 * n; ++j) S(i, j) = (i == j ? 2.0 : 0.0) + 0.4 * g(rng);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2 * n);
  return S * make_standard(n).J(zero) * S.inverse();
}

}  // namespace

TEST_CASE("projector of the standard structure sends dx to dz/2") {
  Eigen::Matrix2d J;
  J << 0, -1, 1, 0;
  auto P = projector_10(J);
  Eigen::VectorXcd e0(2);
  e0 << 1, 0;
  Eigen::VectorXcd img = P.P10 * e0;
  CHECK(std::abs(img(0) - 0.5) < 1e-15);
  CHECK(std::abs(img(1) - cplx(0, 0.5)) < 1e-15);
}

TEST_CASE("projector invariants on random structures") {
  std::mt19937_64 rng(7);
  for (int n = 1; n <= 3; ++n)
    for (int t = 0; t < 5; ++t) {
      Eigen::MatrixXd J = random_J(n, rng);
      auto P = projector_10(J);
      int m = 2 * n;
      CHECK((P.P10 * P.P10 - P.P10).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((P.P10 + P.P01() - Eigen::MatrixXcd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::FullPivLU<Eigen::MatrixXcd> lu(P.P10);
      lu.setThreshold(1e-10);
      CHECK(lu.rank() == n);
    }
}

TEST_CASE("projector matches a dense eigen-decomposition for the twisted family") {
  auto T = make_twisted(0.1);
  Eigen::VectorXd x(4);
  x << 0.3, 0.0, 0.2, -0.1;
  Eigen::MatrixXd J = T.J(x);
  auto P = projector_10(J);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(J.transpose().cast<cplx>());
  int plus = 0;
  for (int k = 0; k < 4; ++k) {
    cplx ev = es.eigenvalues()(k);
    Eigen::VectorXcd v = es.eigenvectors().col(k);
    if (std::abs(ev - cplx(0, 1)) < 1e-9) {
      ++plus;
      CHECK((P.P10 * v - v).norm() <= 1e-10);
    } else {
      CHECK(std::abs(ev + cplx(0, 1)) < 1e-9);
      CHECK((P.P10 * v).norm() <= 1e-10);
    }
  }
  CHECK(plus == 2);
}

TEST_CASE("projector rejects matrices that do not square to -Id") {
  Eigen::Matrix2d J;
  J << 0, -1, 1.1, 0;
  CHECK_THROWS_AS(projector_10(J), NotAlmostComplex);
}

TEST_CASE("bidegree of dz and dzbar^dz on the standard plane") {
  Eigen::Matrix2d J;
  J << 0, -1, 1, 0;
  auto P = projector_10(J);
  auto s = bidegree_split(dz(1, 0), P);
  CHECK(diff(s.at(1, 0), dz(1, 0)) < 1e-15);
  CHECK(max_abs(s.at(0, 1)) == 0.0);
  auto v = wedge(dzbar(1, 0), dz(1, 0));
  auto s2 = bidegree_split(v, P);
  CHECK(diff(s2.at(1, 1), v) < 1e-15);
  CHECK(bidegree_of(v, P) == std::pair<int, int>{1, 1});
}

TEST_CASE("bidegree split reconstructs, is idempotent and commutes with conjugation") {
  std::mt19937_64 rng(11);
  auto T = make_twisted(0.1);
  Eigen::VectorXd x(4);
  x << 0.1, -0.2, 0.3, 0.15;
  auto P = projector_10(T.J(x));
  for (int k = 0; k <= 4; ++k) {
    auto v = random_form(2, k, rng);
    auto s = bidegree_split(v, P);
    ExteriorValue sum(2);
    for (auto& part : s.parts) sum = sum + part;
    CHECK(diff(sum, v) < 1e-12);
    for (int p = 0; p <= k; ++p) {
      auto again = bidegree_split(s.parts[p], P, k);
      CHECK(diff(again.parts[p], s.parts[p]) < 1e-12);
      auto sc = bidegree_split(conj(v), P);
      CHECK(diff(sc.parts[k - p], conj(s.parts[p])) < 1e-12);
    }
  }
  ExteriorValue mixed = dx(2, 0) + wedge(dx(2, 1), dx(2, 2));
  CHECK_THROWS_AS(bidegree_split(mixed, P), MixedDegree);
}

TEST_CASE("wedge: repeated factors vanish") {
  CHECK(wedge(dz(1, 0), dz(1, 0)).empty());
  std::mt19937_64 rng(3);
  auto a = random_form(2, 1, rng), b = random_form(2, 1, rng);
  auto w = scale(wedge(a, b), cplx(0, 1));
  CHECK(max_abs(wedge(w, w)) < 1e-13);
}

TEST_CASE("wedge agrees with the brute-force shuffle expansion") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pick(0, 1000);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    int n = 1 + t % 3;
    int k = pick(rng) % (2 * n + 1);
    int l = pick(rng) % (2 * n + 1 - k);
    auto a = random_form(n, k, rng), b = random_form(n, l, rng);
    CHECK(diff(wedge(a, b), shuffle_oracle(a, b, k, l)) < 1e-11);
    double sgn = ((k * l) % 2) ? -1.0 : 1.0;
    CHECK(diff(wedge(a, b), scale(wedge(b, a), sgn)) < 1e-11);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("wedge is associative") {
  std::mt19937_64 rng(5);
  auto a = random_form(3, 1, rng), b = random_form(3, 2, rng), c = random_form(3, 2, rng);
  CHECK(diff(wedge(wedge(a, b), c), wedge(a, wedge(b, c))) < 1e-11);
  CHECK_THROWS_AS(wedge(random_form(1, 1, rng), random_form(2, 1, rng)), DimensionMismatch);
}

TEST_CASE("strongly positive forms") {
  StronglyPositiveDecomposition d1;
  d1.n = 1;
  d1.lambda = {1.0};
  Eigen::VectorXcd a(2);
  a << 1, cplx(0, 1);
  d1.alpha = {{a}};
  auto v = strongly_positive_form(d1);
  CHECK(diff(v, ExteriorValue::basis(1, 0b11, 2.0)) < 1e-15);

  StronglyPositiveDecomposition d2;
  d2.n = 2;
  d2.lambda = {1.0, 1.0};
  Eigen::VectorXcd z1(4), z2(4);
  z1 << 1, cplx(0, 1), 0, 0;
  z2 << 0, 0, 1, cplx(0, 1);
  d2.alpha = {{z1, z2}, {z1 + z2, z1 - z2}};
  auto vol = strongly_positive_form(d2);
  // i dz1^dzb1 ^ i dz2^dzb2 = 4 dV; the second term contributes |det|^2 = 4 times that
  CHECK(vol.terms.size() == 1);
  CHECK(std::abs(vol.top() - 20.0) < 1e-12);

  StronglyPositiveDecomposition d3;
  d3.n = 2;
  CHECK(strongly_positive_form(d3).empty());

  d1.lambda = {-1.0};
  CHECK_THROWS_AS(strongly_positive_form(d1), NegativeWeight);
}

TEST_CASE("strongly positive outputs pass the positivity sampler") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  auto T = make_twisted(0.2);
  Eigen::VectorXd x(4);
  x << 0.2, 0.1, -0.3, 0.25;
  Eigen::MatrixXd J = T.J(x);
  auto P = projector_10(J);
  for (int p = 1; p <= 2; ++p)
    for (int t = 0; t < 5; ++t) {
      StronglyPositiveDecomposition d;
      d.n = 2;
      d.anchor_J = J;
      for (int j = 0; j < 3; ++j) {
        d.lambda.push_back(std::abs(g(rng)));
        std::vector<Eigen::VectorXcd> al;
        for (int k = 0; k < p; ++k) {
          Eigen::VectorXcd r(4);
          for (int a = 0; a < 4; ++a) r(a) = cplx(g(rng), g(rng));
          al.push_back(P.P10 * r);
        }
        d.alpha.push_back(al);
      }
      auto v = strongly_positive_form(d);
      auto res = is_positive_sample(v, J, 1, 500, 1e-12);
      CHECK(res.positive);
    }
}

TEST_CASE("positivity sampler on the standard examples") {
  Eigen::Matrix2d J;
  J << 0, -1, 1, 0;
  auto neg = scale(wedge(dz(1, 0), dzbar(1, 0)), cplx(0, -1));
  auto r = is_positive_sample(neg, J, 1, 100, 0.0);
  CHECK_FALSE(r.positive);
  REQUIRE(r.witness.size() == 1);
  CHECK(r.witness[0](0) == 1.0);
  CHECK(r.witness[0](1) == 0.0);

  auto beta1 = scale(wedge(dz(1, 0), dzbar(1, 0)), cplx(0, 0.5));
  CHECK(is_positive_sample(beta1, J, 1, 100, 0.0).positive);

  Eigen::MatrixXd J2 = make_standard(2).J(Eigen::VectorXd::Zero(4));
  auto indef = scale(wedge(dz(2, 0), dzbar(2, 1)) + wedge(dz(2, 1), dzbar(2, 0)), cplx(0, 1));
  // hermitian matrix [[0,1],[1,0]] has eigenvalue -1
  Eigen::Matrix2d H;
  H << 0, 1, 1, 0;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(H);
  REQUIRE(es.eigenvalues()(0) < 0);
  auto r2 = is_positive_sample(indef, J2, 42, 10000, 1e-12);
  CHECK_FALSE(r2.positive);
  CHECK(r2.min_value < 0);

  CHECK_THROWS_AS(is_positive_sample(dz(1, 0), J, 1, 10, 0.0), WrongBidegree);
}
