#include "acx/algebra.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace acx {

cplx evaluate(const ExteriorValue& v, const Eigen::MatrixXd& U) {
  int k = (int)U.cols();
  cplx s = 0.0;
  for (auto& [m, c] : v.terms) {
    if (std::popcount(m) != k) continue;
    Eigen::MatrixXd sub(k, k);
    int row = 0;
    for (int a = 0; a < 2 * v.n; ++a)
      if (m & (1u << a)) sub.row(row++) = U.row(a);
    s += c * (k == 0 ? 1.0 : sub.determinant());
  }
  return s;
}

BidegreeProjector projector_10(const Eigen::MatrixXd& J) {
  const int m = (int)J.rows();
  if (m != J.cols() || m % 2) throw DimensionMismatch("J must be square of even size");
  Eigen::MatrixXd sq = J * J + Eigen::MatrixXd::Identity(m, m);
  if (sq.cwiseAbs().maxCoeff() > 1e-10) throw NotAlmostComplex("J^2 differs from -Id");
  BidegreeProjector P;
  P.n = m / 2;
  P.P10 = (Eigen::MatrixXcd::Identity(m, m) - cplx(0, 1) * J.transpose().cast<cplx>()) * 0.5;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(P.P10);
  lu.setThreshold(1e-10);
  if (lu.rank() != P.n) throw DegenerateEigenspace("rank of P10 is not n");
  return P;
}

std::pair<int, int> bidegree_of(const ExteriorValue& v, const BidegreeProjector& P, double tol) {
  auto s = bidegree_split(v, P);
  int found = -1;
  double scale = std::max(1.0, max_abs(v));
  for (int p = 0; p <= s.k; ++p) {
    if (max_abs(s.parts[p]) > tol * scale) {
      if (found >= 0) throw MixedBidegree("value has several bidegree components");
      found = p;
    }
  }
  if (found < 0) return {-1, -1};
  return {found, s.k - found};
}

ExteriorValue covector(const Eigen::VectorXcd& a) {
  int n = (int)a.size() / 2;
  ExteriorValue r(n);
  for (int b = 0; b < a.size(); ++b) r.terms.push_back({1u << b, a(b)});
  prune(r);
  return r;
}

ExteriorValue strongly_positive_form(const StronglyPositiveDecomposition& dec) {
  ExteriorValue total(dec.n);
  std::optional<BidegreeProjector> P;
  if (dec.anchor_J) P = projector_10(*dec.anchor_J);
  for (std::size_t j = 0; j < dec.lambda.size(); ++j) {
    if (dec.lambda[j] < 0) throw NegativeWeight("lambda_j must be nonnegative");
    ExteriorValue term = ExteriorValue::scalar(dec.n, dec.lambda[j]);
    for (auto& a : dec.alpha[j]) {
      if (P) {
        double res = (P->P10 * a - a).norm();
        if (res > 1e-10 * std::max(1.0, a.norm())) throw WrongBidegree("alpha is not a (1,0) covector");
      }
      ExteriorValue al = covector(a);
      term = wedge(term, scale(wedge(al, conj(al)), cplx(0, 1)));
    }
    total = total + term;
  }
  return total;
}

PositivityResult is_positive_sample(const ExteriorValue& v, const Eigen::MatrixXd& J, std::uint64_t seed,
                                    int m, double tol) {
  BidegreeProjector P = projector_10(J);
  auto [p, q] = bidegree_of(v, P);
  PositivityResult res;
  if (p < 0) return res;
  if (p != q) throw WrongBidegree("positivity needs bidegree (p,p)");
  const int dim = 2 * P.n;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  res.min_value = INFINITY;
  auto try_tuple = [&](const std::vector<Eigen::VectorXd>& xi) {
    Eigen::MatrixXd U(dim, 2 * p);
    for (int k = 0; k < p; ++k) {
      U.col(2 * k) = xi[k];
      U.col(2 * k + 1) = J * xi[k];
    }
    double val = evaluate(v, U).real();
    if (val < res.min_value) {
      res.min_value = val;
      if (val < -tol) {
        res.positive = false;
        res.witness = xi;
      }
    }
  };
  // coordinate directions first, then random tuples
  for (int a = 0; a < dim && res.positive; ++a) {
    std::vector<Eigen::VectorXd> xi(p, Eigen::VectorXd::Unit(dim, a));
    for (int k = 1; k < p; ++k) xi[k] = Eigen::VectorXd::Unit(dim, (a + 2 * k) % dim);
    try_tuple(xi);
  }
  for (int s = 0; s < m && res.positive; ++s) {
    std::vector<Eigen::VectorXd> xi(p, Eigen::VectorXd(dim));
    for (auto& x : xi)
      for (int a = 0; a < dim; ++a) x(a) = gauss(rng);
    try_tuple(xi);
  }
  return res;
}

ExteriorValue dx(int n, int a) { return ExteriorValue::basis(n, 1u << a); }
ExteriorValue dz(int n, int j) { return dx(n, 2 * j) + scale(dx(n, 2 * j + 1), cplx(0, 1)); }
ExteriorValue dzbar(int n, int j) { return dx(n, 2 * j) + scale(dx(n, 2 * j + 1), cplx(0, -1)); }

double max_abs(const ExteriorValue& v) {
  double m = 0;
  for (auto& t : v.terms) m = std::max(m, std::abs(t.second));
  return m;
}

}  // namespace acx
