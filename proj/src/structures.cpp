#include "acx/structures.hpp"

#include <cmath>

namespace acx {

Box Box::cube(int dim, double half, const std::vector<double>& c) {
  Box b;
  for (int a = 0; a < dim; ++a) {
    double m = c.empty() ? 0.0 : c[a];
    b.lo.push_back(m - half);
    b.hi.push_back(m + half);
  }
  return b;
}

bool Box::contains(const double* x, double slack) const {
  for (int a = 0; a < dim(); ++a)
    if (x[a] < lo[a] - slack || x[a] > hi[a] + slack) return false;
  return true;
}

bool Box::contains(const Box& b) const {
  for (int a = 0; a < dim(); ++a)
    if (b.lo[a] < lo[a] || b.hi[a] > hi[a]) return false;
  return true;
}

double Box::volume() const {
  double v = 1.0;
  for (int a = 0; a < dim(); ++a) v *= std::max(0.0, hi[a] - lo[a]);
  return v;
}

std::vector<double> Box::center() const {
  std::vector<double> c(dim());
  for (int a = 0; a < dim(); ++a) c[a] = 0.5 * (lo[a] + hi[a]);
  return c;
}

static void check_domain(const AlmostComplexStructure& s, const double* x) {
  if (!s.domain.contains(x, 1e-12)) throw DomainViolation("point outside the validity box of " + s.kind);
  if (s.kind == "twisted" && std::abs(s.lambda) * std::hypot(x[2], x[3]) >= 1.0)
    throw DomainViolation("|lambda w| >= 1");
}

Eigen::MatrixXd AlmostComplexStructure::J(const double* x) const {
  check_domain(*this, x);
  int m = 2 * n;
  Eigen::MatrixXd M(m, m);
  std::vector<double> buf(m * m);
  eval(x, buf.data());
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) M(r, c) = buf[r * m + c];
  return M;
}

std::vector<Jet> AlmostComplexStructure::J_jet(const Jet* x) const {
  std::vector<double> xv(2 * n);
  for (int a = 0; a < 2 * n; ++a) xv[a] = x[a].v.real();
  check_domain(*this, xv.data());
  std::vector<Jet> out(4 * n * n);
  eval_jet(x, out.data());
  return out;
}

std::vector<Eigen::MatrixXd> AlmostComplexStructure::dJ(const double* x, const Engine& e) const {
  int m = 2 * n;
  std::vector<Eigen::MatrixXd> out(m, Eigen::MatrixXd(m, m));
  if (e.mode == Engine::Exact) {
    std::vector<Jet> xs(m);
    for (int a = 0; a < m; ++a) xs[a] = seed(x[a], a, m);
    auto Jj = J_jet(xs.data());
    for (int a = 0; a < m; ++a)
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) out[a](r, c) = Jj[r * m + c].g[a].real();
  } else {
    std::vector<double> xp(x, x + m), xm(x, x + m);
    for (int a = 0; a < m; ++a) {
      double h = e.h * std::max(1.0, std::abs(x[a]));
      xp[a] = x[a] + h;
      xm[a] = x[a] - h;
      out[a] = (J(xp.data()) - J(xm.data())) / (2 * h);
      xp[a] = xm[a] = x[a];
    }
  }
  return out;
}

AlmostComplexStructure make_standard(int n) {
  auto f = [n](const auto* x, auto* J) {
    (void)x;
    int m = 2 * n;
    for (int k = 0; k < m * m; ++k) J[k] = 0.0;
    for (int k = 0; k < n; ++k) {
      J[(2 * k + 1) * m + 2 * k] = 1.0;   // J e_{2k} = e_{2k+1}
      J[(2 * k) * m + 2 * k + 1] = -1.0;  // J e_{2k+1} = -e_{2k}
    }
  };
  // defined everywhere; the box only guards against non-finite input
  auto s = make_structure(n, "standard", Box::cube(2 * n, 1e150), f);
  return s;
}

AlmostComplexStructure make_twisted(double lambda, double half_width) {
  if (std::abs(lambda) > 1.0) throw DomainViolation("|lambda| must be at most 1");
  auto f = [lambda](const auto* x, auto* J) {
    // columns: J d/dx1, J d/dy1, J d/dx2, J d/dy2 for mu = lambda * conj(w)
    auto m1 = x[2] * lambda;
    auto m2 = x[3] * lambda;
    for (int k = 0; k < 16; ++k) J[k] = 0.0;
    J[1 * 4 + 0] = 1.0;
    J[2 * 4 + 0] = m2 * -2.0;
    J[3 * 4 + 0] = m1 * -2.0;
    J[0 * 4 + 1] = -1.0;
    J[2 * 4 + 1] = m1 * -2.0;
    J[3 * 4 + 1] = m2 * 2.0;
    J[3 * 4 + 2] = 1.0;
    J[2 * 4 + 3] = -1.0;
  };
  auto s = make_structure(2, "twisted", Box::cube(4, half_width), f);
  s.lambda = lambda;
  return s;
}

Eigen::MatrixXd twisted_by_assembly(double lambda, const Eigen::VectorXd& x) {
  const cplx I(0, 1);
  cplx mu = lambda * cplx(x(2), -x(3));
  Eigen::VectorXcd dz(4), dw(4), dzb(4), dwb(4);
  dz << 0.5, -0.5 * I, 0, 0;
  dzb << 0.5, 0.5 * I, 0, 0;
  dw << 0, 0, 0.5, -0.5 * I;
  dwb << 0, 0, 0.5, 0.5 * I;
  Eigen::MatrixXcd M(4, 4);
  M.col(0) = dz + std::conj(mu) * dwb;
  M.col(1) = dw;
  M.col(2) = dzb + mu * dw;
  M.col(3) = dwb;
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(4, 4);
  D.diagonal() << I, I, -I, -I;
  // J M = M D  =>  J^T = M^{-T} D^T M^T
  Eigen::MatrixXcd Jt = M.transpose().fullPivLu().solve((M * D).transpose());
  return Jt.transpose().real();
}

Eigen::VectorXcd CoordinateChart::operator()(const Eigen::VectorXd& x) const {
  Eigen::VectorXcd out(n);
  z(x.data(), out.data());
  return out;
}

double CoordinateChart::norm2(const double* x) const {
  std::vector<cplx> out(n);
  z(x, out.data());
  double s = 0;
  for (auto& c : out) s += std::norm(c);
  return s;
}

Eigen::MatrixXd CoordinateChart::real_linear() const {
  Eigen::MatrixXd L(2 * n, 2 * n);
  for (int j = 0; j < n; ++j) {
    L.row(2 * j) = A.row(j).real();
    L.row(2 * j + 1) = A.row(j).imag();
  }
  return L;
}

CoordinateChart linear_chart(const Eigen::VectorXd& center, const Eigen::MatrixXcd& A, std::string name) {
  CoordinateChart c;
  c.n = (int)A.rows();
  c.center = center;
  c.A = A;
  c.linear = true;
  c.name = std::move(name);
  auto f = [A, center](const auto* x, auto* z) {
    for (int j = 0; j < A.rows(); ++j) {
      z[j] = 0.0;
      for (int a = 0; a < A.cols(); ++a) z[j] = z[j] + (x[a] - center(a)) * A(j, a);
    }
  };
  c.z = [f](const double* x, cplx* z) { f(x, z); };
  c.z_jet = [f](const Jet* x, Jet* z) { f(x, z); };
  return c;
}

CoordinateChart adapted_chart(const AlmostComplexStructure& J, const Eigen::VectorXd& center) {
  BidegreeProjector P = projector_10(J.J(center));
  int n = J.n;
  Eigen::MatrixXcd A(n, 2 * n);
  for (int j = 0; j < n; ++j) A.row(j) = 2.0 * P.P10.col(2 * j).transpose();
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(A);
  if (lu.rank() < n) {
    // fall back to the column space of P10
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(P.P10);
    if (qr.rank() < n) throw DegenerateEigenspace("(1,0) space has rank < n");
    Eigen::MatrixXcd Q = qr.householderQ();
    A = Q.leftCols(n).transpose();
  }
  auto c = linear_chart(center, A, "adapted");
  return c;
}

CoordinateChart rotated_chart(const CoordinateChart& base, const Eigen::MatrixXcd& U) {
  CoordinateChart c = base;
  c.A = U * base.A;
  c.name = base.name + "+rotated";
  auto zb = base.z;
  auto zj = base.z_jet;
  int n = base.n;
  c.z = [zb, U, n](const double* x, cplx* z) {
    std::vector<cplx> w(n);
    zb(x, w.data());
    for (int j = 0; j < n; ++j) {
      z[j] = 0.0;
      for (int k = 0; k < n; ++k) z[j] += U(j, k) * w[k];
    }
  };
  c.z_jet = [zj, U, n](const Jet* x, Jet* z) {
    std::vector<Jet> w(n);
    zj(x, w.data());
    for (int j = 0; j < n; ++j) {
      z[j] = 0.0;
      for (int k = 0; k < n; ++k) z[j] = z[j] + w[k] * U(j, k);
    }
  };
  return c;
}

CoordinateChart perturbed_chart(const CoordinateChart& base, const std::vector<Eigen::MatrixXcd>& q) {
  CoordinateChart c = base;
  c.linear = false;
  c.name = base.name + "+quadratic";
  int n = base.n;
  auto apply = [q, n](auto* w, auto* z) {
    for (int j = 0; j < n; ++j) {
      z[j] = w[j];
      for (int k = 0; k < n; ++k)
        for (int l = k; l < n; ++l)
          if (q[j](k, l) != cplx(0.0)) z[j] = z[j] + w[k] * w[l] * q[j](k, l);
    }
  };
  auto zb = base.z;
  auto zj = base.z_jet;
  c.z = [zb, apply, n](const double* x, cplx* z) {
    std::vector<cplx> w(n);
    zb(x, w.data());
    apply(w.data(), z);
  };
  c.z_jet = [zj, apply, n](const Jet* x, Jet* z) {
    std::vector<Jet> w(n);
    zj(x, w.data());
    apply(w.data(), z);
  };
  return c;
}

static std::vector<Jet> chart_jets(const CoordinateChart& c, const Eigen::VectorXd& x) {
  int m = 2 * c.n;
  std::vector<Jet> xs(m), z(c.n);
  for (int a = 0; a < m; ++a) xs[a] = seed(x(a), a, m);
  c.z_jet(xs.data(), z.data());
  return z;
}

double dbar_chart(const AlmostComplexStructure& J, const CoordinateChart& c, const Eigen::VectorXd& x) {
  BidegreeProjector P = projector_10(J.J(x));
  Eigen::MatrixXcd P01 = P.P01();
  auto z = chart_jets(c, x);
  double worst = 0;
  for (int j = 0; j < c.n; ++j) {
    Eigen::VectorXcd g(2 * c.n);
    for (int a = 0; a < 2 * c.n; ++a) g(a) = z[j].g[a];
    worst = std::max(worst, (P01 * g).norm());
  }
  return worst;
}

ChartCheck check_chart(const AlmostComplexStructure& J, const CoordinateChart& c) {
  ChartCheck r;
  r.dbar_at_center = dbar_chart(J, c, c.center);
  auto z = chart_jets(c, c.center);
  Eigen::MatrixXd L(2 * c.n, 2 * c.n);
  for (int j = 0; j < c.n; ++j)
    for (int a = 0; a < 2 * c.n; ++a) {
      L(2 * j, a) = z[j].g[a].real();
      L(2 * j + 1, a) = z[j].g[a].imag();
    }
  r.det_differential = L.determinant();
  r.ok = r.dbar_at_center <= 1e-10 && std::abs(r.det_differential) > 1e-12;
  return r;
}

Eigen::VectorXd nijenhuis(const AlmostComplexStructure& J, const Eigen::VectorXd& x, const Eigen::VectorXd& X,
                          const Eigen::VectorXd& Y, const Engine& e) {
  const int m = 2 * J.n;
  Eigen::MatrixXd J0 = J.J(x);
  auto D = J.dJ(x.data(), e);
  auto dir = [&](const Eigen::VectorXd& v) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (int a = 0; a < m; ++a) M += v(a) * D[a];
    return M;
  };
  // constant extensions of X, Y; the result is tensorial
  Eigen::VectorXd JX = J0 * X, JY = J0 * Y;
  Eigen::VectorXd br_JX_JY = dir(JX) * Y - dir(JY) * X;
  Eigen::VectorXd br_JX_Y = -dir(Y) * X;
  Eigen::VectorXd br_X_JY = dir(X) * Y;
  return br_JX_JY - J0 * br_JX_Y - J0 * br_X_JY;
}

}  // namespace acx
