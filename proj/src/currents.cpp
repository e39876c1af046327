#include "acx/currents.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace acx {

// ---------------------------------------------------------------- test forms

TestForm bump_form(const Box& support, const FormField& coeff, std::string name, BumpProfile profile) {
  auto c = support.center();
  std::vector<double> h(c.size());
  for (std::size_t a = 0; a < c.size(); ++a) h[a] = 0.5 * (support.hi[a] - support.lo[a]);
  FormField f;
  f.n = coeff.n;
  f.degree = coeff.degree;
  f.name = "bump*" + coeff.name;
  auto ce = coeff.eval;
  const int n = coeff.n;
  f.eval = [ce, c, h, n, profile](const double* x) {
    cplx b = bump_value<double>(x, c, h, profile);
    if (b == 0.0) return ExteriorValue(n);
    return scale(ce(x), b);
  };
  f.jet_order = coeff.has_jets() ? coeff.jet_order : 0;
  if (coeff.has_jets()) {
    auto cj = coeff.eval_jet;
    f.eval_jet = [cj, c, h, n, profile](const Jet* x) {
      Jet b = bump_value<Jet>(x, c, h, profile);
      if (b.v == 0.0) return Ext<Jet>(n);
      return scale(cj(x), b);
    };
  }
  return TestForm{f, support, name.empty() ? f.name : std::move(name)};
}

FormField constant_field(const ExteriorValue& v) {
  int k = std::max(v.degree(), 0);
  return make_field(v.n, k,
                    [v]<class S>(const S*) {
                      Ext<coeff_t<S>> r(v.n);
                      for (auto& [m, c] : v.terms) r.terms.push_back({m, coeff_t<S>(c)});
                      return r;
                    },
                    "const");
}

FormField scalar_field_one(int n) { return constant_field(ExteriorValue::scalar(n, 1.0)); }

// ---------------------------------------------------------------- base current

PairResult Current::pair(const TestForm& psi, const QuadratureConfig& cfg) const {
  if (psi.field.n != n) throw DimensionMismatch("test form lives on a different dimension");
  if (psi.degree() != test_degree)
    throw BidegreeMismatch("current '" + name + "' pairs with " + std::to_string(test_degree) + "-forms, got degree " +
                           std::to_string(psi.degree()));
  cfg.validate();
  return pair_impl(psi, cfg);
}

static PairResult from_quad(const QuadResult& q) { return {q.value, q.error, q.converged}; }

namespace {

// bounding box of {|z(x)| <= R}
Box chart_ball_box(const CoordinateChart& chart, double R) {
  const int m = 2 * chart.n;
  Eigen::MatrixXd L = chart.real_linear();
  Eigen::MatrixXd Li = L.inverse();
  std::vector<double> half(m);
  for (int a = 0; a < m; ++a) half[a] = R * Li.row(a).norm() * (chart.linear ? 1.0 + 1e-9 : 1.5);
  auto make = [&] {
    Box b{std::vector<double>(m), std::vector<double>(m)};
    for (int a = 0; a < m; ++a) {
      b.lo[a] = chart.center[a] - half[a];
      b.hi[a] = chart.center[a] + half[a];
    }
    return b;
  };
  if (chart.linear) return make();
  // enlarge until sampled boundary faces lie outside the ball
  const int g = 5;
  for (int it = 0; it < 8; ++it) {
    Box b = make();
    bool inside = false;
    std::vector<double> x(m);
    for (int face = 0; face < 2 * m && !inside; ++face) {
      int ax = face / 2;
      long total = 1;
      for (int a = 0; a < m - 1; ++a) total *= g;
      for (long idx = 0; idx < total && !inside; ++idx) {
        long r = idx;
        for (int a = 0; a < m; ++a) {
          if (a == ax) {
            x[a] = (face & 1) ? b.hi[a] : b.lo[a];
            continue;
          }
          int k = r % g;
          r /= g;
          x[a] = b.lo[a] + (b.hi[a] - b.lo[a]) * k / (g - 1);
        }
        if (chart.norm2(x.data()) <= R * R) inside = true;
      }
    }
    if (!inside) return b;
    for (auto& h : half) h *= 1.5;
  }
  throw DomainViolation("could not bound the chart ball");
}

template <class S>
coeff_t<S> chart_norm2(const CoordinateChart& chart, const S* x) {
  if constexpr (std::is_same_v<S, double>) {
    return cplx(chart.norm2(x));
  } else {
    std::vector<Jet> z(chart.n);
    chart.z_jet(x, z.data());
    Jet s(0.0);
    for (auto& zj : z) s = s + zj * conj(zj);
    return real(s);
  }
}

// S((r + h/2 - |z|)/h)
FormField ball_indicator(const CoordinateChart& chart, double r, double h) {
  return make_field(chart.n, 0,
                    [chart, r, h]<class S>(const S* x) {
                      auto rho2 = chart_norm2<S>(chart, x);
                      coeff_t<S> v;
                      if constexpr (std::is_same_v<S, double>) {
                        v = smooth_step((r + 0.5 * h - std::sqrt(rho2.real())) / h);
                      } else {
                        v = smooth_step((r + 0.5 * h - sqrt(rho2)) * (1.0 / h));
                      }
                      return Ext<coeff_t<S>>::scalar(chart.n, v);
                    },
                    "ball");
}

FormField box_indicator(const Box& box, const std::vector<double>& h) {
  int n = box.dim() / 2;
  return make_field(n, 0,
                    [box, h, n]<class S>(const S* x) {
                      coeff_t<S> v = 1.0;
                      for (int a = 0; a < box.dim(); ++a) {
                        if constexpr (std::is_same_v<S, double>) {
                          v *= smooth_step((x[a] - box.lo[a]) / h[a] + 0.5) * smooth_step((box.hi[a] - x[a]) / h[a] + 0.5);
                        } else {
                          Jet xa = x[a];
                          v = v * smooth_step((xa - box.lo[a]) * (1.0 / h[a]) + 0.5) *
                              smooth_step((box.hi[a] - xa) * (1.0 / h[a]) + 0.5);
                        }
                      }
                      return Ext<coeff_t<S>>::scalar(n, v);
                    },
                    "boxind");
}

// M(0) from M(h), M(h/2), M(h/4) with error terms in h^2 and h^4
PairResult richardson3(const PairResult& m1, const PairResult& m2, const PairResult& m3) {
  PairResult r;
  r.value = (64.0 * m3.value - 20.0 * m2.value + m1.value) / 45.0;
  cplx r2 = (4.0 * m3.value - m2.value) / 3.0;
  r.error = std::abs(r.value - r2) + (64 * m3.error + 20 * m2.error + m1.error) / 45.0;
  r.converged = m1.converged && m2.converged && m3.converged;
  return r;
}

}  // namespace

PairResult Current::ball_integral(const CoordinateChart& chart, double r, const FormField& weight,
                                  const QuadratureConfig& cfg) const {
  if (weight.degree != test_degree) throw BidegreeMismatch("weight degree does not match the current");
  PairResult m[3];
  for (int k = 0; k < 3; ++k) {
    double h = 0.5 * r / (1 << k);
    Box box = chart_ball_box(chart, r + 0.5 * h);
    TestForm psi{wedge(ball_indicator(chart, r, h), weight), box, "ball"};
    // the cutoff lives on a shell of width h that coarse cells can miss entirely; forcing
    // cells down to that width is affordable on curves only
    QuadratureConfig c = cfg;
    if (quadrature_dim() <= 2)
      c.hints.push_back({[chart, r](const double* x) { return std::sqrt(chart.norm2(x)) - r; }, 0.5 * h});
    m[k] = pair(psi, c);
  }
  return richardson3(m[0], m[1], m[2]);
}

PairResult Current::box_integral(const Box& box, const FormField& weight, const QuadratureConfig& cfg) const {
  if (weight.degree != test_degree) throw BidegreeMismatch("weight degree does not match the current");
  PairResult m[3];
  for (int k = 0; k < 3; ++k) {
    std::vector<double> h(box.dim());
    Box sup = box;
    for (int a = 0; a < box.dim(); ++a) {
      h[a] = 0.25 * (box.hi[a] - box.lo[a]) / (1 << k);
      sup.lo[a] -= 0.5 * h[a];
      sup.hi[a] += 0.5 * h[a];
    }
    TestForm psi{wedge(box_indicator(box, h), weight), sup, "box"};
    m[k] = pair(psi, cfg);
  }
  return richardson3(m[0], m[1], m[2]);
}

// ---------------------------------------------------------------- smooth

SmoothCurrent::SmoothCurrent(FormField f, std::string nm) : form(std::move(f)) {
  n = form.n;
  test_degree = 2 * n - form.degree;
  name = std::move(nm);
}

PairResult SmoothCurrent::pair_impl(const TestForm& psi, const QuadratureConfig& cfg) const {
  const int nn = n;
  auto fe = form.eval, pe = psi.field.eval;
  Integrand g = [fe, pe, nn](const double* x) -> cplx {
    ExteriorValue p = pe(x);
    if (p.empty()) return 0.0;
    return wedge(fe(x), p).top();
  };
  return from_quad(integrate(psi.support, g, cfg));
}

PairResult SmoothCurrent::box_integral(const Box& box, const FormField& weight, const QuadratureConfig& cfg) const {
  if (weight.degree != test_degree) throw BidegreeMismatch("weight degree does not match the current");
  auto fe = form.eval, we = weight.eval;
  Integrand g = [fe, we](const double* x) -> cplx { return wedge(fe(x), we(x)).top(); };
  return from_quad(integrate(box, g, cfg));
}

PairResult SmoothCurrent::ball_integral(const CoordinateChart& chart, double r, const FormField& weight,
                                        const QuadratureConfig& cfg) const {
  if (!chart.linear) return Current::ball_integral(chart, r, weight, cfg);
  if (weight.degree != test_degree) throw BidegreeMismatch("weight degree does not match the current");
  const int m = 2 * n;
  Eigen::MatrixXd Li = chart.real_linear().inverse();
  const double jac = std::abs(Li.determinant());
  Eigen::VectorXd c = chart.center;
  auto fe = form.eval, we = weight.eval;
  // hyperspherical coordinates (rho, phi_1..phi_{m-1})
  Integrand g = [=](const double* s) -> cplx {
    Eigen::VectorXd y(m);
    double rho = s[0], sp = 1.0, dens = jac;
    for (int k = 1; k < m; ++k) {
      y[k - 1] = rho * sp * std::cos(s[k]);
      sp *= std::sin(s[k]);
      if (k < m - 1) dens *= std::pow(std::sin(s[k]), m - 1 - k);
    }
    y[m - 1] = rho * sp;
    dens *= std::pow(rho, m - 1);
    Eigen::VectorXd x = c + Li * y;
    return wedge(fe(x.data()), we(x.data())).top() * dens;
  };
  Box box(std::vector<double>(m, 0.0), std::vector<double>(m, std::numbers::pi));
  box.hi[0] = r;
  box.hi[m - 1] = 2 * std::numbers::pi;
  QuadratureConfig cc = cfg;
  cc.hints.clear();
  return from_quad(integrate(box, g, cc));
}

// ---------------------------------------------------------------- integration

static Eigen::MatrixXd tangent(const ParamMap& map, const double* t, Eigen::VectorXd* image = nullptr) {
  std::vector<Jet> tj(map.pdim), xj(map.ndim);
  for (int b = 0; b < map.pdim; ++b) tj[b] = seed(t[b], b, map.pdim);
  map.f_jet(tj.data(), xj.data());
  Eigen::MatrixXd U(map.ndim, map.pdim);
  if (image) image->resize(map.ndim);
  for (int a = 0; a < map.ndim; ++a) {
    if (image) (*image)[a] = xj[a].v.real();
    for (int b = 0; b < map.pdim; ++b) U(a, b) = xj[a].g[b].real();
  }
  return U;
}

static Eigen::MatrixXd induced_structure(const ParamMap& map, const AlmostComplexStructure& J, const double* t,
                                         double* residual) {
  Eigen::VectorXd x;
  Eigen::MatrixXd U = tangent(map, t, &x);
  Eigen::MatrixXd JU = J.J(x) * U;
  Eigen::MatrixXd M = U.colPivHouseholderQr().solve(JU);
  if (residual) *residual = (U * M - JU).norm() / std::max(U.norm(), 1e-300);
  return M;
}

double j_invariance_residual(const ParamMap& map, const AlmostComplexStructure& J, const double* t) {
  double res = 0;
  induced_structure(map, J, t, &res);
  return res;
}

int complex_orientation(const ParamMap& map, const AlmostComplexStructure& J, const double* t) {
  const int k = map.pdim;
  Eigen::MatrixXd M = induced_structure(map, J, t, nullptr);
  Eigen::MatrixXd W(k, 0);
  for (int b = 0; b < k && W.cols() < k; ++b) {
    Eigen::MatrixXd C(k, W.cols() + 2);
    C << W, Eigen::VectorXd::Unit(k, b), M.col(b);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
    lu.setThreshold(1e-8);
    if (lu.rank() == C.cols()) W = C;
  }
  if (W.cols() != k) return 0;
  double det = W.determinant();
  return det > 0 ? 1 : (det < 0 ? -1 : 0);
}

IntegrationChart flat_chart(int n, int p, const Box& domain, const std::vector<double>& offset) {
  IntegrationChart c;
  std::vector<double> off = offset.empty() ? std::vector<double>(2 * n, 0.0) : offset;
  if ((int)off.size() != 2 * n) throw DimensionMismatch("offset must have 2n entries");
  c.map = make_map(2 * p, 2 * n, [p, n, off]<class S>(const S* t, S* x) {
    for (int a = 0; a < 2 * n; ++a) x[a] = a < 2 * p ? t[a] + off[a] : S(off[a]);
  });
  c.domain = domain;
  bool shifted = false;
  for (int a = 0; a < 2 * p; ++a) shifted = shifted || off[a] != 0.0;
  if (!shifted)
    for (int a = 0; a < 2 * p; ++a) c.coord.push_back(a);
  c.name = "flat";
  return c;
}

IntegrationCurrent::IntegrationCurrent(int n_, std::vector<IntegrationChart> cs, const AlmostComplexStructure& J,
                                       std::string nm)
    : charts(std::move(cs)) {
  n = n_;
  name = std::move(nm);
  if (charts.empty()) throw DimensionMismatch("integration current without charts");
  test_degree = charts[0].map.pdim;
  for (auto& c : charts) {
    if (c.map.pdim != test_degree || c.map.ndim != 2 * n || c.domain.dim() != c.map.pdim)
      throw DimensionMismatch("inconsistent chart dimensions");
    if (c.orientation == 0) {
      auto t = c.domain.center();
      c.orientation = complex_orientation(c.map, J, t.data());
      if (c.orientation == 0) throw DegenerateEigenspace("chart '" + c.name + "' is not J-complex at its center");
    }
  }
}

PairResult IntegrationCurrent::pair_impl(const TestForm& psi, const QuadratureConfig& cfg) const {
  PairResult total;
  for (auto& ch : charts) {
    Box region = ch.domain;
    bool empty = false;
    for (std::size_t k = 0; k < ch.coord.size(); ++k) {
      int a = ch.coord[k];
      region.lo[k] = std::max(region.lo[k], psi.support.lo[a]);
      region.hi[k] = std::min(region.hi[k], psi.support.hi[a]);
      if (region.lo[k] >= region.hi[k]) empty = true;
    }
    if (empty) continue;
    auto map = ch.map;
    auto field = psi.field;
    double sgn = ch.orientation;
    Integrand g = [map, field, sgn](const double* t) -> cplx { return sgn * pullback(field, map, t).top(); };
    QuadratureConfig c = cfg;
    for (auto& h : c.hints) {
      auto fn = h.fn;
      h.fn = [fn, map](const double* t) {
        std::vector<double> x(map.ndim);
        map.f(t, x.data());
        return fn(x.data());
      };
    }
    total += from_quad(integrate(region, g, c));
  }
  return total;
}

// ---------------------------------------------------------------- combinations

LinearCombination::LinearCombination(std::vector<std::pair<double, CurrentPtr>> t, std::string nm)
    : terms(std::move(t)) {
  if (terms.empty()) throw DimensionMismatch("empty combination");
  n = terms[0].second->n;
  test_degree = terms[0].second->test_degree;
  for (auto& [c, T] : terms)
    if (T->n != n || T->test_degree != test_degree) throw DimensionMismatch("combining currents of different degrees");
  name = std::move(nm);
}

PairResult LinearCombination::pair_impl(const TestForm& psi, const QuadratureConfig& cfg) const {
  PairResult r;
  for (auto& [c, T] : terms) {
    if (c == 0.0) continue;
    PairResult p = T->pair(psi, cfg);
    r.value += c * p.value;
    r.error += std::abs(c) * p.error;
    r.converged = r.converged && p.converged;
  }
  return r;
}

PairResult LinearCombination::ball_integral(const CoordinateChart& chart, double r, const FormField& weight,
                                            const QuadratureConfig& cfg) const {
  PairResult acc;
  for (auto& [c, T] : terms) {
    if (c == 0.0) continue;
    PairResult p = T->ball_integral(chart, r, weight, cfg);
    acc.value += c * p.value;
    acc.error += std::abs(c) * p.error;
    acc.converged = acc.converged && p.converged;
  }
  return acc;
}

PairResult LinearCombination::box_integral(const Box& box, const FormField& weight, const QuadratureConfig& cfg) const {
  PairResult acc;
  for (auto& [c, T] : terms) {
    if (c == 0.0) continue;
    PairResult p = T->box_integral(box, weight, cfg);
    acc.value += c * p.value;
    acc.error += std::abs(c) * p.error;
    acc.converged = acc.converged && p.converged;
  }
  return acc;
}

CurrentPtr scaled(CurrentPtr T, double c) {
  return std::make_shared<LinearCombination>(std::vector<std::pair<double, CurrentPtr>>{{c, T}}, T->name);
}

CurrentPtr sum(std::vector<std::pair<double, CurrentPtr>> terms) {
  return std::make_shared<LinearCombination>(std::move(terms));
}

// ---------------------------------------------------------------- d and ddbar

FormField d_field(const FormField& phi, const Engine& e) {
  FormField r;
  r.n = phi.n;
  r.degree = phi.degree + 1;
  r.name = "d(" + phi.name + ")";
  r.eval = [phi, e](const double* x) { return d(phi, x, e); };
  if (phi.has_jets() && phi.jet_order >= 2) {
    auto pj = phi.eval_jet;
    r.eval_jet = [pj](const Jet* x) { return ext_d(pj(x)); };
    r.jet_order = 1;
  } else {
    r.jet_order = 0;
  }
  return r;
}

namespace {

class DualD : public Current {
 public:
  CurrentPtr T;
  Engine e;
  DualD(CurrentPtr t, Engine eng) : T(std::move(t)), e(eng) {
    n = T->n;
    test_degree = T->test_degree - 1;
    name = "d(" + T->name + ")";
    if (test_degree < 0) throw DimensionMismatch("d of a current of top degree");
  }
  int quadrature_dim() const override { return T->quadrature_dim(); }

 protected:
  PairResult pair_impl(const TestForm& psi, const QuadratureConfig& cfg) const override {
    TestForm dpsi{d_field(psi.field, e), psi.support, "d" + psi.name};
    PairResult r = T->pair(dpsi, cfg);
    if ((T->form_degree() + 1) % 2) r.value = -r.value;
    return r;
  }
};

// -i delbar del of the (a,a) part of phi
ExteriorValue minus_i_dbar_d(const FormField& phi, const AlmostComplexStructure& J, int a, const double* x,
                             const Engine& e) {
  const int n = phi.n;
  Ext<Jet> pj;
  std::vector<Jet> Jj;
  ProjectorData<Jet> Pj;
  if (e.mode == Engine::Exact) {
    if (!phi.has_jets() || phi.jet_order < 2)
      throw DifferentiationFailure("second derivatives of '" + phi.name + "' are not available exactly");
    std::vector<Jet> xs(2 * n);
    for (int b = 0; b < 2 * n; ++b) xs[b] = seed(x[b], b, 2 * n);
    Jj = J.J_jet(xs.data());
    for (auto& j : Jj) j.m = 2 * n;
    Pj = projector_data(n, Jj);
    pj = bidegree_split(phi.eval_jet(xs.data()), Pj, 2 * a).parts[a];
    for (auto& t : pj.terms) t.second.m = 2 * n;
  } else {
    FormField proj = value_field(
        n, 2 * a, [phi, J, a](const double* y) { return bidegree_split(phi(y), projector_10(J.J(y)), 2 * a).parts[a]; });
    pj = jets_at(proj, x, e);
    Jj = structure_jets(J, x, e);
    Pj = projector_data(n, Jj);
  }
  Ext<Jet> del = bidegree_split(ext_d(pj), Pj, 2 * a + 1).parts[a + 1];
  ExteriorValue dd = values(ext_d(del));
  auto Pv = projector_data(projector_10(J.J(x)));
  return scale(bidegree_split(dd, Pv, 2 * a + 2).parts[a + 1], cplx(0, -1));
}

// i del delbar of the (k,k) part of theta
ExteriorValue i_d_dbar_form(const FormField& th, const AlmostComplexStructure& J, int k, const double* x,
                            const Engine& e) {
  const int n = th.n;
  Ext<Jet> tj;
  std::vector<Jet> Jj;
  ProjectorData<Jet> Pj;
  if (e.mode == Engine::Exact) {
    if (!th.has_jets() || th.jet_order < 2)
      throw DifferentiationFailure("second derivatives of '" + th.name + "' are not available exactly");
    std::vector<Jet> xs(2 * n);
    for (int b = 0; b < 2 * n; ++b) xs[b] = seed(x[b], b, 2 * n);
    Jj = J.J_jet(xs.data());
    for (auto& j : Jj) j.m = 2 * n;
    Pj = projector_data(n, Jj);
    tj = bidegree_split(th.eval_jet(xs.data()), Pj, 2 * k).parts[k];
    for (auto& t : tj.terms) t.second.m = 2 * n;
  } else {
    FormField proj = value_field(
        n, 2 * k, [th, J, k](const double* y) { return bidegree_split(th(y), projector_10(J.J(y)), 2 * k).parts[k]; });
    tj = jets_at(proj, x, e);
    Jj = structure_jets(J, x, e);
    Pj = projector_data(n, Jj);
  }
  Ext<Jet> dbar = bidegree_split(ext_d(tj), Pj, 2 * k + 1).parts[k];
  ExteriorValue dd = values(ext_d(dbar));
  auto Pv = projector_data(projector_10(J.J(x)));
  return scale(bidegree_split(dd, Pv, 2 * k + 2).parts[k + 1], cplx(0, 1));
}

class DualDdbar : public Current {
 public:
  CurrentPtr T;
  AlmostComplexStructure J;
  Engine e;
  DualDdbar(CurrentPtr t, AlmostComplexStructure j, Engine eng) : T(std::move(t)), J(std::move(j)), e(eng) {
    n = T->n;
    test_degree = T->test_degree - 2;
    name = "iddbar(" + T->name + ")";
    if (test_degree < 0 || T->test_degree % 2) throw BidegreeMismatch("ddbar needs a current of bidimension (p,p), p>0");
  }
  int quadrature_dim() const override { return T->quadrature_dim(); }

 protected:
  PairResult pair_impl(const TestForm& psi, const QuadratureConfig& cfg) const override {
    int a = test_degree / 2;
    auto phi = psi.field;
    auto JJ = J;
    auto eng = e;
    FormField f = value_field(
        n, test_degree + 2, [phi, JJ, a, eng](const double* x) { return minus_i_dbar_d(phi, JJ, a, x, eng); },
        "ddbar(" + phi.name + ")");
    return T->pair(TestForm{f, psi.support, psi.name}, cfg);
  }
};

}  // namespace

CurrentPtr d_current(CurrentPtr T, const Engine& e) { return std::make_shared<DualD>(std::move(T), e); }

CurrentPtr ddbar_current(CurrentPtr T, const AlmostComplexStructure& J, const Engine& e) {
  return std::make_shared<DualDdbar>(std::move(T), J, e);
}

CurrentPtr d_smooth(const SmoothCurrent& T, const Engine& e) {
  return std::make_shared<SmoothCurrent>(d_field(T.form, e), "d(" + T.name + ")");
}

CurrentPtr ddbar_smooth(const SmoothCurrent& T, const AlmostComplexStructure& J, const Engine& e) {
  if (T.form.degree % 2) throw BidegreeMismatch("ddbar of an odd-degree smooth current");
  int k = T.form.degree / 2;
  auto th = T.form;
  FormField f = value_field(
      T.n, T.form.degree + 2, [th, J, k, e](const double* x) { return i_d_dbar_form(th, J, k, x, e); },
      "iddbar(" + th.name + ")");
  return std::make_shared<SmoothCurrent>(f, "iddbar(" + T.name + ")");
}

// ---------------------------------------------------------------- beta and mass

static FormField chart_ddbar_field(const CoordinateChart& chart, const AlmostComplexStructure& J, bool full) {
  const int n = chart.n;
  auto at = [chart, J, full, n](const double* x) {
    std::vector<Jet> xs(2 * n);
    for (int b = 0; b < 2 * n; ++b) xs[b] = seed(x[b], b, 2 * n);
    Jet u = chart_norm2<Jet>(chart, xs.data());
    u.m = 2 * n;
    auto Jj = structure_jets(J, x, {});
    auto Pj = projector_data(n, Jj);
    if (full) return scale(i_d_dbar_of(u, Pj), cplx(0.5));
    auto Pv = projector_data(projector_10(J.J(x)));
    return scale(i_ddbar_of(u, Pj, Pv), cplx(0.5));
  };
  std::string nm = full ? "beta" : "beta1";
  if (J.kind == "standard" && chart.linear) {
    ExteriorValue v = at(chart.center.data());
    FormField f = constant_field(v);
    f.degree = 2;
    f.name = nm;
    return f;
  }
  return value_field(n, 2, at, nm);
}

FormField beta1_field(const CoordinateChart& chart, const AlmostComplexStructure& J) {
  return chart_ddbar_field(chart, J, false);
}
FormField beta_field(const CoordinateChart& chart, const AlmostComplexStructure& J) {
  return chart_ddbar_field(chart, J, true);
}

FormField power_over_factorial(const FormField& w, int k, int n) {
  if (k == 0) return scalar_field_one(n);
  FormField r = w;
  double fact = 1;
  for (int j = 2; j <= k; ++j) {
    r = wedge(r, w);
    fact *= j;
  }
  r = scale(r, 1.0 / fact);
  r.name = w.name + "^" + std::to_string(k) + "/" + std::to_string(k) + "!";
  return r;
}

static MassResult to_mass(const PairResult& p) { return {p.value.real(), p.error, p.converged}; }

MassResult mass(const Current& T, const CoordinateChart& chart, double r, const AlmostComplexStructure& J,
                const QuadratureConfig& cfg) {
  if (T.test_degree % 2) throw BidegreeMismatch("mass needs a current of bidimension (p,p)");
  if (!(r > 0)) throw DomainViolation("ball radius must be positive");
  int p = T.bidim();
  FormField W = power_over_factorial(beta1_field(chart, J), p, T.n);
  return to_mass(T.ball_integral(chart, r, W, cfg));
}

MassResult mass_box(const Current& T, const Box& box, const CoordinateChart& chart, const AlmostComplexStructure& J,
                    const QuadratureConfig& cfg) {
  if (T.test_degree % 2) throw BidegreeMismatch("mass needs a current of bidimension (p,p)");
  if (box.volume() <= 0) return {};
  int p = T.bidim();
  FormField W = power_over_factorial(beta1_field(chart, J), p, T.n);
  return to_mass(T.box_integral(box, W, cfg));
}

// ---------------------------------------------------------------- probes

static std::vector<double> random_center(const Box& region, double radius, std::mt19937_64& rng) {
  std::vector<double> c(region.dim());
  for (int a = 0; a < region.dim(); ++a) {
    double lo = region.lo[a] + radius, hi = region.hi[a] - radius;
    if (lo > hi) lo = hi = 0.5 * (region.lo[a] + region.hi[a]);
    c[a] = std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  return c;
}

std::vector<TestForm> strongly_positive_probes(const AlmostComplexStructure& J, int q, int count, std::uint64_t seed_,
                                               const Box& region, double radius, BumpProfile profile) {
  std::mt19937_64 rng(seed_);
  std::normal_distribution<double> N;
  const int n = J.n, m = 2 * n;
  std::vector<TestForm> out;
  for (int i = 0; i < count; ++i) {
    auto c = random_center(region, radius, rng);
    std::vector<std::vector<cplx>> as(q, std::vector<cplx>(m));
    for (auto& a : as)
      for (auto& v : a) v = cplx(N(rng), N(rng));
    FormField coeff = make_field(n, 2 * q,
                                 [J, as, n, m]<class S>(const S* x) {
                                   using C = coeff_t<S>;
                                   std::vector<C> Jv(m * m);
                                   if constexpr (std::is_same_v<S, double>) {
                                     std::vector<double> buf(m * m);
                                     J.eval(x, buf.data());
                                     for (int k = 0; k < m * m; ++k) Jv[k] = buf[k];
                                   } else {
                                     J.eval_jet(x, Jv.data());
                                   }
                                   Ext<C> acc = Ext<C>::scalar(n, C(1.0));
                                   for (auto& a : as) {
                                     Ext<C> al(n);
                                     for (int r = 0; r < m; ++r) {
                                       C s(0.0);
                                       for (int cc = 0; cc < m; ++cc) {
                                         C pc = Jv[cc * m + r] * cplx(0, -0.5);
                                         if (r == cc) pc = pc + 0.5;
                                         s = s + pc * a[cc];
                                       }
                                       al.terms.push_back({1u << r, s});
                                     }
                                     acc = wedge(acc, scale(wedge(al, conj(al)), cplx(0, 1)));
                                   }
                                   return acc;
                                 },
                                 "sp");
    Box sup = Box::cube(m, radius, c);
    out.push_back(bump_form(sup, coeff, "sp" + std::to_string(i), profile));
  }
  return out;
}

std::vector<TestForm> random_probes(int n, int k, int count, std::uint64_t seed_, const Box& region, double radius,
                                    BumpProfile profile) {
  std::mt19937_64 rng(seed_);
  std::normal_distribution<double> N;
  const int m = 2 * n;
  std::vector<std::uint32_t> masks;
  for (std::uint32_t mk = 0; mk < (1u << m); ++mk)
    if (std::popcount(mk) == k) masks.push_back(mk);
  std::vector<TestForm> out;
  for (int i = 0; i < count; ++i) {
    auto c = random_center(region, radius, rng);
    std::vector<std::pair<std::uint32_t, std::vector<double>>> coef;
    for (auto mk : masks) {
      std::vector<double> lin(m + 1);
      for (auto& v : lin) v = N(rng);
      coef.push_back({mk, lin});
    }
    FormField f = make_field(n, k,
                             [coef, n, m, c]<class S>(const S* x) {
                               Ext<coeff_t<S>> r(n);
                               for (auto& [mk, lin] : coef) {
                                 coeff_t<S> v(lin[0]);
                                 for (int a = 0; a < m; ++a) v = v + (x[a] - c[a]) * lin[a + 1] * cplx(1.0);
                                 r.terms.push_back({mk, v});
                               }
                               return r;
                             },
                             "rand");
    out.push_back(bump_form(Box::cube(m, radius, c), f, "eta" + std::to_string(i), profile));
  }
  return out;
}

static ProbeReport collect(const std::vector<PairResult>& vals, double tol, bool closed) {
  ProbeReport r;
  double scale = 1.0;
  for (auto& v : vals) scale = std::max(scale, std::abs(v.value));
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const auto& v = vals[i];
    r.values.push_back(v.value);
    r.max_abs = std::max(r.max_abs, std::abs(v.value));
    r.max_abs_imag = std::max(r.max_abs_imag, std::abs(v.value.imag()));
    if (v.value.real() < r.min_real) {
      r.min_real = v.value.real();
      if (!closed) r.witness = (int)i;
    }
    if (closed && std::abs(v.value) > tol + v.error) {
      r.pass = false;
      if (r.witness < 0) r.witness = (int)i;
    }
    if (!closed && v.value.real() + v.error < -tol * scale) r.pass = false;
  }
  if (!closed && r.max_abs_imag > tol * scale + 1e-9) r.pass = false;
  return r;
}

ProbeReport probe_positive(const Current& T, const std::vector<TestForm>& probes, const QuadratureConfig& cfg,
                           double tol) {
  std::vector<PairResult> v;
  for (auto& p : probes) v.push_back(T.pair(p, cfg));
  return collect(v, tol, false);
}

ProbeReport probe_closed(const Current& T, const std::vector<TestForm>& etas, const QuadratureConfig& cfg, double tol,
                         const Engine& e) {
  std::vector<PairResult> v;
  for (auto& eta : etas) v.push_back(T.pair(TestForm{d_field(eta.field, e), eta.support, eta.name}, cfg));
  return collect(v, tol, true);
}

ProbeReport probe_psh(CurrentPtr T, const AlmostComplexStructure& J, const std::vector<TestForm>& probes,
                      const QuadratureConfig& cfg, double tol) {
  auto D = ddbar_current(T, J);
  return probe_positive(*D, probes, cfg, tol);
}

// ---------------------------------------------------------------- tubes

TestForm tube_cutoff(const TestForm& psi, const Tube& A, double delta, bool complement) {
  const int n = psi.field.n;
  const double d2 = delta * delta;
  FormField chi;
  chi.n = n;
  chi.degree = 0;
  chi.name = complement ? "tube_out" : "tube_in";
  auto rv = A.rho2;
  auto rj = A.rho2_jet;
  chi.eval = [rv, d2, complement, n](const double* x) {
    double s = smooth_step(rv(x) / d2);
    return ExteriorValue::scalar(n, complement ? s : 1.0 - s);
  };
  if (rj) {
    chi.eval_jet = [rj, d2, complement, n](const Jet* x) {
      Jet s = smooth_step(rj(x) * (1.0 / d2));
      return Ext<Jet>::scalar(n, complement ? s : 1.0 - s);
    };
    chi.jet_order = 2;
  } else {
    chi.jet_order = 0;
  }
  return TestForm{wedge(chi, psi.field), psi.support, psi.name + "*tube"};
}

static QuadratureConfig with_tube_hint(const QuadratureConfig& cfg, const Tube& A, double delta) {
  QuadratureConfig c = cfg;
  auto rv = A.rho2;
  c.hints.push_back({[rv, delta](const double* x) { return std::sqrt(std::max(rv(x), 0.0)) - 0.5 * delta; },
                     0.5 * delta});
  return c;
}

PairResult tube_mass(const Current& T, const Tube& A, double delta, const TestForm& psi, const QuadratureConfig& cfg) {
  if (!(delta > 0)) throw DomainViolation("tube radius must be positive");
  return T.pair(tube_cutoff(psi, A, delta), with_tube_hint(cfg, A, delta));
}

TubeLimit tube_limit(const Current& T, const Tube& A, const TestForm& psi, const QuadratureConfig& cfg, double delta0,
                     int levels, bool complement, bool strict) {
  if (levels < 3) throw ConfigError("tube extrapolation needs at least three levels");
  TubeLimit out;
  double qerr = 0;
  for (int k = 0; k < levels; ++k) {
    double dk = delta0 / (1 << k);
    PairResult v = T.pair(tube_cutoff(psi, A, dk, complement), with_tube_hint(cfg, A, dk));
    out.deltas.push_back(dk);
    out.values.push_back(v.value);
    qerr = std::max(qerr, v.error);
    if (k > 0) out.extrapolants.push_back(2.0 * v.value - out.values[k - 1]);
  }
  auto& e = out.extrapolants;
  cplx last = e.back(), prev = e[e.size() - 2];
  out.limit = last;
  std::vector<double> diffs;
  for (std::size_t j = 1; j < e.size(); ++j) diffs.push_back(std::abs(e[j] - e[j - 1]));
  double dl = diffs.back();
  out.error = dl + 3 * qerr;
  double bound = 0.1 * std::max(std::abs(last), std::abs(prev)) + 10 * cfg.abs_tol + 3 * qerr;
  out.stable = dl <= bound;
  // a zero limit is approached geometrically; accept contracting differences
  if (!out.stable && diffs.size() >= 3) {
    std::size_t m = diffs.size();
    double r1 = diffs[m - 1] / std::max(diffs[m - 2], 1e-300), r2 = diffs[m - 2] / std::max(diffs[m - 3], 1e-300);
    if (r1 <= 0.6 && r2 <= 0.6) {
      out.stable = true;
      out.error = dl * r1 / (1 - r1) + 3 * qerr;
    }
  }
  if (!out.stable && strict)
    throw ExtrapolationUnstable("tube extrapolants disagree: " + std::to_string(std::abs(last)) + " vs " +
                                std::to_string(std::abs(prev)));
  return out;
}

}  // namespace acx
