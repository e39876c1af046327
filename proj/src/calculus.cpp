#include "acx/calculus.hpp"

#include <cmath>
#include <map>

namespace acx {

FormField value_field(int n, int degree, std::function<ExteriorValue(const double*)> f, std::string name) {
  FormField r;
  r.n = n;
  r.degree = degree;
  r.name = std::move(name);
  r.eval = std::move(f);
  r.jet_order = 0;
  return r;
}

static void combine_jets(FormField& r, const FormField& a, const FormField& b,
                         std::function<Ext<Jet>(const Ext<Jet>&, const Ext<Jet>&)> op) {
  if (a.has_jets() && b.has_jets()) {
    auto fa = a.eval_jet, fb = b.eval_jet;
    r.eval_jet = [fa, fb, op](const Jet* x) { return op(fa(x), fb(x)); };
    r.jet_order = std::min(a.jet_order, b.jet_order);
  } else {
    r.jet_order = 0;
  }
}

FormField operator+(const FormField& a, const FormField& b) {
  if (a.n != b.n || a.degree != b.degree) throw DimensionMismatch("sum of incompatible fields");
  FormField r;
  r.n = a.n;
  r.degree = a.degree;
  r.name = a.name + "+" + b.name;
  auto fa = a.eval, fb = b.eval;
  r.eval = [fa, fb](const double* x) { return fa(x) + fb(x); };
  combine_jets(r, a, b, [](const Ext<Jet>& u, const Ext<Jet>& v) { return u + v; });
  return r;
}

FormField scale(const FormField& a, cplx s) {
  FormField r = a;
  auto fa = a.eval;
  r.eval = [fa, s](const double* x) { return scale(fa(x), s); };
  if (a.has_jets()) {
    auto fj = a.eval_jet;
    r.eval_jet = [fj, s](const Jet* x) { return scale(fj(x), s); };
  }
  return r;
}

FormField wedge(const FormField& a, const FormField& b) {
  if (a.n != b.n) throw DimensionMismatch("wedge of fields on different dimensions");
  FormField r;
  r.n = a.n;
  r.degree = a.degree + b.degree;
  r.name = a.name + "^" + b.name;
  auto fa = a.eval, fb = b.eval;
  r.eval = [fa, fb](const double* x) { return wedge(fa(x), fb(x)); };
  combine_jets(r, a, b, [](const Ext<Jet>& u, const Ext<Jet>& v) { return wedge(u, v); });
  return r;
}

static Ext<Jet> fd_jets(const std::function<ExteriorValue(const double*)>& f, int n, const double* x, double h) {
  const int m = 2 * n;
  std::map<std::uint32_t, Jet> acc;
  auto slot = [&](std::uint32_t mask) -> Jet& {
    auto it = acc.find(mask);
    if (it == acc.end()) {
      Jet z;
      z.m = m;
      it = acc.emplace(mask, z).first;
    }
    return it->second;
  };
  std::vector<double> y(x, x + m);
  ExteriorValue f0 = f(x);
  for (auto& [mk, c] : f0.terms) slot(mk).v = c;
  // first derivatives with step h, second derivatives with a wider step to limit roundoff
  std::vector<double> h1(m), h2(m);
  for (int a = 0; a < m; ++a) {
    double s = std::max(1.0, std::abs(x[a]));
    h1[a] = h * s;
    h2[a] = 10 * h * s;
  }
  auto at = [&](int a, double da, int b, double db) {
    y.assign(x, x + m);
    y[a] += da;
    if (b >= 0) y[b] += db;
    return f(y.data());
  };
  for (int a = 0; a < m; ++a) {
    ExteriorValue g = at(a, h1[a], -1, 0) - at(a, -h1[a], -1, 0);
    for (auto& [mk, c] : g.terms) slot(mk).g[a] = c / (2 * h1[a]);
    ExteriorValue dd = at(a, h2[a], -1, 0) + at(a, -h2[a], -1, 0) - scale(f0, cplx(2.0));
    for (auto& [mk, c] : dd.terms) slot(mk).h[hidx(a, a)] = c / (h2[a] * h2[a]);
    for (int b = 0; b < a; ++b) {
      ExteriorValue o = at(a, h2[a], b, h2[b]) - at(a, h2[a], b, -h2[b]) - at(a, -h2[a], b, h2[b]) +
                        at(a, -h2[a], b, -h2[b]);
      for (auto& [mk, c] : o.terms) slot(mk).h[hidx(a, b)] = c / (4 * h2[a] * h2[b]);
    }
  }
  Ext<Jet> r(n);
  for (auto& [mk, j] : acc) r.terms.push_back({mk, j});
  return r;
}

Ext<Jet> jets_at(const FormField& phi, const double* x, const Engine& e) {
  const int m = 2 * phi.n;
  if (e.mode == Engine::Central) return fd_jets(phi.eval, phi.n, x, e.h);
  if (!phi.has_jets()) throw DifferentiationFailure("field '" + phi.name + "' has no jet evaluator; use the difference engine");
  std::vector<Jet> xs(m);
  for (int a = 0; a < m; ++a) xs[a] = seed(x[a], a, m);
  Ext<Jet> r = phi.eval_jet(xs.data());
  for (auto& t : r.terms) t.second.m = m;
  return r;
}

std::vector<Jet> structure_jets(const AlmostComplexStructure& J, const double* x, const Engine& e) {
  const int m = 2 * J.n;
  if (e.mode == Engine::Exact) {
    std::vector<Jet> xs(m);
    for (int a = 0; a < m; ++a) xs[a] = seed(x[a], a, m);
    auto r = J.J_jet(xs.data());
    for (auto& j : r) j.m = m;
    return r;
  }
  Eigen::MatrixXd J0 = J.J(x);
  auto D = J.dJ(x, e);
  std::vector<Jet> r(m * m);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k) {
      Jet& j = r[i * m + k];
      j.m = m;
      j.v = J0(i, k);
      for (int a = 0; a < m; ++a) j.g[a] = D[a](i, k);
    }
  return r;
}

ExteriorValue d(const FormField& phi, const double* x, const Engine& e) {
  if (phi.degree >= 2 * phi.n) return ExteriorValue(phi.n);
  return values(ext_d(jets_at(phi, x, e)));
}

SplitD split_d(const FormField& phi, const AlmostComplexStructure& J, const double* x, const Engine& e,
               std::optional<std::pair<int, int>> declared) {
  BidegreeProjector P = projector_10(J.J(x));
  SplitD s;
  auto pq = declared ? *declared : bidegree_of(phi(x), P);
  if (pq.first < 0) throw MixedBidegree("cannot infer the bidegree of a vanishing value; declare it");
  s.p = pq.first;
  s.q = pq.second;
  s.dphi = d(phi, x, e);
  const int k = phi.degree + 1;
  auto parts = bidegree_split(s.dphi, P, k);
  auto part = [&](int p) { return (p >= 0 && p <= k) ? parts.parts[p] : ExteriorValue(phi.n); };
  s.del = part(s.p + 1);
  s.delbar = part(s.p);
  s.theta = scale(part(s.p + 2), cplx(-1.0));
  s.thetabar = scale(part(s.p - 1), cplx(-1.0));
  for (int p = 0; p <= k; ++p)
    if (p < s.p - 1 || p > s.p + 2) s.residual = std::max(s.residual, max_abs(parts.parts[p]));
  return s;
}

static Ext<Jet> du_jets(const Jet& u, int n) {
  Ext<Jet> du(n);
  for (int a = 0; a < u.m; ++a) du.terms.push_back({1u << a, partial(u, a)});
  return du;
}

static ExteriorValue du_values(const Jet& u, int n) {
  ExteriorValue du(n);
  for (int a = 0; a < u.m; ++a) du.terms.push_back({1u << a, u.g[a]});
  prune(du);
  return du;
}

ExteriorValue delbar_of(const Jet& u, const ProjectorData<cplx>& Pv) {
  return bidegree_split(du_values(u, Pv.n), Pv, 1).parts[0];
}

ExteriorValue del_of(const Jet& u, const ProjectorData<cplx>& Pv) {
  return bidegree_split(du_values(u, Pv.n), Pv, 1).parts[1];
}

ExteriorValue i_ddbar_of(const Jet& u, const ProjectorData<Jet>& Pj, const ProjectorData<cplx>& Pv) {
  Ext<Jet> dbar_u = bidegree_split(du_jets(u, Pj.n), Pj, 1).parts[0];
  ExteriorValue ddb = values(ext_d(dbar_u));
  return scale(bidegree_split(ddb, Pv, 2).parts[1], cplx(0, 1));
}

ExteriorValue i_d_dbar_of(const Jet& u, const ProjectorData<Jet>& Pj) {
  Ext<Jet> dbar_u = bidegree_split(du_jets(u, Pj.n), Pj, 1).parts[0];
  return scale(values(ext_d(dbar_u)), cplx(0, 1));
}

ExteriorValue i_ddbar_dense(const Jet& u, const std::vector<Jet>& Jj, int n) {
  const int m = 2 * n;
  const cplx I(0, 1);
  Eigen::MatrixXcd P10(m, m), P01(m, m), A(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) {
      cplx jt = Jj[c * m + r].v;
      P10(r, c) = (r == c ? 0.5 : 0.0) - 0.5 * I * jt;
      P01(r, c) = (r == c ? 0.5 : 0.0) + 0.5 * I * jt;
    }
  // A(c, b) = d_c of the b-th coefficient of delbar u = (P01 grad u)_b
  for (int c = 0; c < m; ++c)
    for (int b = 0; b < m; ++b) {
      cplx acc = 0;
      for (int a = 0; a < m; ++a) acc += 0.5 * I * Jj[a * m + b].g[c] * u.g[a] + u.hess(c, a) * P01(b, a);
      A(c, b) = acc;
    }
  Eigen::MatrixXcd B = P10 * A * P01.transpose() + P01 * A * P10.transpose();
  ExteriorValue out(n);
  for (int e = 0; e < m; ++e)
    for (int f = e + 1; f < m; ++f) out.terms.push_back({(1u << e) | (1u << f), I * (B(e, f) - B(f, e))});
  std::sort(out.terms.begin(), out.terms.end(), [](auto& a, auto& b) { return a.first < b.first; });
  prune(out);
  return out;
}

ExteriorValue ddbar(const FormField& u, const AlmostComplexStructure& J, const double* x, const Engine& e) {
  if (u.degree != 0) throw WrongBidegree("ddbar acts on functions");
  if (e.mode == Engine::Exact && u.jet_order < 2)
    throw DifferentiationFailure("second derivatives of '" + u.name + "' are not available exactly");
  Ext<Jet> uj = jets_at(u, x, e);
  Jet u0;
  u0.m = 2 * u.n;
  if (!uj.empty()) u0 = uj.terms[0].second;
  auto Jj = structure_jets(J, x, e);
  auto Pj = projector_data(J.n, Jj);
  auto Pv = projector_data(projector_10(J.J(x)));
  return i_ddbar_of(u0, Pj, Pv);
}

template <class C>
static Ext<C> pull_terms(const ExteriorValue* vals, const Ext<Jet>* jets, const std::vector<std::vector<C>>& D,
                         int pn) {
  std::vector<std::pair<std::uint32_t, C>> raw;
  Ext<C> out(pn);
  auto expand = [&](std::uint32_t mask, const C& c) {
    Ext<C> acc = Ext<C>::scalar(pn, c);
    std::uint32_t mm = mask;
    while (mm && !acc.empty()) {
      int a = std::countr_zero(mm);
      mm &= mm - 1;
      Ext<C> one(pn);
      for (int b = 0; b < (int)D[a].size(); ++b) one.terms.push_back({1u << b, D[a][b]});
      prune(one);
      acc = wedge(acc, one);
    }
    out = out + acc;
  };
  if constexpr (std::is_same_v<C, cplx>) {
    for (auto& [mk, c] : vals->terms) expand(mk, c);
  } else {
    for (auto& [mk, c] : jets->terms) expand(mk, c);
  }
  return out;
}

ExteriorValue pullback(const FormField& phi, const ParamMap& s, const double* t) {
  if (s.ndim != 2 * phi.n) throw DimensionMismatch("map target does not match the field");
  const int pm = s.pdim;
  std::vector<Jet> tj(pm), xj(s.ndim);
  for (int b = 0; b < pm; ++b) tj[b] = seed(t[b], b, pm);
  s.f_jet(tj.data(), xj.data());
  std::vector<double> xv(s.ndim);
  std::vector<std::vector<cplx>> D(s.ndim, std::vector<cplx>(pm));
  for (int a = 0; a < s.ndim; ++a) {
    xv[a] = xj[a].v.real();
    for (int b = 0; b < pm; ++b) D[a][b] = xj[a].g[b];
  }
  ExteriorValue v = phi(xv.data());
  return pull_terms<cplx>(&v, nullptr, D, (pm + 1) / 2);
}

FormField pullback_field(const FormField& phi, const ParamMap& s) {
  FormField r;
  r.n = (s.pdim + 1) / 2;
  r.degree = phi.degree;
  r.name = "pullback(" + phi.name + ")";
  r.eval = [phi, s](const double* t) { return pullback(phi, s, t); };
  if (phi.has_jets()) {
    r.jet_order = 1;
    r.eval_jet = [phi, s](const Jet* t) {
      std::vector<Jet> xj(s.ndim);
      s.f_jet(t, xj.data());
      Ext<Jet> v = phi.eval_jet(xj.data());
      std::vector<std::vector<Jet>> D(s.ndim, std::vector<Jet>(s.pdim));
      for (int a = 0; a < s.ndim; ++a)
        for (int b = 0; b < s.pdim; ++b) D[a][b] = partial(xj[a], b);
      return pull_terms<Jet>(nullptr, &v, D, (s.pdim + 1) / 2);
    };
  } else {
    r.jet_order = 0;
  }
  return r;
}

static FormField dpart_field(const FormField& u, const AlmostComplexStructure& J, int p) {
  if (u.degree != 0) throw WrongBidegree("expects a function");
  FormField r;
  r.n = u.n;
  r.degree = 1;
  r.name = std::string(p ? "del" : "delbar") + "(" + u.name + ")";
  r.eval = [u, J, p](const double* x) {
    Ext<Jet> uj = jets_at(u, x, {});
    Jet u0;
    u0.m = 2 * u.n;
    if (!uj.empty()) u0 = uj.terms[0].second;
    auto Pv = projector_data(projector_10(J.J(x)));
    return p ? del_of(u0, Pv) : delbar_of(u0, Pv);
  };
  r.jet_order = 1;
  r.eval_jet = [u, J, p](const Jet* x) {
    Ext<Jet> uj = u.eval_jet(x);
    Jet u0;
    u0.m = 2 * u.n;
    if (!uj.empty()) u0 = uj.terms[0].second;
    auto Pj = projector_data(J.n, J.J_jet(x));
    return bidegree_split(du_jets(u0, u.n), Pj, 1).parts[p];
  };
  return r;
}

FormField delbar_field(const FormField& u, const AlmostComplexStructure& J) { return dpart_field(u, J, 0); }
FormField del_field(const FormField& u, const AlmostComplexStructure& J) { return dpart_field(u, J, 1); }

FormField project_field(const FormField& phi, const AlmostComplexStructure& J, int p) {
  FormField r = phi;
  r.name = "proj" + std::to_string(p) + "(" + phi.name + ")";
  int k = phi.degree;
  r.eval = [phi, J, p, k](const double* x) {
    auto s = bidegree_split(phi(x), projector_10(J.J(x)), k);
    return s.parts[p];
  };
  if (phi.has_jets()) {
    r.eval_jet = [phi, J, p, k](const Jet* x) {
      auto Jj = J.J_jet(x);
      auto s = bidegree_split(phi.eval_jet(x), projector_data(J.n, Jj), k);
      return s.parts[p];
    };
  }
  return r;
}

}  // namespace acx
