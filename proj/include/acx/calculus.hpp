#pragma once

// Form fields and their derivatives: d, the four-way splitting of d relative to
// J, i del_J delbar_J on functions, and pullbacks by parametrizations.

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <type_traits>

#include "acx/algebra.hpp"
#include "acx/structures.hpp"

namespace acx {

template <class P>
using scalar_of = std::remove_cv_t<std::remove_pointer_t<P>>;
template <class S>
using ExtOf = Ext<coeff_t<S>>;

struct FormField {
  int n = 0;
  int degree = 0;
  std::string name;
  std::function<ExteriorValue(const double*)> eval;
  // Jet evaluation; when jet_order == 1 only values and gradients are meaningful,
  // and only for identity-seeded inputs.
  std::function<Ext<Jet>(const Jet*)> eval_jet;
  int jet_order = 2;

  ExteriorValue operator()(const double* x) const { return eval(x); }
  ExteriorValue operator()(const Eigen::VectorXd& x) const { return eval(x.data()); }
  bool has_jets() const { return (bool)eval_jet; }
};

// f is a generic callable: f(const S* x) -> Ext<coeff_t<S>> for S in {double, Jet}.
template <class F>
FormField make_field(int n, int degree, F f, std::string name = "") {
  FormField r;
  r.n = n;
  r.degree = degree;
  r.name = std::move(name);
  r.eval = [f](const double* x) {
    ExteriorValue v = f(x);
    prune(v);
    return v;
  };
  r.eval_jet = [f](const Jet* x) { return f(x); };
  return r;
}

// value-only field; derivatives of it need the difference engine
FormField value_field(int n, int degree, std::function<ExteriorValue(const double*)> f, std::string name = "");

FormField operator+(const FormField& a, const FormField& b);
FormField scale(const FormField& a, cplx s);
FormField wedge(const FormField& a, const FormField& b);

// Smooth map R^{pdim} -> R^{ndim}.
struct ParamMap {
  int pdim = 0, ndim = 0;
  std::function<void(const double*, double*)> f;
  std::function<void(const Jet*, Jet*)> f_jet;
};

template <class F>
ParamMap make_map(int pdim, int ndim, F f) {
  ParamMap m;
  m.pdim = pdim;
  m.ndim = ndim;
  m.f = [f](const double* t, double* x) { f(t, x); };
  m.f_jet = [f](const Jet* t, Jet* x) { f(t, x); };
  return m;
}

// Coefficient jets of a field at x (second order).
Ext<Jet> jets_at(const FormField& phi, const double* x, const Engine& e = {});
// J entries as jets at x (first order is what matters)
std::vector<Jet> structure_jets(const AlmostComplexStructure& J, const double* x, const Engine& e = {});

ExteriorValue d(const FormField& phi, const double* x, const Engine& e = {});
inline ExteriorValue d(const FormField& phi, const Eigen::VectorXd& x, const Engine& e = {}) {
  return d(phi, x.data(), e);
}

struct SplitD {
  int p = 0, q = 0;
  ExteriorValue del, delbar, theta, thetabar;  // d = del + delbar - theta - thetabar
  ExteriorValue dphi;
  double residual = 0;  // components of d outside the four admissible bidegrees
};

SplitD split_d(const FormField& phi, const AlmostComplexStructure& J, const double* x, const Engine& e = {},
               std::optional<std::pair<int, int>> declared = std::nullopt);

// Operators on a function u given its second-order jet and the jets/values of P10.
ExteriorValue delbar_of(const Jet& u, const ProjectorData<cplx>& Pv);
ExteriorValue del_of(const Jet& u, const ProjectorData<cplx>& Pv);
ExteriorValue i_ddbar_of(const Jet& u, const ProjectorData<Jet>& Pj, const ProjectorData<cplx>& Pv);
// i d delbar u (all bidegrees), used for beta
ExteriorValue i_d_dbar_of(const Jet& u, const ProjectorData<Jet>& Pj);

// Same as i_ddbar_of, by dense matrix algebra: Jj are the J entries (row-major) as jets
// carrying values and first derivatives.
ExteriorValue i_ddbar_dense(const Jet& u, const std::vector<Jet>& Jj, int n);

ExteriorValue ddbar(const FormField& u, const AlmostComplexStructure& J, const double* x, const Engine& e = {});
inline ExteriorValue ddbar(const FormField& u, const AlmostComplexStructure& J, const Eigen::VectorXd& x,
                           const Engine& e = {}) {
  return ddbar(u, J, x.data(), e);
}

ExteriorValue pullback(const FormField& phi, const ParamMap& s, const double* t);
// sigma^* phi as a field on parameter space (jets valid to first order)
FormField pullback_field(const FormField& phi, const ParamMap& s);

// delbar_J u and del_J u of a function as 1-form fields (jets valid to first order)
FormField delbar_field(const FormField& u, const AlmostComplexStructure& J);
FormField del_field(const FormField& u, const AlmostComplexStructure& J);

// The (p,q) components of a field, pointwise in J.
FormField project_field(const FormField& phi, const AlmostComplexStructure& J, int p);

// Random form field of degree k whose coefficients are complex quadratics in x.
inline FormField random_poly_field(int n, int k, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  const int m = 2 * n;
  struct Term {
    std::uint32_t mask;
    std::vector<cplx> c;  // 1 + m + m*m entries
  };
  std::vector<Term> terms;
  for (std::uint32_t mk = 0; mk < (1u << m); ++mk) {
    if (std::popcount(mk) != k) continue;
    Term t{mk, {}};
    for (int i = 0; i < 1 + m + m * m; ++i) t.c.push_back(cplx(g(rng), g(rng)) * 0.5);
    terms.push_back(t);
  }
  auto f = [terms, n, m](const auto* x) {
    using S = scalar_of<decltype(x)>;
    ExtOf<S> r(n);
    for (auto& t : terms) {
      coeff_t<S> v = t.c[0];
      for (int a = 0; a < m; ++a) v = v + x[a] * t.c[1 + a];
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) v = v + x[a] * x[b] * t.c[1 + m + a * m + b];
      r.terms.push_back({t.mask, v});
    }
    return r;
  };
  return make_field(n, k, f, "poly");
}

}  // namespace acx
