#pragma once

// Currents paired with compactly supported test forms by adaptive cubature.

#include <memory>
#include <string>
#include <vector>

#include "acx/calculus.hpp"
#include "acx/quadrature.hpp"

namespace acx {

struct TestForm {
  FormField field;
  Box support;
  std::string name;
  int degree() const { return field.degree; }
};

enum class BumpProfile {
  Standard,    // exp(1 - 1/(1 - s^2)), s^2 = sum ((x_a - c_a)/h_a)^2
  Polynomial,  // prod_a (1 - s_a^2)^4: C^3, polynomial inside the box
};

template <class S>
coeff_t<S> bump_value(const S* x, const std::vector<double>& c, const std::vector<double>& h,
                      BumpProfile profile = BumpProfile::Standard) {
  if (profile == BumpProfile::Polynomial) {
    coeff_t<S> v = 1.0;
    for (std::size_t a = 0; a < c.size(); ++a) {
      auto t = (x[a] - c[a]) * (1.0 / h[a]);
      auto u = 1.0 - t * t * cplx(1.0);
      if (value_of(u).real() <= 0.0) return coeff_t<S>(0.0) * u;
      auto u2 = u * u;
      v = v * u2 * u2;
    }
    return v;
  }
  coeff_t<S> s2 = 0.0;
  for (std::size_t a = 0; a < c.size(); ++a) {
    auto t = (x[a] - c[a]) * (1.0 / h[a]);
    s2 = s2 + t * t * cplx(1.0);
  }
  if (value_of(s2).real() >= 1.0) return coeff_t<S>(0.0) * s2;
  return exp(1.0 - 1.0 / (1.0 - s2));
}

inline Jet constant_like(const Jet& t, double c) {
  Jet r(c);
  r.m = t.m;
  return r;
}

template <class T>
T smooth_step(const T& t) {
  double tv = value_of(t).real();
  if (tv <= 0) return constant_like(t, 0.0);
  if (tv >= 1) return constant_like(t, 1.0);
  auto f1 = exp(-1.0 / t);
  auto f2 = exp(-1.0 / (1.0 - t));
  return f1 / (f1 + f2);
}
inline double smooth_step(double t) {
  if (t <= 0) return 0.0;
  if (t >= 1) return 1.0;
  double f1 = std::exp(-1.0 / t), f2 = std::exp(-1.0 / (1.0 - t));
  return f1 / (f1 + f2);
}

// bump(box) * coefficient field
TestForm bump_form(const Box& support, const FormField& coeff, std::string name = "",
                   BumpProfile profile = BumpProfile::Standard);
FormField constant_field(const ExteriorValue& v);
FormField scalar_field_one(int n);

struct PairResult {
  cplx value{};
  double error = 0;
  bool converged = true;
  PairResult& operator+=(const PairResult& o) {
    value += o.value;
    error += o.error;
    converged = converged && o.converged;
    return *this;
  }
};

class CoordinateChart;

class Current {
 public:
  virtual ~Current() = default;
  int n = 0;
  int test_degree = 0;  // degree of the test forms it pairs with; bidimension (d/2, d/2)
  std::string name;

  int bidim() const { return test_degree / 2; }
  int form_degree() const { return 2 * n - test_degree; }

  PairResult pair(const TestForm& psi, const QuadratureConfig& cfg) const;
  // Integral of T against weight * indicator(|z| < r), for a weight of degree test_degree.
  virtual PairResult ball_integral(const CoordinateChart& chart, double r, const FormField& weight,
                                   const QuadratureConfig& cfg) const;
  virtual PairResult box_integral(const Box& box, const FormField& weight, const QuadratureConfig& cfg) const;
  // number of variables the pairing integrates over
  virtual int quadrature_dim() const { return 2 * n; }

 protected:
  virtual PairResult pair_impl(const TestForm& psi, const QuadratureConfig& cfg) const = 0;
};

using CurrentPtr = std::shared_ptr<const Current>;

class SmoothCurrent : public Current {
 public:
  FormField form;
  explicit SmoothCurrent(FormField f, std::string nm = "smooth");
  PairResult ball_integral(const CoordinateChart& chart, double r, const FormField& weight,
                           const QuadratureConfig& cfg) const override;
  PairResult box_integral(const Box& box, const FormField& weight, const QuadratureConfig& cfg) const override;

 protected:
  PairResult pair_impl(const TestForm& psi, const QuadratureConfig& cfg) const override;
};

struct IntegrationChart {
  ParamMap map;
  Box domain;
  // when set, parameter t_k equals the ambient coordinate x[coord[k]]
  std::vector<int> coord;
  int orientation = 0;  // 0: taken from J at the domain center
  std::string name;
};

class IntegrationCurrent : public Current {
 public:
  std::vector<IntegrationChart> charts;
  IntegrationCurrent(int n, std::vector<IntegrationChart> charts, const AlmostComplexStructure& J,
                     std::string nm = "integration");
  int quadrature_dim() const override { return test_degree; }

 protected:
  PairResult pair_impl(const TestForm& psi, const QuadratureConfig& cfg) const override;
};

class LinearCombination : public Current {
 public:
  std::vector<std::pair<double, CurrentPtr>> terms;
  explicit LinearCombination(std::vector<std::pair<double, CurrentPtr>> t, std::string nm = "combination");
  PairResult ball_integral(const CoordinateChart& chart, double r, const FormField& weight,
                           const QuadratureConfig& cfg) const override;
  PairResult box_integral(const Box& box, const FormField& weight, const QuadratureConfig& cfg) const override;

 protected:
  PairResult pair_impl(const TestForm& psi, const QuadratureConfig& cfg) const override;
};

// Orientation of a J-complex parametrization at t: +1 or -1 (0 if degenerate).
int complex_orientation(const ParamMap& map, const AlmostComplexStructure& J, const double* t);
// || J dsigma - dsigma M || for the best M, relative to ||dsigma||
double j_invariance_residual(const ParamMap& map, const AlmostComplexStructure& J, const double* t);

// flat piece {x_{2k} = x_{2k+1} = 0 for k >= p} over a parameter box
IntegrationChart flat_chart(int n, int p, const Box& domain, const std::vector<double>& offset = {});

// ---------------------------------------------------------------- operators

// d phi as a field; jets (first order fewer) need identity seeds
FormField d_field(const FormField& phi, const Engine& e = {});

CurrentPtr scaled(CurrentPtr T, double c);
CurrentPtr sum(std::vector<std::pair<double, CurrentPtr>> terms);

// <dT, phi> = (-1)^{deg T + 1} <T, d phi>
CurrentPtr d_current(CurrentPtr T, const Engine& e = {});
// <i ddbar T, phi> = <T, -i delbar del phi>
CurrentPtr ddbar_current(CurrentPtr T, const AlmostComplexStructure& J, const Engine& e = {});
// direct coefficientwise versions for smooth currents
CurrentPtr d_smooth(const SmoothCurrent& T, const Engine& e = {});
CurrentPtr ddbar_smooth(const SmoothCurrent& T, const AlmostComplexStructure& J, const Engine& e = {});

// ---------------------------------------------------------------- mass

// beta_1 = (i/2) del_J delbar_J |z|^2 and beta = (i/2) d delbar_J |z|^2 for a chart
FormField beta1_field(const CoordinateChart& chart, const AlmostComplexStructure& J);
FormField beta_field(const CoordinateChart& chart, const AlmostComplexStructure& J);
// w^k / k!
FormField power_over_factorial(const FormField& w, int k, int n);

struct MassResult {
  double value = 0;
  double error = 0;
  bool converged = true;
};

// int_{B(r)} T ^ beta_1^p / p!
MassResult mass(const Current& T, const CoordinateChart& chart, double r, const AlmostComplexStructure& J,
                const QuadratureConfig& cfg);
// int_box T ^ beta_1^p / p!
MassResult mass_box(const Current& T, const Box& box, const CoordinateChart& chart, const AlmostComplexStructure& J,
                    const QuadratureConfig& cfg);

// ---------------------------------------------------------------- probes

struct ProbeReport {
  double min_real = INFINITY;
  double max_abs_imag = 0;
  double max_abs = 0;
  int witness = -1;
  bool pass = true;
  std::vector<cplx> values;
};

// strongly positive probes of bidegree (q,q): bump * prod_k i alpha_k ^ conj(alpha_k), alpha_k = P10(x) a_k
std::vector<TestForm> strongly_positive_probes(const AlmostComplexStructure& J, int q, int count, std::uint64_t seed,
                                               const Box& region, double radius,
                                               BumpProfile profile = BumpProfile::Standard);
// real test forms of degree k (for closedness probes)
std::vector<TestForm> random_probes(int n, int k, int count, std::uint64_t seed, const Box& region, double radius,
                                    BumpProfile profile = BumpProfile::Standard);

ProbeReport probe_positive(const Current& T, const std::vector<TestForm>& probes, const QuadratureConfig& cfg,
                           double tol = 1e-6);
ProbeReport probe_closed(const Current& T, const std::vector<TestForm>& etas, const QuadratureConfig& cfg,
                         double tol = 1e-6, const Engine& e = {});
ProbeReport probe_psh(CurrentPtr T, const AlmostComplexStructure& J, const std::vector<TestForm>& probes,
                      const QuadratureConfig& cfg, double tol = 1e-6);

// ---------------------------------------------------------------- tube localization

struct Tube {
  // squared distance-like function vanishing exactly on A
  std::function<double(const double*)> rho2;
  std::function<Jet(const Jet*)> rho2_jet;
};

template <class F>
Tube make_tube(F f) {
  Tube t;
  t.rho2 = [f](const double* x) { return std::real(value_of(f(x))); };
  t.rho2_jet = [f](const Jet* x) { return Jet(f(x)); };
  return t;
}

TestForm tube_cutoff(const TestForm& psi, const Tube& A, double delta, bool complement = false);
PairResult tube_mass(const Current& T, const Tube& A, double delta, const TestForm& psi, const QuadratureConfig& cfg);

struct TubeLimit {
  std::vector<double> deltas;
  std::vector<cplx> values;
  std::vector<cplx> extrapolants;
  cplx limit{};
  double error = 0;
  bool stable = true;
};

// delta_k = delta0 2^-k, k = 0..levels-1, linear extrapolation in delta
TubeLimit tube_limit(const Current& T, const Tube& A, const TestForm& psi, const QuadratureConfig& cfg,
                     double delta0, int levels = 7, bool complement = false, bool strict = true);

}  // namespace acx
