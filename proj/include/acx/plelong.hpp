#pragma once

// Regularized Monge-Ampere currents of log|f|^2 and their limit as eps -> 0.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "acx/currents.hpp"

namespace acx {

struct DefiningMap {
  int n = 0, p = 0;
  std::string name;
  std::vector<FormField> f;  // f_1..f_p as scalar fields
  Box U;
  std::vector<IntegrationChart> zero_charts;  // parametrize Z = {f = 0}
  AlmostComplexStructure J;

  CurrentPtr Z() const;
  // |f(x)|
  double abs_f(const double* x) const;
};

// f(const S* x, coeff_t<S>* out) writes f_1..f_p.
template <class F>
DefiningMap make_defining_map(int n, int p, F f, Box U, std::vector<IntegrationChart> zero_charts,
                              AlmostComplexStructure J, std::string name = "f") {
  DefiningMap dm;
  dm.n = n;
  dm.p = p;
  dm.name = name;
  dm.U = std::move(U);
  dm.zero_charts = std::move(zero_charts);
  dm.J = std::move(J);
  for (int j = 0; j < p; ++j) {
    auto comp = [f, j, n, p](const auto* x) {
      using S = scalar_of<decltype(x)>;
      std::vector<coeff_t<S>> out(p);
      f(x, out.data());
      return ExtOf<S>::scalar(n, out[j]);
    };
    dm.f.push_back(make_field(n, 0, comp, name + "_" + std::to_string(j + 1)));
  }
  return dm;
}

struct DefiningMapCheck {
  double max_dbar_on_Z = 0;  // max |delbar_J f_j| at sampled points of Z
  double min_del_wedge = INFINITY;  // min |del f_1 ^ ... ^ del f_p| on U
  bool ok = false;
};
DefiningMapCheck check_defining_map(const DefiningMap& dm, int samples, std::uint64_t seed, double tol = 1e-8,
                                    const Engine& e = {});

// w1 = (i ddbar N)^p / (N + eps^2)^p, w2 = p (i ddbar N)^{p-1} ^ i del N ^ delbar N / (N + eps^2)^{p+1}, N = |f|^2
std::pair<ExteriorValue, ExteriorValue> w1_w2(const DefiningMap& dm, double eps, const double* x,
                                              const Engine& e = {});
// (i ddbar log(N + eps^2))^p through the exterior algebra path
ExteriorValue ma_log_direct(const DefiningMap& dm, double eps, const double* x, const Engine& e = {});
// same, through the dense evaluator; used for quadrature
ExteriorValue ma_log_form(const DefiningMap& dm, double eps, const double* x, const Engine& e = {});

class MALogCurrent : public SmoothCurrent {
 public:
  DefiningMap dm;
  double eps;
  MALogCurrent(DefiningMap m, double eps, const Engine& e = {});
};

// pairing with a hint on |f| at scale eps
PairResult ma_log_pairing(const DefiningMap& dm, double eps, const TestForm& psi, const QuadratureConfig& cfg,
                          const Engine& e = {});

// divisor calibrated on the integrable model
double pl_kappa(int p);
std::vector<double> default_eps_grid();

struct PLReport {
  std::vector<double> eps;
  std::vector<PairResult> raw;
  std::vector<cplx> normalized;
  double kappa = 1;
  // normalized(eps) ~ limit + a eps^2 log eps + b eps^2 + O(eps^4 log eps)
  cplx limit{}, a{}, b{};
  double limit_error = 0;
  bool stable = true;
  PairResult z_pairing;
  cplx remainder{};
  double remainder_error = 0;
};

PLReport pl_limit(const DefiningMap& dm, const TestForm& psi, const std::vector<double>& eps_grid,
                  const QuadratureConfig& cfg, bool strict = true, const Engine& e = {});
// <R_J(f), psi> = normalized limit - <[Z], psi>
cplx remainder(const DefiningMap& dm, const TestForm& psi, const std::vector<double>& eps_grid,
               const QuadratureConfig& cfg);

struct ModelConstant {
  double value = 0, error = 0, exact = 0;
};
// int over C^p of dV / (|w|^2 + 1)^{p+1}
ModelConstant model_constant(int p, const QuadratureConfig& cfg);

}  // namespace acx
