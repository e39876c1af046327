#pragma once

// Adaptive tensor Gauss-Legendre cubature on boxes. Each cell is compared with
// the sum over its two halves (split along the axis with the largest Legendre
// tail); the worst cells are refined until the global tolerance is met.
// Refinement decisions are sequential and cells are summed in a fixed order,
// so results do not depend on the number of threads.

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "acx/errors.hpp"
#include "acx/jet.hpp"
#include "acx/structures.hpp"

namespace acx {

struct SingularityHint {
  // distance-like function vanishing on the singular set
  std::function<double(const double*)> fn;
  // cells are split across the zero set until they are this narrow
  double scale = 0.0;
};

struct QuadratureConfig {
  int order = 8;
  int max_depth = 14;  // bisections per axis
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  std::vector<SingularityHint> hints;
  int threads = 1;
  long max_nodes = 400000;
  bool strict = true;  // throw NonConvergence instead of returning a flagged estimate

  void validate() const;
};

struct QuadResult {
  cplx value{};
  double error = 0;
  long cells = 0;
  long evals = 0;
  bool converged = true;
};

using Integrand = std::function<cplx(const double*)>;

QuadResult integrate(const Box& box, const Integrand& f, const QuadratureConfig& cfg);

// single tensor Gauss-Legendre cell
cplx gauss_cell(const Box& box, const Integrand& f, int order);

struct GaussRule {
  std::vector<double> x, w;  // on [-1, 1]
};
const GaussRule& gauss_rule(int order);

// Neumaier-compensated complex accumulator
struct CompensatedSum {
  double re = 0, im = 0, cre = 0, cim = 0;
  void add(cplx v);
  cplx value() const { return {re + cre, im + cim}; }
};

}  // namespace acx
