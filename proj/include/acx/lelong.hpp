#pragma once

// Trace-measure densities nu_T(r), their corrected variants, and Lelong numbers.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "acx/currents.hpp"

namespace acx {

// volume of the unit ball of C^p
double tau(int p);
std::vector<double> default_radii();

MassResult sigma(const Current& T, const CoordinateChart& chart, double r, const AlmostComplexStructure& J,
                 const QuadratureConfig& cfg);
// sigma / (tau_p r^{2p})
MassResult nu(const Current& T, const CoordinateChart& chart, double r, const AlmostComplexStructure& J,
              const QuadratureConfig& cfg);

// int_{B(r)} T ^ beta for bidimension (1,1); the two correction terms vanish there by bidegree.
// Larger p raises UnsupportedCurrent.
MassResult sigma_bar(const Current& T, const CoordinateChart& chart, double r, const AlmostComplexStructure& J,
                     const QuadratureConfig& cfg);
MassResult nu_bar(const Current& T, const CoordinateChart& chart, double r, const AlmostComplexStructure& J,
                  const QuadratureConfig& cfg);

// nu of i ddbar T at radius t, normalized with tau_{p-1} t^{2(p-1)}
MassResult nu_ddbar(const Current& ddbarT, int p, const CoordinateChart& chart, double t,
                    const AlmostComplexStructure& J, const QuadratureConfig& cfg);

struct GResult {
  // the integrand int_0^r (t^{2p}/r^{2p} - 1) nu(t)/t dt, which is <= 0 for nu >= 0
  double raw = 0;
  double error = 0;
  // fitted exponent of nu(t) ~ C t^alpha near 0
  double alpha = 0;
};

// exponent of nu(t) ~ C t^alpha from the three smallest samples; INFINITY when nu is
// below its error there; IntegrandBlowup when nu(t)/t is not integrable
double fit_power(const std::vector<double>& t, const std::vector<double>& nu_t, const std::vector<double>& nu_err);

// g(r) from samples of nu on a grid r = t_1 > ... > t_k; the segment below the
// smallest t follows the power law (fitted from the samples unless given)
GResult g_from_profile(const std::vector<double>& t, const std::vector<double>& nu_t, const std::vector<double>& nu_err,
                       double r, int p, std::optional<double> alpha = std::nullopt);
GResult g_integral(const Current& ddbarT, int p, const CoordinateChart& chart, double r,
                   const std::vector<double>& t_grid, const AlmostComplexStructure& J, const QuadratureConfig& cfg);

struct LelongProfile {
  std::vector<double> radii;  // decreasing
  std::vector<double> sigma, sigma_err, nu, nu_err;
  std::string chart;
  double nu0 = 0, nu0_width = 0;
  bool flipped = false;  // T was negative; values reported with the sign restored
};

struct CorrectionData {
  double c = 0;
  double delta = 0;
  bool has_delta = false;
  std::vector<double> nu_bar, nu_bar_err, g, g_err, corrected;
  // +1: g as defined was used; -1: its negative
  int g_sign = 1;
  std::vector<double> nu_ddbar;
};

struct LelongOptions {
  double c_max = 1e3;
  // set for psh currents: i ddbar T, enables the corrected quantity
  CurrentPtr ddbarT;
  // absolute tolerance floor for the i ddbar T ball integrals, whose second-derivative
  // cutoffs are far more expensive than the plain masses
  double ddbar_abs_tol = 1e-5;
};

struct LelongResult {
  LelongProfile profile;
  CorrectionData correction;
};

LelongResult lelong_number(const Current& T, const CoordinateChart& chart, const std::vector<double>& radii,
                           const AlmostComplexStructure& J, const QuadratureConfig& cfg, const LelongOptions& opt = {});

// smallest c in {0} U [1e-3, c_max] (log grid) with (1+c r)^k v(r) nondecreasing in r within error bars, or -1
double monotone_constant(const std::vector<double>& radii, const std::vector<double>& v, const std::vector<double>& err,
                         int k, double c_max);

struct InvarianceReport {
  std::vector<double> radii, nu_a, nu_b;
  double nu0_a = 0, nu0_b = 0, diff = 0, width = 0;
};
InvarianceReport coord_invariance(const Current& T, const CoordinateChart& A, const CoordinateChart& B,
                                  const std::vector<double>& radii, const AlmostComplexStructure& J,
                                  const QuadratureConfig& cfg);

// least-squares nu(r) = nu0 + a r + b r^2 (b dropped below four radii); returns {nu0, width}
std::pair<double, double> extrapolate_linear(const std::vector<double>& r, const std::vector<double>& v,
                                             const std::vector<double>& err);

}  // namespace acx
