#pragma once

// Chart-based stratifications of J-analytic sets, their validation, integration
// currents, generic Lelong numbers and the restriction check 1_A T = m_A [A].

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "acx/lelong.hpp"

namespace acx {

struct StratumChart {
  IntegrationChart chart;
  // the chart with the delta-neighbourhood of its singular end removed; used by the
  // area probe (delta -> 0 approaches the lower strata)
  std::function<IntegrationChart(double)> excise;
  double delta0 = 0;
};

// A_j \ A_{j-1}: charts of parameter dimension 2 dim, or isolated points when dim = 0
struct Stratum {
  int dim = 0;
  std::vector<StratumChart> charts;
  std::vector<Eigen::VectorXd> points;
};

struct Stratification {
  int n = 2;
  std::string name;
  std::vector<Stratum> strata;  // increasing dimension, top stratum last
  bool pure = true;
  bool irreducible = true;
  std::optional<Tube> tube;  // squared distance-like function of the top stratum

  // set by validate
  bool validated = false;
  std::optional<AlmostComplexStructure> J;

  int dim() const { return strata.empty() ? -1 : strata.back().dim; }
};

struct AreaProbe {
  std::string chart;
  std::vector<double> deltas, area, growth;
  bool diverges = false;
  bool stable = true;
};

struct StratumReport {
  int dim = 0;
  bool dims_ok = true;
  double max_residual = 0;  // J-invariance of the chart tangent spaces
  std::vector<AreaProbe> area;
};

struct ValidationReport {
  std::vector<StratumReport> strata;
  bool monotone = true;
  // lower-stratum points lie within pure_tol of sampled top-stratum points
  double pure_gap = 0;
  bool pure_ok = true;
  bool pass = true;
  std::vector<std::string> failures;
};

struct ValidateOptions {
  int samples = 50;
  std::uint64_t seed = 1;
  double residual_tol = 1e-8;
  double pure_tol = 1e-6;
  int area_levels = 4;  // three refinements
  double growth_factor = 2.0;
  double stable_tol = 5e-2;
  QuadratureConfig cfg;
};

ValidationReport validate(Stratification& A, const AlmostComplexStructure& J, const ValidateOptions& opt = {});

// 2j-dimensional Riemannian volume of a chart
QuadResult chart_area(const IntegrationChart& c, const QuadratureConfig& cfg);

// [A], the trivial extension of the top stratum's integration current
CurrentPtr integration_current(const Stratification& A);

// seeded points on the top stratum, away from the chart boundary
std::vector<Eigen::VectorXd> sample_top(const Stratification& A, int count, std::uint64_t seed, double margin = 0.25);

struct GenericLelong {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> values, widths;
  double m = 0;
  int argmin = -1;
};

GenericLelong generic_lelong(const Current& T, const std::vector<Eigen::VectorXd>& points,
                             const AlmostComplexStructure& J, const std::vector<double>& radii,
                             const QuadratureConfig& cfg);

struct RestrictionRow {
  std::string probe;
  cplx lhs{}, rhs{};
  double lhs_error = 0;
  double rel_dev = 0;
};

struct RestrictionReport {
  double m_A = 0;
  std::vector<RestrictionRow> rows;
  double max_dev = 0;
};

RestrictionReport restriction_check(const Current& T, const Stratification& A, const std::vector<TestForm>& probes,
                                    double m_A, double delta0, int levels, const QuadratureConfig& cfg);

// examples

// {w = 0} over |z| < half (cube), one stratum
Stratification flat_line(double half = 1.0);
// {w = 0} with the origin as a zero-dimensional stratum
Stratification punctured_line(double half = 1.0);
// {z = e^{1/w}, 0 < |w| < r} together with {w = 0}
Stratification exp_graph(double r = 0.5, double half = 1.0);

}  // namespace acx
