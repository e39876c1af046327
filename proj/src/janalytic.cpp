#include "acx/janalytic.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <algorithm>
#include <numbers>
#include <random>

#include "acx/errors.hpp"

namespace acx {

namespace {

std::vector<double> point_in(const Box& b, const std::vector<double>& u, double margin) {
  std::vector<double> t(b.dim());
  for (int a = 0; a < b.dim(); ++a) {
    double w = b.hi[a] - b.lo[a];
    t[a] = b.lo[a] + margin * w + (1 - 2 * margin) * w * u[a];
  }
  return t;
}

std::vector<double> uniform(int k, std::mt19937_64& rng) {
  std::vector<double> u(k);
  for (auto& x : u) x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return u;
}

Eigen::VectorXd image(const IntegrationChart& c, const std::vector<double>& t) {
  Eigen::VectorXd x(c.map.ndim);
  c.map.f(t.data(), x.data());
  return x;
}

AreaProbe probe_area(const StratumChart& sc, const ValidateOptions& opt) {
  AreaProbe p;
  p.chart = sc.chart.name;
  QuadratureConfig c = opt.cfg;
  c.strict = false;
  if (sc.excise) {
    for (int k = 0; k < opt.area_levels; ++k) {
      double d = sc.delta0 * std::ldexp(1.0, -k);
      p.deltas.push_back(d);
      p.area.push_back(chart_area(sc.excise(d), c).value.real());
    }
  } else {
    // no singular end: tighten the quadrature instead
    for (int k = 0; k < opt.area_levels; ++k) {
      QuadratureConfig ck = c;
      ck.abs_tol = c.abs_tol * std::pow(0.1, k);
      ck.rel_tol = c.rel_tol * std::pow(0.1, k);
      p.deltas.push_back(0.0);
      p.area.push_back(chart_area(sc.chart, ck).value.real());
    }
  }
  p.diverges = true;
  for (std::size_t k = 1; k < p.area.size(); ++k) {
    double g = p.area[k] / p.area[k - 1];
    p.growth.push_back(g);
    if (!(g > opt.growth_factor)) p.diverges = false;
  }
  if (p.growth.empty()) p.diverges = false;
  double last = p.area.back(), prev = p.area[p.area.size() - 2];
  p.stable = std::isfinite(last) && std::abs(last - prev) <= opt.stable_tol * std::abs(last);
  return p;
}

}  // namespace

QuadResult chart_area(const IntegrationChart& c, const QuadratureConfig& cfg) {
  const int k = c.map.pdim, m = c.map.ndim;
  auto fj = c.map.f_jet;
  Integrand g = [fj, k, m](const double* t) -> cplx {
    std::vector<Jet> ts(k), xs(m);
    for (int a = 0; a < k; ++a) ts[a] = seed(t[a], a, k);
    fj(ts.data(), xs.data());
    Eigen::MatrixXd D(m, k);
    for (int b = 0; b < m; ++b)
      for (int a = 0; a < k; ++a) D(b, a) = xs[b].g[a].real();
    return std::sqrt(std::max((D.transpose() * D).determinant(), 0.0));
  };
  return integrate(c.domain, g, cfg);
}

ValidationReport validate(Stratification& A, const AlmostComplexStructure& J, const ValidateOptions& opt) {
  ValidationReport rep;
  std::mt19937_64 rng(opt.seed);
  auto fail = [&](const std::string& s) {
    rep.failures.push_back(s);
    rep.pass = false;
  };
  if (A.strata.empty()) fail("no strata");
  for (std::size_t i = 0; i < A.strata.size(); ++i) {
    const Stratum& S = A.strata[i];
    StratumReport sr;
    sr.dim = S.dim;
    if (i && S.dim <= A.strata[i - 1].dim) rep.monotone = false;
    if (S.dim == 0) {
      for (auto& x : S.points)
        if (x.size() != 2 * A.n) sr.dims_ok = false;
      if (!S.charts.empty()) sr.dims_ok = false;
    } else {
      if (!S.points.empty()) sr.dims_ok = false;
    }
    for (auto& sc : S.charts) {
      const auto& c = sc.chart;
      if (c.map.pdim != 2 * S.dim || c.map.ndim != 2 * A.n || c.domain.dim() != c.map.pdim) {
        sr.dims_ok = false;
        continue;
      }
      for (int s = 0; s < opt.samples; ++s) {
        auto t = point_in(c.domain, uniform(c.map.pdim, rng), 0.0);
        sr.max_residual = std::max(sr.max_residual, j_invariance_residual(c.map, J, t.data()));
      }
      sr.area.push_back(probe_area(sc, opt));
    }
    std::string tag = "stratum " + std::to_string(S.dim) + ": ";
    if (!sr.dims_ok) fail(tag + "chart dimensions do not match");
    if (sr.max_residual > opt.residual_tol) fail(tag + "not J-invariant, residual " + std::to_string(sr.max_residual));
    for (auto& a : sr.area) {
      if (a.diverges) fail(tag + "area of '" + a.chart + "' grows without bound near the lower strata");
      else if (!a.stable) fail(tag + "area of '" + a.chart + "' is not stable under refinement");
    }
    rep.strata.push_back(std::move(sr));
  }
  if (!rep.monotone) fail("strata dimensions must increase");

  // pure dimension: A_{j-1} lies in the closure of the top stratum
  if (A.pure && A.strata.size() > 1) {
    struct Sample {
      const IntegrationChart* c;
      std::vector<double> t;
      Eigen::VectorXd x;
    };
    std::vector<Sample> top;
    for (auto& sc : A.strata.back().charts) {
      const Box& b = sc.chart.domain;
      const int k = b.dim();
      const int g = k <= 2 ? 64 : 8;
      long total = 1;
      for (int a = 0; a < k; ++a) total *= g;
      for (long idx = 0; idx < total; ++idx) {
        std::vector<double> u(k);
        long r = idx;
        for (int a = 0; a < k; ++a) {
          u[a] = (r % g + 0.5) / g;
          r /= g;
        }
        auto t = point_in(b, u, 0.0);
        top.push_back({&sc.chart, t, image(sc.chart, t)});
      }
    }
    // nearest sample, then a shrinking coordinate search in its chart
    auto gap = [&](const Eigen::VectorXd& x) {
      const Sample* best = nullptr;
      double d = INFINITY;
      for (auto& y : top)
        if ((x - y.x).norm() < d) {
          d = (x - y.x).norm();
          best = &y;
        }
      if (!best) return d;
      const Box& b = best->c->domain;
      std::vector<double> t = best->t, step(b.dim());
      for (int a = 0; a < b.dim(); ++a) step[a] = (b.hi[a] - b.lo[a]) / 64;
      for (int it = 0; it < 60; ++it) {
        bool moved = false;
        for (int a = 0; a < b.dim(); ++a)
          for (double s : {-1.0, 1.0}) {
            auto u = t;
            u[a] = std::clamp(u[a] + s * step[a], b.lo[a], b.hi[a]);
            double du = (x - image(*best->c, u)).norm();
            if (du < d) {
              d = du;
              t = u;
              moved = true;
            }
          }
        if (!moved)
          for (auto& h : step) h *= 0.5;
      }
      return d;
    };
    for (std::size_t i = 0; i + 1 < A.strata.size(); ++i) {
      for (auto& x : A.strata[i].points) rep.pure_gap = std::max(rep.pure_gap, gap(x));
      for (auto& sc : A.strata[i].charts)
        for (int s = 0; s < opt.samples; ++s)
          rep.pure_gap = std::max(rep.pure_gap, gap(image(sc.chart, point_in(sc.chart.domain, uniform(sc.chart.domain.dim(), rng), 0.0))));
    }
    rep.pure_ok = rep.pure_gap <= opt.pure_tol;
    if (!rep.pure_ok) fail("lower strata are not in the closure of the top stratum");
  }
  A.validated = rep.pass;
  A.J = J;
  return rep;
}

CurrentPtr integration_current(const Stratification& A) {
  if (!A.validated || !A.J) throw ValidationRequired("stratification '" + A.name + "' has not passed validation");
  std::vector<IntegrationChart> cs;
  for (auto& sc : A.strata.back().charts) cs.push_back(sc.chart);
  return std::make_shared<IntegrationCurrent>(A.n, cs, *A.J, "[" + A.name + "]");
}

std::vector<Eigen::VectorXd> sample_top(const Stratification& A, int count, std::uint64_t seed, double margin) {
  if (A.strata.empty() || A.strata.back().charts.empty()) throw ConfigError("no top stratum to sample");
  const auto& cs = A.strata.back().charts;
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < count; ++i) {
    const auto& c = cs[i % cs.size()].chart;
    out.push_back(image(c, point_in(c.domain, uniform(c.domain.dim(), rng), margin)));
  }
  return out;
}

GenericLelong generic_lelong(const Current& T, const std::vector<Eigen::VectorXd>& points,
                             const AlmostComplexStructure& J, const std::vector<double>& radii,
                             const QuadratureConfig& cfg) {
  if (points.empty()) throw ConfigError("generic Lelong number needs sample points");
  GenericLelong g;
  g.points = points;
  g.m = INFINITY;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto r = lelong_number(T, adapted_chart(J, points[i]), radii, J, cfg);
    g.values.push_back(r.profile.nu0);
    g.widths.push_back(r.profile.nu0_width);
    if (r.profile.nu0 < g.m) {
      g.m = r.profile.nu0;
      g.argmin = (int)i;
    }
  }
  return g;
}

RestrictionReport restriction_check(const Current& T, const Stratification& A, const std::vector<TestForm>& probes,
                                    double m_A, double delta0, int levels, const QuadratureConfig& cfg) {
  if (!A.tube) throw ConfigError("restriction check needs a tube function for '" + A.name + "'");
  auto Z = integration_current(A);
  if (Z->test_degree != T.test_degree) throw DimensionMismatch("A and T have different dimensions");
  RestrictionReport rep;
  rep.m_A = m_A;
  for (auto& psi : probes) {
    RestrictionRow row;
    row.probe = psi.name;
    auto tl = tube_limit(T, *A.tube, psi, cfg, delta0, levels, false, false);
    row.lhs = tl.limit;
    row.lhs_error = tl.error;
    row.rhs = m_A * Z->pair(psi, cfg).value;
    row.rel_dev = std::abs(row.lhs - row.rhs) / std::max(std::abs(row.rhs), 1e-6);
    rep.max_dev = std::max(rep.max_dev, row.rel_dev);
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------- examples

Stratification flat_line(double half) {
  Stratification A;
  A.n = 2;
  A.name = "w=0";
  Stratum S;
  S.dim = 1;
  StratumChart sc;
  sc.chart = flat_chart(2, 1, Box::cube(2, half));
  sc.chart.name = "line";
  S.charts.push_back(sc);
  A.strata.push_back(S);
  A.tube = make_tube([]<class S>(const S* x) { return x[2] * x[2] + x[3] * x[3]; });
  return A;
}

Stratification punctured_line(double half) {
  Stratification A = flat_line(half);
  A.name = "w=0, origin marked";
  Stratum P;
  P.dim = 0;
  P.points.push_back(Eigen::VectorXd::Zero(4));
  A.strata.insert(A.strata.begin(), P);
  return A;
}

namespace {

IntegrationChart graph_chart(double delta, double r) {
  IntegrationChart c;
  // (rho, phi) -> (e^{1/w}, w), w = rho e^{i phi}
  c.map = make_map(2, 4, []<class S>(const S* t, S* x) {
    using std::cos, std::exp, std::sin;
    S rho = t[0], phi = t[1];
    S m = exp(cos(phi) / rho), a = sin(phi) / rho;
    x[0] = m * cos(a);
    x[1] = -(m * sin(a));
    x[2] = rho * cos(phi);
    x[3] = rho * sin(phi);
  });
  c.domain = Box({delta, 0.0}, {r, 2 * std::numbers::pi});
  c.name = "graph";
  return c;
}

}  // namespace

Stratification exp_graph(double r, double half) {
  Stratification A;
  A.n = 2;
  A.name = "z=e^{1/w} with w=0";
  Stratum S;
  S.dim = 1;
  StratumChart g;
  g.chart = graph_chart(0.5 * r, r);
  g.delta0 = 0.5 * r;
  g.excise = [r](double d) { return graph_chart(d, r); };
  StratumChart line;
  line.chart = flat_chart(2, 1, Box::cube(2, half));
  line.chart.name = "line";
  S.charts = {g, line};
  A.strata.push_back(S);
  return A;
}

}  // namespace acx
