#include "acx/lelong.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <optional>

#include "acx/errors.hpp"

namespace acx {

double tau(int p) { return std::pow(std::numbers::pi, p) / std::tgamma(p + 1.0); }

std::vector<double> default_radii() {
  std::vector<double> r;
  for (int k = 0; k <= 5; ++k) r.push_back(0.4 * std::ldexp(1.0, -k));
  return r;
}

namespace {

MassResult scaled_mass(MassResult m, double s) {
  m.value *= s;
  m.error *= std::abs(s);
  return m;
}

MassResult real_mass(const PairResult& p) { return {p.value.real(), p.error, p.converged}; }

}  // namespace

MassResult sigma(const Current& T, const CoordinateChart& chart, double r, const AlmostComplexStructure& J,
                 const QuadratureConfig& cfg) {
  return mass(T, chart, r, J, cfg);
}

MassResult nu(const Current& T, const CoordinateChart& chart, double r, const AlmostComplexStructure& J,
              const QuadratureConfig& cfg) {
  int p = T.bidim();
  return scaled_mass(sigma(T, chart, r, J, cfg), 1.0 / (tau(p) * std::pow(r, 2 * p)));
}

MassResult sigma_bar(const Current& T, const CoordinateChart& chart, double r, const AlmostComplexStructure& J,
                     const QuadratureConfig& cfg) {
  if (T.test_degree != 2) throw UnsupportedCurrent("sigma_bar is available for bidimension (1,1) only");
  return real_mass(T.ball_integral(chart, r, beta_field(chart, J), cfg));
}

MassResult nu_bar(const Current& T, const CoordinateChart& chart, double r, const AlmostComplexStructure& J,
                  const QuadratureConfig& cfg) {
  return scaled_mass(sigma_bar(T, chart, r, J, cfg), 1.0 / (tau(1) * r * r));
}

MassResult nu_ddbar(const Current& ddbarT, int p, const CoordinateChart& chart, double t,
                    const AlmostComplexStructure& J, const QuadratureConfig& cfg) {
  if (ddbarT.bidim() != p - 1) throw BidegreeMismatch("i ddbar T must have bidimension (p-1,p-1)");
  FormField W = power_over_factorial(beta1_field(chart, J), p - 1, ddbarT.n);
  MassResult m = real_mass(ddbarT.ball_integral(chart, t, W, cfg));
  return scaled_mass(m, 1.0 / (tau(p - 1) * std::pow(t, 2 * (p - 1))));
}

double fit_power(const std::vector<double>& t, const std::vector<double>& nu_t, const std::vector<double>& nu_err) {
  const int k = (int)t.size();
  if (k < 3) throw ConfigError("the power-law fit needs three samples");
  if (std::abs(nu_t[k - 1]) <= 3 * nu_err[k - 1] + 1e-14) return INFINITY;
  Eigen::MatrixXd A(3, 2);
  Eigen::VectorXd y(3);
  for (int j = 0; j < 3; ++j) {
    int i = k - 3 + j;
    A(j, 0) = 1;
    A(j, 1) = std::log(t[i]);
    y(j) = std::log(std::max(std::abs(nu_t[i]), 1e-300));
  }
  double alpha = A.colPivHouseholderQr().solve(y)(1);
  if (alpha < 0.05) throw IntegrandBlowup("nu(t)/t is not integrable at 0: fitted exponent " + std::to_string(alpha));
  return alpha;
}

GResult g_from_profile(const std::vector<double>& t, const std::vector<double>& nu_t, const std::vector<double>& nu_err,
                       double r, int p, std::optional<double> alpha) {
  const int k = (int)t.size();
  if (k < 1 || nu_t.size() != t.size() || nu_err.size() != t.size()) throw ConfigError("g needs samples of nu");
  for (int i = 1; i < k; ++i)
    if (!(t[i] < t[i - 1]) || t[i] <= 0) throw ConfigError("t grid must be positive and decreasing");
  if (std::abs(t[0] - r) > 1e-12 * r) throw ConfigError("t grid must start at r");
  const double r2p = std::pow(r, 2 * p);
  auto F = [&](int i) { return (std::pow(t[i], 2 * p) / r2p - 1.0) * nu_t[i]; };  // integrand times t
  GResult g;
  g.alpha = alpha ? *alpha : fit_power(t, nu_t, nu_err);
  // between samples nu is taken as a t^b through both ends, integrated exactly;
  // trapezoid in log t when the ends differ in sign
  auto seg = [&](double b, double lo, double hi) {
    return std::abs(b) < 1e-12 ? std::log(hi / lo) : (std::pow(hi, b) - std::pow(lo, b)) / b;
  };
  for (int i = 0; i + 1 < k; ++i) {
    double h = std::log(t[i] / t[i + 1]);
    double v0 = nu_t[i], v1 = nu_t[i + 1];
    if (v0 * v1 > 0) {
      double b = std::log(v0 / v1) / h;
      double a = v0 / std::pow(t[i], b);
      g.raw += a * (seg(b + 2 * p, t[i + 1], t[i]) / r2p - seg(b, t[i + 1], t[i]));
    } else {
      g.raw += 0.5 * h * (F(i) + F(i + 1));
    }
    g.error += 0.5 * h * (nu_err[i] + nu_err[i + 1]);
  }
  // power-law tail below the smallest sample
  double t0 = t[k - 1], v0 = nu_t[k - 1];
  if (!std::isfinite(g.alpha)) {
    g.error += std::abs(v0) + nu_err[k - 1];
    return g;
  }
  double tail = v0 * (std::pow(t0, 2 * p) / ((g.alpha + 2 * p) * r2p) - 1.0 / g.alpha);
  g.raw += tail;
  g.error += 0.5 * std::abs(tail);
  return g;
}

GResult g_integral(const Current& ddbarT, int p, const CoordinateChart& chart, double r,
                   const std::vector<double>& t_grid, const AlmostComplexStructure& J, const QuadratureConfig& cfg) {
  std::vector<double> t, v, e;
  for (double ti : t_grid) {
    if (ti > r * (1 + 1e-12)) continue;
    auto m = nu_ddbar(ddbarT, p, chart, ti, J, cfg);
    t.push_back(ti);
    v.push_back(m.value);
    e.push_back(m.error);
  }
  return g_from_profile(t, v, e, r, p);
}

double monotone_constant(const std::vector<double>& radii, const std::vector<double>& v, const std::vector<double>& err,
                         int k, double c_max) {
  auto ok = [&](double c) {
    for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
      double a = std::pow(1 + c * radii[i], k), b = std::pow(1 + c * radii[i + 1], k);
      if (a * v[i] < b * v[i + 1] - a * err[i] - b * err[i + 1]) return false;
    }
    return true;
  };
  if (ok(0.0)) return 0.0;
  for (int j = 0;; ++j) {
    double c = 1e-3 * std::pow(10.0, j / 8.0);
    if (c > c_max * (1 + 1e-12)) break;
    if (ok(c)) return c;
  }
  return -1;
}

std::pair<double, double> extrapolate_linear(const std::vector<double>& r, const std::vector<double>& v,
                                             const std::vector<double>& err) {
  const int k = (int)r.size();
  if (k < 3) throw ConfigError("extrapolation needs three radii");
  // the r^2 column absorbs the smooth part of the current
  const int cols = k >= 4 ? 3 : 2;
  Eigen::MatrixXd A(k, cols);
  Eigen::VectorXd y(k);
  for (int i = 0; i < k; ++i) {
    A(i, 0) = 1;
    A(i, 1) = r[i];
    if (cols == 3) A(i, 2) = r[i] * r[i];
    y(i) = v[i];
  }
  Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
  double res = 0, emax = 0;
  for (int i = 0; i < k; ++i) {
    res = std::max(res, std::abs(A.row(i).dot(c) - y(i)));
    emax = std::max(emax, err[i]);
  }
  return {c(0), 2 * res + emax};
}

LelongResult lelong_number(const Current& T, const CoordinateChart& chart, const std::vector<double>& radii,
                           const AlmostComplexStructure& J, const QuadratureConfig& cfg, const LelongOptions& opt) {
  if (radii.size() < 3) throw ConfigError("the radii grid needs at least three points");
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (!(radii[i] > 0) || (i && !(radii[i] < radii[i - 1])))
      throw ConfigError("radii must be positive and strictly decreasing");
  const int p = T.bidim();
  LelongResult out;
  auto& P = out.profile;
  P.radii = radii;
  P.chart = chart.name;
  for (double r : radii) {
    auto s = sigma(T, chart, r, J, cfg);
    double norm = 1.0 / (tau(p) * std::pow(r, 2 * p));
    P.sigma.push_back(s.value);
    P.sigma_err.push_back(s.error);
    P.nu.push_back(s.value * norm);
    P.nu_err.push_back(s.error * norm);
  }
  // a negative current is handled through -T
  P.flipped = P.nu[0] < -P.nu_err[0];
  const double sgn = P.flipped ? -1.0 : 1.0;
  std::vector<double> v(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) v[i] = sgn * P.nu[i];

  auto& C = out.correction;
  C.c = monotone_constant(radii, v, P.nu_err, 2 * p, opt.c_max);
  if (C.c < 0) throw MonotoneFitFailure("no c <= " + std::to_string(opt.c_max) + " makes (1+cr)^{2p} nu monotone");
  auto [n0, w] = extrapolate_linear(radii, v, P.nu_err);
  P.nu0 = sgn * n0;
  P.nu0_width = w;

  if (!opt.ddbarT) return out;
  if (p != 1) throw UnsupportedCurrent("the corrected quantity is available for bidimension (1,1) only");
  const int k = (int)radii.size();
  std::vector<double> vb(k), vbe(k), dd(k), dde(k);
  QuadratureConfig dcfg = cfg;
  dcfg.abs_tol = std::max(cfg.abs_tol, opt.ddbar_abs_tol);
  for (int i = 0; i < k; ++i) {
    auto m = nu_bar(T, chart, radii[i], J, cfg);
    vb[i] = sgn * m.value;
    vbe[i] = m.error;
    auto d = nu_ddbar(*opt.ddbarT, p, chart, radii[i], J, dcfg);
    dd[i] = sgn * d.value;
    dde[i] = d.error;
  }
  C.nu_bar = vb;
  C.nu_bar_err = vbe;
  C.nu_ddbar = dd;
  double alpha = fit_power(radii, dd, dde);
  for (int i = 0; i < k; ++i) {
    std::vector<double> t(radii.begin() + i, radii.end()), nv(dd.begin() + i, dd.end()), ne(dde.begin() + i, dde.end());
    GResult g = g_from_profile(t, nv, ne, radii[i], p, alpha);
    C.g.push_back(g.raw);
    C.g_err.push_back(g.error);
  }
  // delta for (1+dr)^{4p} nu_bar + (1+dr)^{4p-1} s g, trying the sign as defined first
  auto corrected = [&](double d, int s, std::vector<double>& q, std::vector<double>& qe) {
    q.assign(k, 0);
    qe.assign(k, 0);
    for (int i = 0; i < k; ++i) {
      double a = std::pow(1 + d * radii[i], 4 * p), b = std::pow(1 + d * radii[i], 4 * p - 1);
      q[i] = a * vb[i] + b * s * C.g[i];
      qe[i] = a * vbe[i] + b * C.g_err[i];
    }
  };
  auto monotone = [&](const std::vector<double>& q, const std::vector<double>& qe) {
    for (int i = 0; i + 1 < k; ++i)
      if (q[i] < q[i + 1] - qe[i] - qe[i + 1]) return false;
    return true;
  };
  double best = -1;
  int best_sign = 1;
  for (int s : {1, -1}) {
    std::vector<double> q, qe;
    for (int j = -1;; ++j) {
      double d = j < 0 ? 0.0 : 1e-3 * std::pow(10.0, j / 8.0);
      if (d > opt.c_max * (1 + 1e-12)) break;
      corrected(d, s, q, qe);
      if (monotone(q, qe)) {
        if (best < 0 || d < best) {
          best = d;
          best_sign = s;
        }
        break;
      }
    }
  }
  C.has_delta = best >= 0;
  C.delta = std::max(best, 0.0);
  C.g_sign = best_sign;
  std::vector<double> q, qe;
  corrected(C.delta, C.g_sign, q, qe);
  for (int i = 0; i < k; ++i) C.corrected.push_back(sgn * q[i]);
  for (auto& x : C.g) x *= sgn;
  for (auto& x : C.nu_bar) x *= sgn;
  for (auto& x : C.nu_ddbar) x *= sgn;
  return out;
}

InvarianceReport coord_invariance(const Current& T, const CoordinateChart& A, const CoordinateChart& B,
                                  const std::vector<double>& radii, const AlmostComplexStructure& J,
                                  const QuadratureConfig& cfg) {
  if ((A.center - B.center).norm() > 1e-12) throw ConfigError("charts must share their center");
  auto a = lelong_number(T, A, radii, J, cfg);
  auto b = lelong_number(T, B, radii, J, cfg);
  InvarianceReport r;
  r.radii = radii;
  r.nu_a = a.profile.nu;
  r.nu_b = b.profile.nu;
  r.nu0_a = a.profile.nu0;
  r.nu0_b = b.profile.nu0;
  r.diff = std::abs(r.nu0_a - r.nu0_b);
  r.width = a.profile.nu0_width + b.profile.nu0_width;
  return r;
}

}  // namespace acx
