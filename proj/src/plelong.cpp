#include "acx/plelong.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "acx/errors.hpp"

namespace acx {

namespace {

ExteriorValue wedge_power(const ExteriorValue& w, int k, int n) {
  ExteriorValue r = ExteriorValue::scalar(n, 1.0);
  for (int i = 0; i < k; ++i) r = wedge(r, w);
  return r;
}

Jet scalar_jet(const FormField& f, const double* x, const Engine& e) {
  Ext<Jet> j = jets_at(f, x, e);
  Jet r;
  r.m = 2 * f.n;
  if (!j.empty()) r = j.terms[0].second;
  r.m = 2 * f.n;
  return r;
}

// N = |f|^2 as a jet
Jet norm2_jet(const DefiningMap& dm, const double* x, const Engine& e) {
  Jet N;
  N.m = 2 * dm.n;
  for (auto& fj : dm.f) {
    Jet v = scalar_jet(fj, x, e);
    N += v * conj(v);
  }
  return real(N);
}

std::vector<double> sample_in(const Box& b, std::mt19937_64& rng) {
  std::vector<double> t(b.dim());
  for (int a = 0; a < b.dim(); ++a) t[a] = std::uniform_real_distribution<double>(b.lo[a], b.hi[a])(rng);
  return t;
}

}  // namespace

CurrentPtr DefiningMap::Z() const { return std::make_shared<IntegrationCurrent>(n, zero_charts, J, "[" + name + "=0]"); }

double DefiningMap::abs_f(const double* x) const {
  double s = 0;
  for (auto& fj : f) s += std::norm(fj(x).coeff(0));
  return std::sqrt(s);
}

DefiningMapCheck check_defining_map(const DefiningMap& dm, int samples, std::uint64_t seed, double tol,
                                    const Engine& e) {
  DefiningMapCheck c;
  std::mt19937_64 rng(seed);
  const int m = 2 * dm.n;
  for (auto& ch : dm.zero_charts)
    for (int s = 0; s < samples; ++s) {
      auto t = sample_in(ch.domain, rng);
      std::vector<double> x(m);
      ch.map.f(t.data(), x.data());
      if (!dm.U.contains(x.data())) continue;
      auto Pv = projector_data(projector_10(dm.J.J(x.data())));
      for (auto& fj : dm.f) c.max_dbar_on_Z = std::max(c.max_dbar_on_Z, max_abs(delbar_of(scalar_jet(fj, x.data(), e), Pv)));
    }
  for (int s = 0; s < samples; ++s) {
    auto x = sample_in(dm.U, rng);
    auto Pv = projector_data(projector_10(dm.J.J(x.data())));
    ExteriorValue w = ExteriorValue::scalar(dm.n, 1.0);
    for (auto& fj : dm.f) w = wedge(w, del_of(scalar_jet(fj, x.data(), e), Pv));
    c.min_del_wedge = std::min(c.min_del_wedge, max_abs(w));
  }
  c.ok = c.max_dbar_on_Z <= tol && c.min_del_wedge > tol;
  return c;
}

std::pair<ExteriorValue, ExteriorValue> w1_w2(const DefiningMap& dm, double eps, const double* x, const Engine& e) {
  Jet N = norm2_jet(dm, x, e);
  auto Pj = projector_data(dm.n, structure_jets(dm.J, x, e));
  auto Pv = projector_data(projector_10(dm.J.J(x)));
  ExteriorValue a = i_ddbar_of(N, Pj, Pv);
  ExteriorValue b = scale(wedge(del_of(N, Pv), delbar_of(N, Pv)), cplx(0, 1));
  double D = N.v.real() + eps * eps;
  const int p = dm.p;
  ExteriorValue w1 = scale(wedge_power(a, p, dm.n), std::pow(D, -p));
  ExteriorValue w2 = scale(wedge(wedge_power(a, p - 1, dm.n), b), p * std::pow(D, -p - 1));
  return {w1, w2};
}

ExteriorValue ma_log_direct(const DefiningMap& dm, double eps, const double* x, const Engine& e) {
  Jet u = log(norm2_jet(dm, x, e) + eps * eps);
  auto Pj = projector_data(dm.n, structure_jets(dm.J, x, e));
  auto Pv = projector_data(projector_10(dm.J.J(x)));
  return wedge_power(i_ddbar_of(u, Pj, Pv), dm.p, dm.n);
}

ExteriorValue ma_log_form(const DefiningMap& dm, double eps, const double* x, const Engine& e) {
  Jet u = log(norm2_jet(dm, x, e) + eps * eps);
  return wedge_power(i_ddbar_dense(u, structure_jets(dm.J, x, e), dm.n), dm.p, dm.n);
}

MALogCurrent::MALogCurrent(DefiningMap m, double e_, const Engine& e)
    : SmoothCurrent(value_field(
                        m.n, 2 * m.p, [m, e_, e](const double* x) { return ma_log_form(m, e_, x, e); },
                        "(i ddbar log(|" + m.name + "|^2+eps^2))^p"),
                    "MA log"),
      dm(std::move(m)),
      eps(e_) {
  if (eps <= 0) throw ConfigError("eps must be positive");
}

PairResult ma_log_pairing(const DefiningMap& dm, double eps, const TestForm& psi, const QuadratureConfig& cfg,
                          const Engine& e) {
  MALogCurrent T(dm, eps, e);
  QuadratureConfig c = cfg;
  c.hints.push_back({[dm](const double* x) { return dm.abs_f(x); }, eps});
  return T.pair(psi, c);
}

double pl_kappa(int p) { return std::pow(2 * std::numbers::pi, p); }

std::vector<double> default_eps_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 5; ++k) g.push_back(0.2 * std::ldexp(1.0, -k));
  return g;
}

namespace {

// least squares in the basis 1, eps^2 log eps, eps^2, eps^4 log eps, eps^4 (first k terms)
Eigen::VectorXcd fit_eps(const std::vector<double>& eps, const std::vector<cplx>& v, int k) {
  const int n = (int)eps.size();
  Eigen::MatrixXcd A(n, k);
  Eigen::VectorXcd y(n);
  for (int i = 0; i < n; ++i) {
    double e2 = eps[i] * eps[i], l = std::log(eps[i]);
    double basis[5] = {1, e2 * l, e2, e2 * e2 * l, e2 * e2};
    for (int j = 0; j < k; ++j) A(i, j) = basis[j];
    y(i) = v[i];
  }
  return A.colPivHouseholderQr().solve(y);
}

}  // namespace

PLReport pl_limit(const DefiningMap& dm, const TestForm& psi, const std::vector<double>& eps_grid,
                  const QuadratureConfig& cfg, bool strict, const Engine& e) {
  if (eps_grid.size() < 4) throw ConfigError("the eps grid needs at least four points");
  for (std::size_t i = 1; i < eps_grid.size(); ++i)
    if (!(eps_grid[i] < eps_grid[i - 1]) || eps_grid[i] <= 0)
      throw ConfigError("the eps grid must be positive and decreasing");
  PLReport r;
  r.kappa = pl_kappa(dm.p);
  r.eps = eps_grid;
  double qerr = 0, scale = 0;
  for (double eps : eps_grid) {
    PairResult v = ma_log_pairing(dm, eps, psi, cfg, e);
    r.raw.push_back(v);
    r.normalized.push_back(v.value / r.kappa);
    qerr = std::max(qerr, v.error / r.kappa);
    scale = std::max(scale, std::abs(v.value) / r.kappa);
  }
  const int k = std::min<int>(5, (int)r.eps.size() - 1);
  Eigen::VectorXcd all = fit_eps(r.eps, r.normalized, k);
  std::vector<double> se(r.eps.begin() + 1, r.eps.end());
  std::vector<cplx> sv(r.normalized.begin() + 1, r.normalized.end());
  Eigen::VectorXcd sub = fit_eps(se, sv, k);
  r.limit = all(0);
  r.a = all(1);
  r.b = all(2);
  double spread = std::abs(all(0) - sub(0));
  r.limit_error = spread + 10 * qerr;
  r.stable = spread <= 1e-3 * scale + 10 * qerr;
  if (!r.stable && strict)
    throw ExtrapolationUnstable("eps extrapolants disagree: " + std::to_string(std::abs(all(0))) + " vs " +
                                std::to_string(std::abs(sub(0))));
  r.z_pairing = dm.Z()->pair(psi, cfg);
  r.remainder = r.limit - r.z_pairing.value;
  r.remainder_error = r.limit_error + r.z_pairing.error;
  return r;
}

cplx remainder(const DefiningMap& dm, const TestForm& psi, const std::vector<double>& eps_grid,
               const QuadratureConfig& cfg) {
  return pl_limit(dm, psi, eps_grid, cfg).remainder;
}

ModelConstant model_constant(int p, const QuadratureConfig& cfg) {
  if (p < 1 || 2 * p > kMaxDim) throw ConfigError("model constant needs 1 <= p <= 3");
  const int m = 2 * p;
  // hyperspherical coordinates with |w| = tan(theta): (theta, phi_1, .., phi_{m-1})
  std::vector<double> lo(m, 0.0), hi(m, std::numbers::pi);
  hi[0] = 0.5 * std::numbers::pi;
  hi[m - 1] = 2 * std::numbers::pi;
  Integrand g = [m, p](const double* t) -> cplx {
    double v = std::pow(std::sin(t[0]), 2 * p - 1) * std::cos(t[0]);
    for (int k = 1; k < m - 1; ++k) v *= std::pow(std::sin(t[k]), m - 1 - k);
    return v;
  };
  QuadResult q = integrate(Box(lo, hi), g, cfg);
  ModelConstant r;
  r.value = q.value.real();
  r.error = q.error;
  r.exact = std::pow(std::numbers::pi, p) / std::tgamma(p + 1.0);
  return r;
}

}  // namespace acx
