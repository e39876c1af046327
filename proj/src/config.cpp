#include "acx/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "acx/janalytic.hpp"
#include "acx/plelong.hpp"

namespace acx {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------- schema helpers

const json& object_at(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  return j;
}

void allow(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  object_at(j, where);
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

std::vector<double> vec_of(const json& j, const char* key, const std::string& where, int dim = -1) {
  auto v = get<std::vector<double>>(j, key, where);
  if (dim >= 0 && (int)v.size() != dim)
    throw ConfigError(where + "." + key + ": expected " + std::to_string(dim) + " entries");
  return v;
}

// complex matrix as rows of [re, im] pairs
Eigen::MatrixXcd cmatrix(const json& j, int n, const std::string& where) {
  if (!j.is_array() || (int)j.size() != n) throw ConfigError(where + ": expected " + std::to_string(n) + " rows");
  Eigen::MatrixXcd M(n, n);
  for (int a = 0; a < n; ++a) {
    if (!j[a].is_array() || (int)j[a].size() != n) throw ConfigError(where + ": row of wrong length");
    for (int b = 0; b < n; ++b) {
      auto e = j[a][b];
      if (e.is_number())
        M(a, b) = e.get<double>();
      else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
        M(a, b) = cplx(e[0].get<double>(), e[1].get<double>());
      else
        throw ConfigError(where + ": entries are numbers or [re, im]");
    }
  }
  return M;
}

Box box_of(const json& j, int dim, const std::string& where) {
  allow(j, where, {"center", "half", "lo", "hi"});
  if (j.contains("lo") || j.contains("hi")) {
    Box b(vec_of(j, "lo", where, dim), vec_of(j, "hi", where, dim));
    for (int a = 0; a < dim; ++a)
      if (!(b.lo[a] < b.hi[a])) throw ConfigError(where + ": empty box");
    return b;
  }
  std::vector<double> c = j.contains("center") ? vec_of(j, "center", where, dim) : std::vector<double>(dim, 0.0);
  double h = get<double>(j, "half", where);
  if (!(h > 0)) throw ConfigError(where + ".half must be positive");
  return Box::cube(dim, h, c);
}

void inside(const AlmostComplexStructure& J, const Box& b, const std::string& where) {
  if (!J.domain.contains(b)) throw ConfigError(where + ": domain leaves the validity box of the structure");
}

// ---------------------------------------------------------------- formatting

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  void add(std::vector<std::string> r) { rows.push_back(std::move(r)); }
  std::string text(const json& prov) const {
    std::ostringstream s;
    for (auto it = prov.begin(); it != prov.end(); ++it) s << "# " << it.key() << ": " << it.value().dump() << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) s << (i ? "," : "") << header[i];
    s << "\n";
    for (auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) s << (i ? "," : "") << r[i];
      s << "\n";
    }
    return s.str();
  }
};

const char* kFail = "NonConvergence";

// ---------------------------------------------------------------- context

struct Context {
  json cfg;
  std::string kind;
  std::uint64_t seed = 1;
  Engine engine;
  QuadratureConfig q;
  Csv csv;
  json summary = json::object();
  int exit_code = 0;
  std::vector<std::string> violations;

  void violation(const std::string& what) {
    violations.push_back(what);
    exit_code = std::max(exit_code, 3);
  }
};

QuadratureConfig quadrature_of(const json& j, int threads) {
  QuadratureConfig c;
  c.order = 6;
  c.abs_tol = 1e-8;
  c.rel_tol = 1e-7;
  if (!j.is_null()) {
    const std::string w = "quadrature";
    allow(j, w, {"order", "max_depth", "abs_tol", "rel_tol", "max_nodes"});
    c.order = get<int>(j, "order", w, c.order);
    c.max_depth = get<int>(j, "max_depth", w, c.max_depth);
    c.abs_tol = get<double>(j, "abs_tol", w, c.abs_tol);
    c.rel_tol = get<double>(j, "rel_tol", w, c.rel_tol);
    c.max_nodes = get<long>(j, "max_nodes", w, c.max_nodes);
  }
  c.threads = threads;
  c.validate();
  return c;
}

json quadrature_json(const QuadratureConfig& c) {
  return {{"order", c.order}, {"max_depth", c.max_depth}, {"abs_tol", c.abs_tol}, {"rel_tol", c.rel_tol},
          {"max_nodes", c.max_nodes}};
}

// ---------------------------------------------------------------- specs

AlmostComplexStructure structure_of(const json& j, const std::string& where) {
  allow(j, where, {"kind", "n", "lambda", "half_width", "domain"});
  auto kind = get<std::string>(j, "kind", where);
  if (kind == "standard") {
    int n = get<int>(j, "n", where, 2);
    if (n < 1 || n > 3) throw ConfigError(where + ".n must be 1, 2 or 3");
    auto J = make_standard(n);
    if (j.contains("domain")) J.domain = box_of(j["domain"], 2 * n, where + ".domain");
    return J;
  }
  if (kind == "twisted") {
    if (j.contains("n") && get<int>(j, "n", where) != 2) throw ConfigError(where + ": the twisted family has n = 2");
    if (j.contains("domain")) throw ConfigError(where + ": the twisted domain is set by half_width");
    return make_twisted(get<double>(j, "lambda", where), get<double>(j, "half_width", where, 0.7));
  }
  throw ConfigError(where + ".kind must be standard or twisted");
}

std::string structure_label(const AlmostComplexStructure& J) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "twisted(%g)", J.lambda);
  return J.kind == "twisted" ? buf : J.kind;
}

BumpProfile profile_of(const json& j, const std::string& where) {
  auto p = get<std::string>(j, "profile", where, "polynomial");
  if (p == "polynomial") return BumpProfile::Polynomial;
  if (p == "standard") return BumpProfile::Standard;
  throw ConfigError(where + ".profile must be polynomial or standard");
}

// one form, or a generated family
std::vector<TestForm> test_forms_of(const json& j, const AlmostComplexStructure& J, const std::string& where) {
  const int n = J.n, m = 2 * n;
  auto kind = get<std::string>(j, "kind", where, "bump");
  if (kind == "strongly_positive" || kind == "random") {
    allow(j, where, {"kind", "bidegree", "degree", "count", "seed", "region", "radius", "profile"});
    Box region = box_of(get<json>(j, "region", where), m, where + ".region");
    double radius = get<double>(j, "radius", where);
    int count = get<int>(j, "count", where);
    auto s = get<std::uint64_t>(j, "seed", where, 1);
    Box reach = region;
    for (int a = 0; a < m; ++a) reach.lo[a] -= radius, reach.hi[a] += radius;
    inside(J, reach, where);
    if (kind == "random") return random_probes(n, get<int>(j, "degree", where), count, s, region, radius, profile_of(j, where));
    return strongly_positive_probes(J, get<int>(j, "bidegree", where, 1), count, s, region, radius, profile_of(j, where));
  }
  if (kind != "bump") throw ConfigError(where + ".kind must be bump, strongly_positive or random");
  allow(j, where, {"kind", "name", "support", "profile", "terms"});
  Box support = box_of(get<json>(j, "support", where), m, where + ".support");
  inside(J, support, where);
  const auto& terms = get<json>(j, "terms", where);
  if (!terms.is_array() || terms.empty()) throw ConfigError(where + ".terms: expected a nonempty list");
  ExteriorValue v(n);
  int degree = -1;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    std::string w = where + ".terms[" + std::to_string(t) + "]";
    allow(terms[t], w, {"dx", "value"});
    auto idx = get<std::vector<int>>(terms[t], "dx", w);
    std::uint32_t mask = 0;
    for (int a : idx) {
      if (a < 0 || a >= m) throw ConfigError(w + ".dx: index out of range");
      if (mask & (1u << a)) throw ConfigError(w + ".dx: repeated index");
      mask |= 1u << a;
    }
    if (!std::is_sorted(idx.begin(), idx.end())) throw ConfigError(w + ".dx: indices must increase");
    if (degree >= 0 && degree != (int)idx.size()) throw ConfigError(where + ": terms of mixed degree");
    degree = (int)idx.size();
    auto val = get<std::vector<double>>(terms[t], "value", w, {1.0, 0.0});
    if (val.size() != 2) throw ConfigError(w + ".value: expected [re, im]");
    v = v + ExteriorValue::basis(n, mask, cplx(val[0], val[1]));
  }
  return {bump_form(support, constant_field(v), get<std::string>(j, "name", where, "psi"), profile_of(j, where))};
}

std::vector<TestForm> test_form_list(const json& j, const AlmostComplexStructure& J, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty list");
  std::vector<TestForm> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    auto f = test_forms_of(j[i], J, where + "[" + std::to_string(i) + "]");
    for (auto& t : f) {
      if (t.name.empty() || t.name == "psi") t.name = "psi" + std::to_string(out.size());
      out.push_back(std::move(t));
    }
  }
  return out;
}

Stratification stratification_of(const json& j, const std::string& where) {
  allow(j, where, {"kind", "half", "r"});
  auto kind = get<std::string>(j, "kind", where);
  double half = get<double>(j, "half", where, 1.0);
  if (kind == "line") return flat_line(half);
  if (kind == "punctured_line") return punctured_line(half);
  if (kind == "exp_graph") return exp_graph(get<double>(j, "r", where, 0.5), half);
  throw ConfigError(where + ".kind must be line, punctured_line or exp_graph");
}

void check_stratification_domain(const Stratification& A, const AlmostComplexStructure& J, const std::string& where) {
  if (A.n != J.n) throw ConfigError(where + ": stratification and structure differ in dimension");
  for (auto& S : A.strata)
    for (auto& c : S.charts) {
      // chart images at the parameter box corners
      const Box& d = c.chart.domain;
      const int k = d.dim();
      std::vector<double> t(k), x(2 * J.n);
      for (int corner = 0; corner < (1 << k); ++corner) {
        for (int a = 0; a < k; ++a) t[a] = (corner >> a) & 1 ? d.hi[a] : d.lo[a];
        c.chart.map.f(t.data(), x.data());
        if (!J.domain.contains(x.data())) throw ConfigError(where + ": chart leaves the validity box");
      }
    }
}

ValidateOptions validate_options(const json& j, const QuadratureConfig& q, std::uint64_t seed, const std::string& where) {
  ValidateOptions o;
  o.cfg = q;
  o.seed = seed;
  if (j.is_null()) return o;
  allow(j, where, {"samples", "residual_tol", "pure_tol", "area_levels", "growth_factor", "stable_tol"});
  o.samples = get<int>(j, "samples", where, o.samples);
  o.residual_tol = get<double>(j, "residual_tol", where, o.residual_tol);
  o.pure_tol = get<double>(j, "pure_tol", where, o.pure_tol);
  o.area_levels = get<int>(j, "area_levels", where, o.area_levels);
  o.growth_factor = get<double>(j, "growth_factor", where, o.growth_factor);
  o.stable_tol = get<double>(j, "stable_tol", where, o.stable_tol);
  return o;
}

Stratification validated(const json& spec, const AlmostComplexStructure& J, Context& ctx, const std::string& where) {
  auto A = stratification_of(spec, where);
  check_stratification_domain(A, J, where);
  auto rep = validate(A, J, validate_options(nullptr, ctx.q, ctx.seed, where));
  if (!rep.pass) {
    std::string why;
    for (auto& f : rep.failures) why += (why.empty() ? "" : "; ") + f;
    throw ValidationRequired(where + ": stratification '" + A.name + "' failed validation: " + why);
  }
  return A;
}

struct CurrentSpec {
  CurrentPtr T;
  CurrentPtr ddbarT;  // i ddbar T
  std::string label;
};

// sum of terms; integration terms without their own stratification use `fallback`
CurrentSpec current_of(const json& j, const AlmostComplexStructure& J, Context& ctx, const std::string& where,
                       const Stratification* fallback = nullptr) {
  json terms = j.is_object() && j.contains("terms") ? j["terms"] : j;
  if (j.is_object() && j.contains("terms")) allow(j, where, {"terms"});
  if (terms.is_object()) terms = json::array({terms});
  if (!terms.is_array() || terms.empty()) throw ConfigError(where + ": expected a term or a list of terms");
  std::vector<std::pair<double, CurrentPtr>> parts, dparts;
  std::string label;
  const int n = J.n;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    std::string w = where + "[" + std::to_string(t) + "]";
    const json& s = terms[t];
    allow(s, w, {"kind", "coef", "stratification", "R"});
    auto kind = get<std::string>(s, "kind", w);
    double coef = get<double>(s, "coef", w, 1.0);
    CurrentPtr T, dT;
    if (kind == "integration") {
      Stratification A;
      if (s.contains("stratification"))
        A = validated(s["stratification"], J, ctx, w + ".stratification");
      else if (fallback)
        A = *fallback;
      else
        throw ConfigError(w + ": integration term needs a stratification");
      T = integration_current(A);
      dT = ddbar_current(T, J, ctx.engine);
    } else if (kind == "beta1" || kind == "psh_quadratic") {
      if (s.contains("stratification")) throw ConfigError(w + ": unexpected stratification");
      std::shared_ptr<SmoothCurrent> S;
      if (kind == "beta1") {
        if (s.contains("R")) throw ConfigError(w + ": unexpected key 'R'");
        ExteriorValue b(n);
        for (int k = 0; k < n; ++k) b = b + ExteriorValue::basis(n, 0b11u << (2 * k), 1.0);
        S = std::make_shared<SmoothCurrent>(constant_field(b), "beta1");
      } else {
        if (n != 2) throw ConfigError(w + ": psh_quadratic is defined for n = 2");
        double R = get<double>(s, "R", w, 0.5);
        // (|x|^2 - R^2)(dx0 ^ dx1 + dx2 ^ dx3)
        S = std::make_shared<SmoothCurrent>(
            make_field(2, 2,
                       [R]<class S_>(const S_* x) {
                         coeff_t<S_> u = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3] - R * R) * cplx(1.0);
                         Ext<coeff_t<S_>> r(2);
                         r.terms = {{0b0011u, u}, {0b1100u, u}};
                         return r;
                       },
                       "psh_quadratic"),
            "psh_quadratic");
      }
      T = S;
      dT = ddbar_smooth(*S, J, ctx.engine);
    } else {
      throw ConfigError(w + ".kind must be integration, beta1 or psh_quadratic");
    }
    parts.push_back({coef, T});
    dparts.push_back({coef, dT});
    label += (label.empty() ? "" : " + ") + num(coef) + "*" + kind;
  }
  CurrentSpec out;
  out.label = label;
  if (parts.size() == 1 && parts[0].first == 1.0) {
    out.T = parts[0].second;
    out.ddbarT = dparts[0].second;
  } else {
    out.T = sum(parts);
    out.ddbarT = sum(dparts);
  }
  return out;
}

CoordinateChart chart_of(const json& j, const AlmostComplexStructure& J, const std::string& where) {
  const int n = J.n;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(2 * n);
  if (j.is_null()) return adapted_chart(J, c);
  allow(j, where, {"kind", "center", "U", "q"});
  if (j.contains("center")) {
    auto v = vec_of(j, "center", where, 2 * n);
    c = Eigen::Map<Eigen::VectorXd>(v.data(), 2 * n);
  }
  if (!J.domain.contains(c.data())) throw ConfigError(where + ".center lies outside the validity box");
  auto base = adapted_chart(J, c);
  auto kind = get<std::string>(j, "kind", where, "adapted");
  if (kind == "adapted") return base;
  if (kind == "rotated") return rotated_chart(base, cmatrix(get<json>(j, "U", where), n, where + ".U"));
  if (kind == "perturbed") {
    const auto& q = get<json>(j, "q", where);
    if (!q.is_array() || (int)q.size() != n) throw ConfigError(where + ".q: expected one matrix per coordinate");
    std::vector<Eigen::MatrixXcd> Q;
    for (int k = 0; k < n; ++k) Q.push_back(cmatrix(q[k], n, where + ".q[" + std::to_string(k) + "]"));
    return perturbed_chart(base, Q);
  }
  throw ConfigError(where + ".kind must be adapted, rotated or perturbed");
}

std::vector<double> radii_of(const json& cfg) {
  if (!cfg.contains("radii")) return default_radii();
  return get<std::vector<double>>(cfg, "radii", "config");
}

DefiningMap map_of(const json& j, const AlmostComplexStructure& J, const std::string& where) {
  allow(j, where, {"kind", "half"});
  auto kind = get<std::string>(j, "kind", where);
  double h = get<double>(j, "half", where, 0.6);
  const int n = J.n;
  Box U = Box::cube(2 * n, h);
  inside(J, U, where);
  if (kind == "w") {
    if (n != 2) throw ConfigError(where + ": map w needs n = 2");
    return make_defining_map(
        2, 1, []<class S>(const S* x, coeff_t<S>* out) { out[0] = x[2] + x[3] * cplx(0, 1); }, U,
        {flat_chart(2, 1, Box::cube(2, h))}, J, "w");
  }
  if (kind == "zw") {
    if (n != 2) throw ConfigError(where + ": map zw needs n = 2");
    return make_defining_map(
        2, 2,
        []<class S>(const S* x, coeff_t<S>* out) {
          out[0] = x[0] + x[1] * cplx(0, 1);
          out[1] = x[2] + x[3] * cplx(0, 1);
        },
        U, {}, J, "zw");
  }
  if (kind == "z") {
    if (n != 1) throw ConfigError(where + ": map z needs n = 1");
    return make_defining_map(
        1, 1, []<class S>(const S* x, coeff_t<S>* out) { out[0] = x[0] + x[1] * cplx(0, 1); }, U, {}, J, "z");
  }
  throw ConfigError(where + ".kind must be w, zw or z");
}

std::vector<AlmostComplexStructure> structures_swept(const json& cfg, const std::string& where) {
  std::vector<AlmostComplexStructure> out;
  if (cfg.contains("lambdas")) {
    json base = get<json>(cfg, "structure", where);
    if (get<std::string>(base, "kind", where + ".structure") != "twisted")
      throw ConfigError(where + ": lambdas require a twisted structure");
    auto ls = get<std::vector<double>>(cfg, "lambdas", where);
    if (ls.empty()) throw ConfigError(where + ".lambdas: empty");
    for (double l : ls) {
      base["lambda"] = l;
      out.push_back(structure_of(base, where + ".structure"));
    }
  } else {
    out.push_back(structure_of(get<json>(cfg, "structure", where), where + ".structure"));
  }
  return out;
}

bool is_numerical(const Error& e) {
  const auto& k = e.kind();
  return k == "NonConvergence" || k == "ExtrapolationUnstable" || k == "IntegrandBlowup" || k == "MonotoneFitFailure";
}

// ---------------------------------------------------------------- experiments

void run_split_check(Context& ctx) {
  const json& c = ctx.cfg;
  allow(c, "config", {"kind", "description", "seed", "engine", "quadrature", "structures", "fields", "half",
                      "tolerance", "torsion_min"});
  int fields = get<int>(c, "fields", "config", 100);
  double half = get<double>(c, "half", "config", 0.5);
  double tol = get<double>(c, "tolerance", "config", 1e-8);
  double tmin = get<double>(c, "torsion_min", "config", 1e-3);
  const auto& specs = get<json>(c, "structures", "config");
  if (!specs.is_array() || specs.empty()) throw ConfigError("config.structures: expected a nonempty list");
  ctx.csv.header = {"structure", "field", "degree", "p", "reconstruction_residual", "outside_residual", "theta_max",
                    "thetabar_max"};
  ctx.summary["structures"] = json::array();
  for (std::size_t s = 0; s < specs.size(); ++s) {
    std::string w = "config.structures[" + std::to_string(s) + "]";
    json spec = specs[s];
    auto expect = get<std::string>(spec, "expect_torsion", w, "any");
    spec.erase("expect_torsion");
    if (expect != "zero" && expect != "nonzero" && expect != "any")
      throw ConfigError(w + ".expect_torsion must be zero, nonzero or any");
    auto J = structure_of(spec, w);
    const int n = J.n;
    inside(J, Box::cube(2 * n, half), w);
    std::mt19937_64 rng(ctx.seed + s);
    std::uniform_real_distribution<double> U(-half, half);
    double max_rec = 0, max_out = 0, max_tor = 0;
    for (int f = 0; f < fields; ++f) {
      int k = f % (2 * n);
      int lo = std::max(0, k - n), hi = std::min(k, n);
      int p = lo + (f / (2 * n)) % (hi - lo + 1);
      auto phi = project_field(random_poly_field(n, k, rng), J, p);
      std::vector<double> x(2 * n);
      for (auto& v : x) v = U(rng);
      auto sd = split_d(phi, J, x.data(), ctx.engine, std::pair{p, k - p});
      double rec = max_abs(sd.dphi - (sd.del + sd.delbar - sd.theta - sd.thetabar));
      double th = max_abs(sd.theta), tb = max_abs(sd.thetabar);
      max_rec = std::max(max_rec, rec);
      max_out = std::max(max_out, sd.residual);
      max_tor = std::max({max_tor, th, tb});
      ctx.csv.add({structure_label(J), std::to_string(f), std::to_string(k), std::to_string(p), num(rec),
                   num(sd.residual), num(th), num(tb)});
    }
    bool ok = max_rec <= tol && max_out <= tol;
    if (expect == "zero") ok = ok && max_tor <= tol;
    if (expect == "nonzero") ok = ok && max_tor >= tmin;
    if (!ok) ctx.violation(structure_label(J) + ": splitting check failed");
    ctx.summary["structures"].push_back({{"structure", structure_label(J)},
                                         {"max_reconstruction_residual", max_rec},
                                         {"max_outside_residual", max_out},
                                         {"max_torsion", max_tor},
                                         {"expect_torsion", expect},
                                         {"pass", ok}});
  }
}

void pl_model_constant(Context& ctx) {
  const json& c = ctx.cfg;
  allow(c, "config", {"kind", "description", "seed", "engine", "quadrature", "mode", "p_values", "rel_tol"});
  auto ps = get<std::vector<int>>(c, "p_values", "config", {1, 2});
  double tol = get<double>(c, "rel_tol", "config", 1e-6);
  ctx.csv.header = {"p", "value", "error", "exact", "rel_err"};
  ctx.summary["rows"] = json::array();
  for (int p : ps) {
    if (p < 1 || p > 3) throw ConfigError("config.p_values: p must be 1, 2 or 3");
    auto m = model_constant(p, ctx.q);
    double rel = std::abs(m.value / m.exact - 1);
    ctx.csv.add({std::to_string(p), num(m.value), num(m.error), num(m.exact), num(rel)});
    ctx.summary["rows"].push_back({{"p", p}, {"value", m.value}, {"error", m.error}, {"exact", m.exact}, {"rel_err", rel}});
    if (rel > tol) ctx.violation("p = " + std::to_string(p) + ": relative error " + num(rel));
  }
}

void pl_identity(Context& ctx) {
  const json& c = ctx.cfg;
  allow(c, "config", {"kind", "description", "seed", "engine", "quadrature", "mode", "structure", "lambdas", "map",
                      "points", "half", "eps", "tolerance"});
  int N = get<int>(c, "points", "config", 200);
  double half = get<double>(c, "half", "config", 0.5);
  auto eps = get<std::vector<double>>(c, "eps", "config", {0.2, 0.05, 0.01});
  double tol = get<double>(c, "tolerance", "config", 1e-8);
  ctx.csv.header = {"structure", "epsilon", "point", "max_abs_diff"};
  ctx.summary["rows"] = json::array();
  auto Js = structures_swept(c, "config");
  for (std::size_t s = 0; s < Js.size(); ++s) {
    auto& J = Js[s];
    auto dm = map_of(get<json>(c, "map", "config"), J, "config.map");
    inside(J, Box::cube(2 * J.n, half), "config.half");
    std::mt19937_64 rng(ctx.seed + s);
    std::uniform_real_distribution<double> U(-half, half);
    std::vector<std::vector<double>> pts(N, std::vector<double>(2 * J.n));
    for (auto& x : pts)
      for (auto& v : x) v = U(rng);
    for (double e : eps) {
      double worst = 0;
      for (int i = 0; i < N; ++i) {
        auto [w1, w2] = w1_w2(dm, e, pts[i].data(), ctx.engine);
        double d = max_abs((w1 - w2) - ma_log_direct(dm, e, pts[i].data(), ctx.engine));
        worst = std::max(worst, d);
        ctx.csv.add({structure_label(J), num(e), std::to_string(i), num(d)});
      }
      ctx.summary["rows"].push_back({{"structure", structure_label(J)}, {"epsilon", e}, {"max_abs_diff", worst}});
      if (worst > tol) ctx.violation(structure_label(J) + ", eps " + num(e) + ": identity residual " + num(worst));
    }
  }
}

// least-squares slope of log y against log x
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double n = (double)x.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double a = std::log(x[i]), b = std::log(y[i]);
    sx += a, sy += b, sxx += a * a, sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void pl_limit_mode(Context& ctx) {
  const json& c = ctx.cfg;
  allow(c, "config", {"kind", "description", "seed", "engine", "quadrature", "mode", "structure", "lambdas", "map",
                      "test_forms", "eps_grid", "strict", "check"});
  auto grid = get<std::vector<double>>(c, "eps_grid", "config", default_eps_grid());
  bool strict = get<bool>(c, "strict", "config", true);
  json check = get<json>(c, "check", "config", json::object());
  allow(check, "config.check", {"remainder_max", "slope_min"});
  auto Js = structures_swept(c, "config");
  ctx.csv.header = {"structure", "form",  "epsilon",         "raw_pairing_re", "raw_pairing_im",  "quad_error",
                    "normalized", "normalized_im", "limit", "limit_im", "limit_error", "Z_pairing",
                    "remainder_re", "remainder_im", "remainder_error", "stable"};
  ctx.summary["rows"] = json::array();
  // |remainder| per form across the sweep
  std::map<std::string, std::vector<std::pair<double, double>>> sweep;
  for (auto& J : Js) {
    auto dm = map_of(get<json>(c, "map", "config"), J, "config.map");
    auto forms = test_form_list(get<json>(c, "test_forms", "config"), J, "config.test_forms");
    for (auto& psi : forms) {
      if (psi.degree() != 2 * (J.n - dm.p)) throw ConfigError("config.test_forms: " + psi.name + " has the wrong degree");
      const std::string sl = structure_label(J);
      try {
        auto r = pl_limit(dm, psi, grid, ctx.q, strict, ctx.engine);
        for (std::size_t k = 0; k < r.eps.size(); ++k)
          ctx.csv.add({sl, psi.name, num(r.eps[k]), num(r.raw[k].value.real()), num(r.raw[k].value.imag()),
                       num(r.raw[k].error), num(r.normalized[k].real()), num(r.normalized[k].imag()),
                       num(r.limit.real()), num(r.limit.imag()), num(r.limit_error), num(r.z_pairing.value.real()),
                       num(r.remainder.real()), num(r.remainder.imag()), num(r.remainder_error),
                       r.stable ? "1" : "0"});
        double scale = std::max(std::abs(r.z_pairing.value), 1.0);
        ctx.summary["rows"].push_back({{"structure", sl},
                                       {"lambda", J.lambda},
                                       {"form", psi.name},
                                       {"limit", {r.limit.real(), r.limit.imag()}},
                                       {"limit_error", r.limit_error},
                                       {"Z_pairing", {r.z_pairing.value.real(), r.z_pairing.value.imag()}},
                                       {"remainder", {r.remainder.real(), r.remainder.imag()}},
                                       {"remainder_error", r.remainder_error},
                                       {"stable", r.stable}});
        if (check.contains("remainder_max") && std::abs(r.remainder) > check["remainder_max"].get<double>() * scale)
          ctx.violation(sl + ", " + psi.name + ": remainder " + num(std::abs(r.remainder)));
        if (!r.stable) ctx.violation(sl + ", " + psi.name + ": extrapolation not stable");
        // only remainders resolved above their error bar enter the slope fit
        if (std::abs(r.remainder) > 3 * r.remainder_error + 1e-14)
          sweep[psi.name].push_back({J.lambda, std::abs(r.remainder)});
      } catch (const Error& e) {
        if (!is_numerical(e)) throw;
        // partial rows: each eps on its own, failures marked
        for (double eps : grid) {
          std::vector<std::string> row = {sl, psi.name, num(eps)};
          try {
            auto v = ma_log_pairing(dm, eps, psi, ctx.q, ctx.engine);
            cplx nv = v.value / pl_kappa(dm.p);
            for (auto s : {num(v.value.real()), num(v.value.imag()), num(v.error), num(nv.real()), num(nv.imag())})
              row.push_back(s);
          } catch (const Error& inner) {
            if (!is_numerical(inner)) throw;
            for (int i = 0; i < 5; ++i) row.push_back(kFail);
          }
          for (int i = 0; i < 8; ++i) row.push_back(kFail);
          ctx.csv.add(row);
        }
        ctx.summary["rows"].push_back({{"structure", sl}, {"form", psi.name}, {"error", e.what()}});
        ctx.exit_code = std::max(ctx.exit_code, 2);
      }
    }
  }
  if (Js.size() > 1) {
    json slopes = json::object();
    for (auto& [form, pts] : sweep) {
      std::vector<double> x, y;
      for (auto [l, v] : pts)
        if (l > 0 && v > 0) x.push_back(l), y.push_back(v);
      if (x.size() < 2) continue;
      double s = loglog_slope(x, y);
      slopes[form] = s;
      if (check.contains("slope_min") && s < check["slope_min"].get<double>())
        ctx.violation(form + ": remainder slope " + num(s));
    }
    ctx.summary["remainder_slopes"] = slopes;
    if (check.contains("slope_min") && slopes.empty()) ctx.violation("no remainder resolved for a slope fit");
  }
}

void run_pl(Context& ctx) {
  auto mode = get<std::string>(ctx.cfg, "mode", "config", "limit");
  if (mode == "model-constant") return pl_model_constant(ctx);
  if (mode == "identity") return pl_identity(ctx);
  if (mode == "limit") return pl_limit_mode(ctx);
  throw ConfigError("config.mode must be limit, identity or model-constant");
}

void run_lelong(Context& ctx) {
  const json& c = ctx.cfg;
  allow(c, "config", {"kind", "description", "seed", "engine", "quadrature", "structure", "radii", "c_max",
                      "ddbar_abs_tol", "cases"});
  auto J = structure_of(get<json>(c, "structure", "config"), "config.structure");
  auto R = radii_of(c);
  LelongOptions base;
  base.c_max = get<double>(c, "c_max", "config", base.c_max);
  base.ddbar_abs_tol = get<double>(c, "ddbar_abs_tol", "config", base.ddbar_abs_tol);
  const auto& cases = get<json>(c, "cases", "config");
  if (!cases.is_array() || cases.empty()) throw ConfigError("config.cases: expected a nonempty list");
  ctx.csv.header = {"case", "r", "sigma", "sigma_err", "nu", "nu_err", "nu_bar", "nu_bar_err", "g", "g_err", "corrected"};
  ctx.summary["cases"] = json::array();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    std::string w = "config.cases[" + std::to_string(i) + "]";
    const json& cs = cases[i];
    allow(cs, w, {"name", "current", "chart", "psh", "expect_nu0", "tolerance"});
    auto name = get<std::string>(cs, "name", w, "case" + std::to_string(i));
    auto cur = current_of(get<json>(cs, "current", w), J, ctx, w + ".current");
    auto chart = chart_of(get<json>(cs, "chart", w, json()), J, w + ".chart");
    inside(J, Box::cube(2 * J.n, R[0] * 1.01, std::vector<double>(chart.center.data(), chart.center.data() + 2 * J.n)),
           w + ".chart");
    LelongOptions o = base;
    bool psh = get<bool>(cs, "psh", w, false);
    if (psh) o.ddbarT = cur.ddbarT;
    json row = {{"name", name}, {"current", cur.label}, {"chart", chart.name}};
    try {
      auto res = lelong_number(*cur.T, chart, R, J, ctx.q, o);
      auto& P = res.profile;
      auto& C = res.correction;
      for (std::size_t k = 0; k < R.size(); ++k) {
        std::string nb = "", nbe = "", g = "", ge = "", cq = "";
        if (psh) {
          nb = num(C.nu_bar[k]), nbe = num(C.nu_bar_err[k]);
          g = num(C.g[k]), ge = num(C.g_err[k]);
          if (C.has_delta) cq = num(C.corrected[k]);
        } else if (cur.T->bidim() == 1) {
          auto m = nu_bar(*cur.T, chart, R[k], J, ctx.q);
          nb = num(m.value), nbe = num(m.error);
        }
        ctx.csv.add({name, num(R[k]), num(P.sigma[k]), num(P.sigma_err[k]), num(P.nu[k]), num(P.nu_err[k]), nb, nbe,
                     g, ge, cq});
      }
      row["nu0"] = P.nu0;
      row["nu0_width"] = P.nu0_width;
      row["flipped"] = P.flipped;
      row["c"] = C.c;
      if (psh) {
        row["delta"] = C.delta;
        row["has_delta"] = C.has_delta;
        row["g_sign"] = C.g_sign;
        if (!C.has_delta) ctx.violation(name + ": no delta makes the corrected quantity nondecreasing");
      }
      if (cs.contains("expect_nu0")) {
        double e = get<double>(cs, "expect_nu0", w), tol = get<double>(cs, "tolerance", w, 1e-2);
        row["expect_nu0"] = e;
        row["pass"] = std::abs(P.nu0 - e) <= tol;
        if (!row["pass"].get<bool>()) ctx.violation(name + ": nu0 = " + num(P.nu0) + ", expected " + num(e));
      }
    } catch (const Error& e) {
      if (!is_numerical(e)) throw;
      for (double r : R) ctx.csv.add({name, num(r), kFail, kFail, kFail, kFail, kFail, kFail, kFail, kFail, kFail});
      row["error"] = e.what();
      ctx.exit_code = std::max(ctx.exit_code, 2);
    }
    ctx.summary["cases"].push_back(row);
  }
}

void run_coord_invariance(Context& ctx) {
  const json& c = ctx.cfg;
  allow(c, "config", {"kind", "description", "seed", "engine", "quadrature", "structure", "radii", "current",
                      "chart_a", "chart_b", "tolerance"});
  auto J = structure_of(get<json>(c, "structure", "config"), "config.structure");
  auto R = radii_of(c);
  auto cur = current_of(get<json>(c, "current", "config"), J, ctx, "config.current");
  auto A = chart_of(get<json>(c, "chart_a", "config", json()), J, "config.chart_a");
  auto B = chart_of(get<json>(c, "chart_b", "config", json()), J, "config.chart_b");
  auto rep = coord_invariance(*cur.T, A, B, R, J, ctx.q);
  ctx.csv.header = {"r", "nu_chartA", "nu_chartB", "diff"};
  for (std::size_t k = 0; k < rep.radii.size(); ++k)
    ctx.csv.add({num(rep.radii[k]), num(rep.nu_a[k]), num(rep.nu_b[k]), num(std::abs(rep.nu_a[k] - rep.nu_b[k]))});
  ctx.summary = {{"structure", structure_label(J)}, {"current", cur.label}, {"chart_a", A.name}, {"chart_b", B.name},
                 {"nu0_chartA", rep.nu0_a}, {"nu0_chartB", rep.nu0_b}, {"diff", rep.diff}, {"width", rep.width}};
  if (c.contains("tolerance")) {
    double tol = get<double>(c, "tolerance", "config");
    ctx.summary["pass"] = rep.diff <= tol;
    if (rep.diff > tol) ctx.violation("chart dependence " + num(rep.diff));
  }
}

void run_restriction(Context& ctx) {
  const json& c = ctx.cfg;
  allow(c, "config", {"kind", "description", "seed", "engine", "quadrature", "structure", "stratification", "current",
                      "probes", "m_A", "generic_points", "radii", "delta0", "levels", "tolerance"});
  auto J = structure_of(get<json>(c, "structure", "config"), "config.structure");
  auto A = validated(get<json>(c, "stratification", "config"), J, ctx, "config.stratification");
  auto cur = current_of(get<json>(c, "current", "config"), J, ctx, "config.current", &A);
  auto probes = test_form_list(get<json>(c, "probes", "config"), J, "config.probes");
  double mA;
  json gen;
  if (c.contains("m_A")) {
    mA = get<double>(c, "m_A", "config");
  } else {
    int count = get<int>(c, "generic_points", "config", 3);
    auto pts = sample_top(A, count, ctx.seed);
    auto g = generic_lelong(*cur.T, pts, J, radii_of(c), ctx.q);
    mA = g.m;
    gen = {{"values", g.values}, {"widths", g.widths}, {"argmin", g.argmin}};
  }
  auto rep = restriction_check(*cur.T, A, probes, mA, get<double>(c, "delta0", "config", 0.2),
                               get<int>(c, "levels", "config", 6), ctx.q);
  ctx.csv.header = {"probe_id", "lhs", "lhs_im", "lhs_error", "rhs", "rhs_im", "rel_dev"};
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    auto& r = rep.rows[k];
    ctx.csv.add({r.probe, num(r.lhs.real()), num(r.lhs.imag()), num(r.lhs_error), num(r.rhs.real()), num(r.rhs.imag()),
                 num(r.rel_dev)});
  }
  ctx.summary = {{"structure", structure_label(J)}, {"stratification", A.name}, {"current", cur.label},
                 {"m_A", mA}, {"max_dev", rep.max_dev}};
  if (!gen.is_null()) ctx.summary["generic_lelong"] = gen;
  if (c.contains("tolerance")) {
    double tol = get<double>(c, "tolerance", "config");
    ctx.summary["pass"] = rep.max_dev <= tol;
    if (rep.max_dev > tol) ctx.violation("restriction deviation " + num(rep.max_dev));
  }
}

void run_validate(Context& ctx) {
  const json& c = ctx.cfg;
  allow(c, "config", {"kind", "description", "seed", "engine", "quadrature", "structure", "stratification", "options",
                      "expect"});
  auto J = structure_of(get<json>(c, "structure", "config"), "config.structure");
  auto A = stratification_of(get<json>(c, "stratification", "config"), "config.stratification");
  check_stratification_domain(A, J, "config.stratification");
  auto opt = validate_options(get<json>(c, "options", "config", json()), ctx.q, ctx.seed, "config.options");
  auto rep = validate(A, J, opt);
  ctx.csv.header = {"stratum_dim", "chart", "level", "delta", "area", "growth"};
  json strata = json::array();
  for (auto& S : rep.strata) {
    json charts = json::array();
    for (auto& a : S.area) {
      for (std::size_t k = 0; k < a.area.size(); ++k)
        ctx.csv.add({std::to_string(S.dim), a.chart, std::to_string(k), k < a.deltas.size() ? num(a.deltas[k]) : "",
                     num(a.area[k]), k ? num(a.growth[k - 1]) : ""});
      charts.push_back({{"chart", a.chart}, {"diverges", a.diverges}, {"stable", a.stable}});
    }
    strata.push_back({{"dim", S.dim}, {"dims_ok", S.dims_ok}, {"max_residual", S.max_residual}, {"area", charts}});
  }
  ctx.summary = {{"structure", structure_label(J)}, {"stratification", A.name}, {"strata", strata},
                 {"monotone", rep.monotone}, {"pure_gap", rep.pure_gap}, {"pure_ok", rep.pure_ok},
                 {"pass", rep.pass}, {"failures", rep.failures}};
  auto expect = get<std::string>(c, "expect", "config", "pass");
  if (expect != "pass" && expect != "fail") throw ConfigError("config.expect must be pass or fail");
  if (rep.pass != (expect == "pass"))
    ctx.violation("validation " + std::string(rep.pass ? "passed" : "failed") + ", expected " + expect);
}

using Runner = void (*)(Context&);
const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> m = {
      {"split-check", run_split_check},   {"pl-experiment", run_pl},         {"lelong", run_lelong},
      {"coord-invariance", run_coord_invariance}, {"restriction", run_restriction}, {"validate", run_validate}};
  return m;
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k = {"split-check",      "pl-experiment", "lelong",
                                             "coord-invariance", "restriction",   "validate"};
  return k;
}

std::string git_blob_hash(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr)) throw Error("HashError", "SHA-1 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) out += hex[md[i] >> 4], out += hex[md[i] & 15];
  return out;
}

void write_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + tmp);
    f << content;
    if (!f.flush()) throw ConfigError("cannot write " + tmp);
  }
  fs::rename(tmp, path);
}

RunResult run_config_text(const std::string& text, const std::string& stem, const RunOptions& opt) {
  RunResult res;
  Context ctx;
  json prov;
  auto finish_error = [&](int code, const std::string& msg) {
    res.exit_code = code;
    res.message = msg;
    return res;
  };
  try {
    try {
      ctx.cfg = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    object_at(ctx.cfg, "config");
    ctx.kind = get<std::string>(ctx.cfg, "kind", "config");
    auto it = runners().find(ctx.kind);
    if (it == runners().end()) throw ConfigError("config.kind: unknown experiment '" + ctx.kind + "'");
    if (!opt.expected_kind.empty() && opt.expected_kind != ctx.kind)
      throw ConfigError("config is a " + ctx.kind + " experiment, not " + opt.expected_kind);
    ctx.seed = opt.seed ? *opt.seed : get<std::uint64_t>(ctx.cfg, "seed", "config", 1);
    std::string engine = opt.engine ? *opt.engine : get<std::string>(ctx.cfg, "engine", "config", "exact");
    if (engine == "fd")
      ctx.engine.mode = Engine::Central;
    else if (engine != "exact")
      throw ConfigError("engine must be exact or fd");
    if (opt.threads < 1) throw ConfigError("threads must be positive");
    ctx.q = quadrature_of(ctx.cfg.contains("quadrature") ? ctx.cfg["quadrature"] : json(), opt.threads);
    if (ctx.cfg.contains("description") && !ctx.cfg["description"].is_string())
      throw ConfigError("config.description: wrong type");
    prov = {{"tool", "acx-cli"},   {"kind", ctx.kind},     {"config", stem},
            {"config_hash", git_blob_hash(text)}, {"seed", ctx.seed}, {"engine", engine},
            {"quadrature", quadrature_json(ctx.q)}};
    it->second(ctx);
  } catch (const Error& e) {
    if (is_numerical(e)) {
      res.exit_code = 2;
    } else if (e.kind() == "ValidationRequired") {
      res.exit_code = 3;
    } else {
      return finish_error(1, e.what());
    }
    res.message = e.what();
    ctx.summary["error"] = e.what();
  } catch (const json::exception& e) {
    return finish_error(1, std::string("config: ") + e.what());
  } catch (const fs::filesystem_error& e) {
    return finish_error(1, e.what());
  }
  if (prov.is_null()) return finish_error(1, res.message);
  res.exit_code = std::max(res.exit_code, ctx.exit_code);
  if (res.message.empty() && !ctx.violations.empty()) {
    for (auto& v : ctx.violations) res.message += (res.message.empty() ? "" : "; ") + v;
  }
  if (res.message.empty() && ctx.exit_code == 2) res.message = "numerical failure; see the report";
  json report = {{"provenance", prov},
                 {"exit_code", res.exit_code},
                 {"violations", ctx.violations},
                 {"summary", ctx.summary}};
  try {
    fs::create_directories(opt.out_dir);
    std::string csv = (fs::path(opt.out_dir) / (stem + ".csv")).string();
    std::string js = (fs::path(opt.out_dir) / (stem + ".json")).string();
    if (!ctx.csv.header.empty()) {
      write_atomic(csv, ctx.csv.text(prov));
      res.files.push_back(csv);
    }
    write_atomic(js, report.dump(2) + "\n");
    res.files.push_back(js);
  } catch (const std::exception& e) {
    return finish_error(1, std::string("output: ") + e.what());
  }
  return res;
}

RunResult run_config_file(const std::string& path, const RunOptions& opt) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    RunResult r;
    r.exit_code = 1;
    r.message = "cannot read config " + path;
    return r;
  }
  std::stringstream s;
  s << f.rdbuf();
  return run_config_text(s.str(), fs::path(path).stem().string(), opt);
}

std::vector<ConfigEntry> list_configs(const std::string& dir, const std::string& kind) {
  std::vector<ConfigEntry> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    std::ifstream f(e.path());
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    ConfigEntry c{e.path().filename().string(), j.value("kind", ""), j.value("description", "")};
    if (!kind.empty() && c.kind != kind) continue;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const ConfigEntry& a, const ConfigEntry& b) { return a.file < b.file; });
  return out;
}

}  // namespace acx
