#include "acx/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

namespace acx {

void QuadratureConfig::validate() const {
  if (order < 3 || order > 32) throw ConfigError("quadrature order must be in [3, 32]");
  if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
  if (!(abs_tol > 0) || !(rel_tol > 0)) throw ConfigError("tolerances must be positive");
  if (threads < 1) throw ConfigError("threads must be positive");
}

static void neumaier(double& s, double& c, double v) {
  double t = s + v;
  if (std::abs(s) >= std::abs(v))
    c += (s - t) + v;
  else
    c += (v - t) + s;
  s = t;
}

void CompensatedSum::add(cplx v) {
  neumaier(re, cre, v.real());
  neumaier(im, cim, v.imag());
}

const GaussRule& gauss_rule(int order) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[order];
  if (!slot) {
    auto r = std::make_unique<GaussRule>();
    r->x.resize(order);
    r->w.resize(order);
    for (int i = 0; i < order; ++i) {
      double z = std::cos(M_PI * (i + 0.75) / (order + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1, p1 = 0;
        for (int k = 1; k <= order; ++k) {
          double p2 = p1;
          p1 = p0;
          p0 = ((2 * k - 1) * z * p1 - (k - 1) * p2) / k;
        }
        double dp = order * (z * p0 - p1) / (z * z - 1);
        double dz = p0 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) {
          r->w[i] = 2 / ((1 - z * z) * dp * dp);
          break;
        }
        r->w[i] = 2 / ((1 - z * z) * dp * dp);
      }
      r->x[i] = -z;
    }
    slot = std::move(r);
  }
  return *slot;
}

namespace {

struct Cell {
  Box box;
  std::array<int, kMaxDim> depth{};
  cplx Q{};
  int axis = 0;
  bool splittable = true;
};

struct Node {
  Cell cell;
  Cell kids[2];
  double err = 0;
  cplx refined() const { return kids[0].Q + kids[1].Q; }
};

struct Evaluator {
  const Integrand& f;
  const QuadratureConfig& cfg;
  const GaussRule& rule;
  std::vector<std::vector<double>> legendre;  // P_k(x_i) for k = g-1, g-2

  Evaluator(const Integrand& f_, const QuadratureConfig& c) : f(f_), cfg(c), rule(gauss_rule(c.order)) {
    int g = c.order;
    legendre.assign(2, std::vector<double>(g));
    for (int i = 0; i < g; ++i) {
      double z = rule.x[i], p0 = 1, p1 = 0;
      std::vector<double> P(g);
      for (int k = 0; k < g; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = k == 0 ? 1.0 : ((2 * k - 1) * z * p1 - (k - 1) * p2) / k;
        P[k] = p0;
      }
      legendre[0][i] = P[g - 1];
      legendre[1][i] = P[g - 2];
    }
  }

  void eval(Cell& c) const {
    const int dim = c.box.dim();
    const int g = cfg.order;
    long npts = 1;
    for (int a = 0; a < dim; ++a) npts *= g;
    std::vector<double> mid(dim), half(dim), x(dim);
    double jac = 1;
    for (int a = 0; a < dim; ++a) {
      mid[a] = 0.5 * (c.box.lo[a] + c.box.hi[a]);
      half[a] = 0.5 * (c.box.hi[a] - c.box.lo[a]);
      jac *= half[a];
    }
    // marginals[a][i]: weighted sum over all other axes with index i on axis a
    std::vector<std::vector<cplx>> marg(dim, std::vector<cplx>(g, 0.0));
    std::vector<int> idx(dim, 0);
    CompensatedSum total;
    for (long p = 0; p < npts; ++p) {
      double w = 1;
      for (int a = 0; a < dim; ++a) {
        x[a] = mid[a] + half[a] * rule.x[idx[a]];
        w *= rule.w[idx[a]];
      }
      cplx v = f(x.data());
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw NonConvergence("integrand is not finite at a quadrature node");
      total.add(w * v);
      for (int a = 0; a < dim; ++a) marg[a][idx[a]] += (w / rule.w[idx[a]]) * v;
      for (int a = 0; a < dim; ++a) {
        if (++idx[a] < g) break;
        idx[a] = 0;
      }
    }
    c.Q = total.value() * jac;
    // choose the axis whose marginal has the largest Legendre tail
    double best = -1;
    int best_axis = -1;
    double widest = -1;
    int widest_axis = -1;
    for (int a = 0; a < dim; ++a) {
      if (c.depth[a] >= cfg.max_depth) continue;
      double tail = 0;
      for (int t = 0; t < 2; ++t) {
        int k = g - 1 - t;
        cplx ck = 0;
        for (int i = 0; i < g; ++i) ck += rule.w[i] * marg[a][i] * legendre[t][i];
        tail += std::abs(ck) * (2 * k + 1) / 2.0;
      }
      tail *= jac;
      if (tail > best) {
        best = tail;
        best_axis = a;
      }
      if (half[a] > widest) {
        widest = half[a];
        widest_axis = a;
      }
    }
    c.splittable = best_axis >= 0;
    if (!c.splittable) return;
    c.axis = (best <= 1e-14 * std::abs(c.Q)) ? widest_axis : best_axis;
  }
};

std::pair<Cell, Cell> halves(const Cell& c, int axis) {
  Cell l = c, r = c;
  double m = 0.5 * (c.box.lo[axis] + c.box.hi[axis]);
  l.box.hi[axis] = m;
  r.box.lo[axis] = m;
  l.depth[axis] += 1;
  r.depth[axis] += 1;
  return {l, r};
}

// axis across which a hint forces a split, or -1
int forced_axis(const Cell& c, const QuadratureConfig& cfg) {
  const int dim = c.box.dim();
  std::vector<double> mid(dim);
  for (int a = 0; a < dim; ++a) mid[a] = 0.5 * (c.box.lo[a] + c.box.hi[a]);
  std::vector<double> var(dim);
  for (auto& h : cfg.hints) {
    double fm = h.fn(mid.data());
    // first-order reach of the hint over the cell, slightly inflated
    double reach = 0;
    for (int a = 0; a < dim; ++a) {
      std::vector<double> p = mid, q = mid;
      p[a] = c.box.hi[a];
      q[a] = c.box.lo[a];
      var[a] = std::max(std::abs(h.fn(p.data()) - fm), std::abs(h.fn(q.data()) - fm));
      reach += var[a];
    }
    if (std::abs(fm) > 1.5 * reach) continue;
    int best = -1;
    double bestv = 0;
    for (int a = 0; a < dim; ++a) {
      double width = c.box.hi[a] - c.box.lo[a];
      if (width <= h.scale || c.depth[a] >= cfg.max_depth) continue;
      // axes along which the hint does not vary are left alone
      if (var[a] <= 1e-3 * width) continue;
      if (var[a] > bestv) {
        bestv = var[a];
        best = a;
      }
    }
    if (best >= 0) return best;
  }
  return -1;
}

void parallel_for(long n, int threads, const std::function<void(long)>& body) {
  if (threads <= 1 || n < 2) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  int T = (int)std::min<long>(threads, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(T);
  for (int t = 0; t < T; ++t)
    pool.emplace_back([&, t] {
      try {
        for (long i = t; i < n; i += T) body(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace

cplx gauss_cell(const Box& box, const Integrand& f, int order) {
  QuadratureConfig cfg;
  cfg.order = order;
  Evaluator ev(f, cfg);
  Cell c;
  c.box = box;
  ev.eval(c);
  return c.Q;
}

QuadResult integrate(const Box& box, const Integrand& f, const QuadratureConfig& cfg) {
  cfg.validate();
  if (box.dim() > kMaxDim) throw DimensionMismatch("cubature dimension too large");
  QuadResult res;
  if (box.volume() == 0) return res;
  Evaluator ev(f, cfg);
  long pts_per_cell = 1;
  for (int a = 0; a < box.dim(); ++a) pts_per_cell *= cfg.order;

  std::vector<Node> nodes;
  // expand cells into nodes: evaluate both halves of each cell along its axis
  auto make_nodes = [&](std::vector<Cell>& cells, std::vector<int> axes, std::vector<double> inherited) {
    std::vector<Node> out(cells.size());
    std::vector<Cell*> todo;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out[i].cell = cells[i];
      int ax = axes[i] >= 0 ? axes[i] : cells[i].axis;
      if (!cells[i].splittable && axes[i] < 0) {
        out[i].kids[0] = cells[i];
        out[i].kids[1] = cells[i];
        out[i].kids[1].Q = 0;
        out[i].kids[0].splittable = out[i].kids[1].splittable = false;
        out[i].err = inherited[i];
        out[i].cell.splittable = false;
        continue;
      }
      out[i].cell.axis = ax;
      auto [l, r] = halves(cells[i], ax);
      out[i].kids[0] = l;
      out[i].kids[1] = r;
      todo.push_back(&out[i].kids[0]);
      todo.push_back(&out[i].kids[1]);
    }
    parallel_for((long)todo.size(), cfg.threads, [&](long i) { ev.eval(*todo[i]); });
    res.evals += (long)todo.size() * pts_per_cell;
    res.cells += (long)todo.size();
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out[i].cell.splittable || axes[i] >= 0) out[i].err = std::abs(out[i].cell.Q - out[i].refined());
    return out;
  };

  Cell root;
  root.box = box;
  ev.eval(root);
  res.evals += pts_per_cell;
  res.cells += 1;
  {
    std::vector<Cell> cs{root};
    nodes = make_nodes(cs, {forced_axis(root, cfg)}, {0.0});
  }

  auto refine = [&](const std::vector<std::size_t>& which, bool forced) {
    std::vector<Cell> cells;
    std::vector<int> axes;
    std::vector<double> inherited;
    std::vector<char> drop(nodes.size(), 0);
    for (auto i : which) {
      drop[i] = 1;
      for (auto& k : nodes[i].kids) {
        cells.push_back(k);
        axes.push_back(forced ? forced_axis(k, cfg) : -1);
        inherited.push_back(0.5 * nodes[i].err);
      }
    }
    auto fresh = make_nodes(cells, axes, inherited);
    std::vector<Node> kept;
    kept.reserve(nodes.size() + fresh.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (!drop[i]) kept.push_back(std::move(nodes[i]));
    for (auto& nd : fresh) kept.push_back(std::move(nd));
    nodes.swap(kept);
    if ((long)nodes.size() > cfg.max_nodes) throw NonConvergence("cell budget exhausted");
  };

  // hint-driven refinement: a node is refined while one of its halves straddles a hint
  if (!cfg.hints.empty()) {
    for (int round = 0; round < 64 * kMaxDim; ++round) {
      std::vector<std::size_t> which;
      for (std::size_t i = 0; i < nodes.size(); ++i)
        if (forced_axis(nodes[i].kids[0], cfg) >= 0 || forced_axis(nodes[i].kids[1], cfg) >= 0)
          which.push_back(i);
      // forced splitting may use at most half of the cell budget
      if (which.empty() || (long)(nodes.size() + which.size()) > cfg.max_nodes / 2) break;
      refine(which, true);
    }
  }

  for (;;) {
    CompensatedSum tot, err;
    for (auto& nd : nodes) {
      tot.add(nd.refined());
      err.add(nd.err);
    }
    res.value = tot.value();
    res.error = err.value().real();
    double target = std::max(cfg.abs_tol, cfg.rel_tol * std::abs(res.value));
    if (res.error <= target) break;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].kids[0].splittable || nodes[i].kids[1].splittable) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return nodes[a].err > nodes[b].err; });
    double refinable = 0;
    for (auto i : order) refinable += nodes[i].err;
    if (order.empty() || res.error - refinable > target) {
      res.converged = false;
      if (cfg.strict)
        throw NonConvergence("depth exhausted: estimate " + std::to_string(res.value.real()) + " error " +
                             std::to_string(res.error));
      break;
    }
    std::vector<std::size_t> which;
    double acc = 0;
    for (auto i : order) {
      if (acc >= 0.5 * res.error - 1e-300 && !which.empty()) break;
      which.push_back(i);
      acc += nodes[i].err;
    }
    try {
      refine(which, false);
    } catch (const NonConvergence&) {
      res.converged = false;
      if (cfg.strict) throw;
      break;
    }
  }
  return res;
}

}  // namespace acx
