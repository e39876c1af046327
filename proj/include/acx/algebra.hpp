#pragma once

// Pointwise complex exterior algebra on R^{2n}. A value is a sparse sorted list
// of (bitmask over dx_0..dx_{2n-1}, coefficient). The coefficient type is either
// a complex number or a Jet, so the same routines serve values and derivatives.

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "acx/errors.hpp"
#include "acx/jet.hpp"

namespace acx {

inline constexpr double kPruneEps = 1e-14;

template <class C>
struct Ext {
  int n = 0;
  std::vector<std::pair<std::uint32_t, C>> terms;  // sorted by mask, unique

  Ext() = default;
  explicit Ext(int n_) : n(n_) {}

  static Ext scalar(int n, C c) {
    Ext r(n);
    r.terms.push_back({0u, c});
    return r;
  }
  static Ext basis(int n, std::uint32_t mask, C c = C(1.0)) {
    Ext r(n);
    r.terms.push_back({mask, c});
    return r;
  }
  int dim() const { return 2 * n; }
  bool empty() const { return terms.empty(); }

  // -1 for the zero value; throws MixedDegree when inhomogeneous
  int degree() const {
    int k = -1;
    for (auto& [m, c] : terms) {
      int d = std::popcount(m);
      if (k >= 0 && d != k) throw MixedDegree("exterior value has several degrees");
      k = d;
    }
    return k;
  }
  C coeff(std::uint32_t mask) const {
    for (auto& [m, c] : terms)
      if (m == mask) return c;
    return C(0.0);
  }
  C top() const { return coeff((1u << dim()) - 1u); }
};

using ExteriorValue = Ext<cplx>;

inline bool negligible(const cplx& c, double eps) { return std::abs(c) <= eps; }
inline bool negligible(const Jet& j, double eps) {
  if (std::abs(j.v) > eps) return false;
  for (int i = 0; i < j.m; ++i)
    if (std::abs(j.g[i]) > eps) return false;
  for (int k = 0; k < nh(j.m); ++k)
    if (std::abs(j.h[k]) > eps) return false;
  return true;
}

template <class C>
void prune(Ext<C>& a, double eps = kPruneEps) {
  std::erase_if(a.terms, [&](auto& t) { return negligible(t.second, eps); });
}

// Merge unsorted (mask, coeff) pairs into canonical form.
template <class C>
Ext<C> canonical(int n, std::vector<std::pair<std::uint32_t, C>> raw) {
  // sort keys rather than the (possibly large) coefficients
  std::vector<std::pair<std::uint32_t, std::uint32_t>> key(raw.size());
  for (std::uint32_t i = 0; i < raw.size(); ++i) key[i] = {raw[i].first, i};
  std::sort(key.begin(), key.end());
  Ext<C> r(n);
  r.terms.reserve(raw.size());
  for (auto& [mk, i] : key) {
    if (!r.terms.empty() && r.terms.back().first == mk)
      r.terms.back().second += raw[i].second;
    else
      r.terms.push_back(std::move(raw[i]));
  }
  prune(r);
  return r;
}

template <class C>
Ext<C> operator+(const Ext<C>& a, const Ext<C>& b) {
  if (a.empty()) return b.n ? b : Ext<C>(a.n);
  if (b.empty()) return a;
  if (a.n != b.n) throw DimensionMismatch("sum of values on different dimensions");
  Ext<C> r(a.n);
  std::size_t i = 0, j = 0;
  while (i < a.terms.size() || j < b.terms.size()) {
    if (j == b.terms.size() || (i < a.terms.size() && a.terms[i].first < b.terms[j].first))
      r.terms.push_back(a.terms[i++]);
    else if (i == a.terms.size() || b.terms[j].first < a.terms[i].first)
      r.terms.push_back(b.terms[j++]);
    else {
      r.terms.push_back({a.terms[i].first, a.terms[i].second + b.terms[j].second});
      ++i, ++j;
    }
  }
  prune(r);
  return r;
}

template <class C, class S>
Ext<C> scale(const Ext<C>& a, const S& s) {
  Ext<C> r = a;
  for (auto& t : r.terms) t.second = t.second * s;
  prune(r);
  return r;
}

template <class C>
Ext<C> operator-(const Ext<C>& a, const Ext<C>& b) { return a + scale(b, cplx(-1.0)); }

// sign of dx_A ^ dx_B relative to dx_{A|B}
inline int wedge_sign(std::uint32_t a, std::uint32_t b) {
  int swaps = 0;
  while (b) {
    int j = std::countr_zero(b);
    b &= b - 1;
    swaps += std::popcount(a >> (j + 1));
  }
  return (swaps & 1) ? -1 : 1;
}

template <class C>
Ext<C> wedge(const Ext<C>& a, const Ext<C>& b) {
  if (a.n != b.n && !a.empty() && !b.empty()) throw DimensionMismatch("wedge across dimensions");
  int n = a.n ? a.n : b.n;
  std::vector<std::pair<std::uint32_t, C>> raw;
  for (auto& [ma, ca] : a.terms)
    for (auto& [mb, cb] : b.terms) {
      if (ma & mb) continue;
      C c = ca * cb;
      raw.push_back({ma | mb, wedge_sign(ma, mb) < 0 ? c * cplx(-1.0) : c});
    }
  return canonical(n, std::move(raw));
}

template <class C>
Ext<C> conj(const Ext<C>& a) {
  Ext<C> r = a;
  for (auto& t : r.terms) t.second = conj(t.second);
  return r;
}

inline ExteriorValue values(const Ext<Jet>& a) {
  ExteriorValue r(a.n);
  for (auto& [m, c] : a.terms) r.terms.push_back({m, c.v});
  prune(r);
  return r;
}
inline ExteriorValue values(const ExteriorValue& a) { return a; }

// Exterior derivative at the jet's base point: sum_a dx_a ^ d_a(coeff).
inline Ext<Jet> ext_d(const Ext<Jet>& a) {
  std::vector<std::pair<std::uint32_t, Jet>> raw;
  for (auto& [m, c] : a.terms)
    for (int k = 0; k < c.m; ++k) {
      std::uint32_t bit = 1u << k;
      if (m & bit) continue;
      Jet dk = partial(c, k);
      int below = std::popcount(m & (bit - 1));
      raw.push_back({m | bit, (below & 1) ? -dk : dk});
    }
  return canonical(a.n, std::move(raw));
}

// Evaluate a k-form on k vectors (columns of U, size 2n x k).
cplx evaluate(const ExteriorValue& v, const Eigen::MatrixXd& U);

// ---------------------------------------------------------------- bidegree

struct BidegreeProjector {
  int n = 0;
  Eigen::MatrixXcd P10;  // acts on covector coefficient vectors
  Eigen::MatrixXcd P01() const { return P10.conjugate(); }
};

BidegreeProjector projector_10(const Eigen::MatrixXd& J);

// Row-major 2n x 2n arrays of P10/P01 in coefficient type C.
template <class C>
struct ProjectorData {
  int n = 0;
  std::vector<C> p10, p01;
};

inline ProjectorData<cplx> projector_data(const BidegreeProjector& P) {
  ProjectorData<cplx> d;
  d.n = P.n;
  int m = 2 * P.n;
  d.p10.resize(m * m);
  d.p01.resize(m * m);
  Eigen::MatrixXcd P01 = P.P01();
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) {
      d.p10[r * m + c] = P.P10(r, c);
      d.p01[r * m + c] = P01(r, c);
    }
  return d;
}

// P10 = (I - i J^T)/2 built from jet-valued J entries (row-major).
inline ProjectorData<Jet> projector_data(int n, const std::vector<Jet>& J) {
  int m = 2 * n;
  ProjectorData<Jet> d;
  d.n = n;
  d.p10.resize(m * m);
  d.p01.resize(m * m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) {
      Jet jt = J[c * m + r];
      Jet id(r == c ? 0.5 : 0.0);
      d.p10[r * m + c] = id + jt * cplx(0, -0.5);
      d.p01[r * m + c] = id + jt * cplx(0, 0.5);
    }
  return d;
}

template <class C>
Ext<C> image_of_dx(const std::vector<C>& P, int n, int a) {
  int m = 2 * n;
  Ext<C> r(n);
  for (int b = 0; b < m; ++b) r.terms.push_back({1u << b, P[b * m + a]});
  prune(r);
  return r;
}

// parts[p] is the (p, k-p) component.
template <class C>
struct Split {
  int k = 0;
  std::vector<Ext<C>> parts;
  const Ext<C>& at(int p, int q) const {
    if (p < 0 || q < 0 || p + q != k || p >= (int)parts.size())
      throw WrongBidegree("no such component");
    return parts[p];
  }
};

namespace detail {

// (mask, coeff) accumulator indexed through a table over all masks
template <class C>
struct MaskAccum {
  std::vector<int>* slot;
  std::vector<std::pair<std::uint32_t, C>> items;
  void add(std::uint32_t mask, const C& c) {
    int& s = (*slot)[mask];
    if (s < 0) {
      s = (int)items.size();
      items.push_back({mask, c});
    } else {
      items[s].second += c;
    }
  }
  void release() {
    for (auto& it : items) (*slot)[it.first] = -1;
  }
};

}  // namespace detail

template <class C>
Split<C> bidegree_split(const Ext<C>& v, const ProjectorData<C>& P, int k_hint = -1) {
  const int n = P.n, m = 2 * n;
  Split<C> s;
  int k = v.degree();
  s.k = k >= 0 ? k : std::max(k_hint, 0);
  s.parts.assign(s.k + 1, Ext<C>(n));
  if (k < 0) return s;
  // sparse columns of P10 and P01
  std::uint32_t used = 0;
  for (auto& t : v.terms) used |= t.first;
  std::vector<std::vector<std::pair<int, C>>> c10(m), c01(m);
  for (int a = 0; a < m; ++a) {
    if (!(used >> a & 1u)) continue;
    for (int b = 0; b < m; ++b) {
      const C& x = P.p10[b * m + a];
      const C& y = P.p01[b * m + a];
      if (!negligible(x, 0.0)) c10[a].push_back({b, x});
      if (!negligible(y, 0.0)) c01[a].push_back({b, y});
    }
  }
  std::vector<std::vector<int>> tables(2 * (std::size_t)(k + 1), std::vector<int>(1u << m, -1));
  std::vector<detail::MaskAccum<C>> out(k + 1);
  std::vector<std::vector<int>> out_tabs(k + 1, std::vector<int>(1u << m, -1));
  for (int p = 0; p <= k; ++p) out[p].slot = &out_tabs[p];
  for (auto& [mask, c] : v.terms) {
    std::vector<detail::MaskAccum<C>> acc(1);
    acc[0].slot = &tables[0];
    acc[0].add(0u, c);
    std::uint32_t mm = mask;
    int step = 0;
    while (mm) {
      int a = std::countr_zero(mm);
      mm &= mm - 1;
      ++step;
      std::vector<detail::MaskAccum<C>> next(acc.size() + 1);
      for (std::size_t p = 0; p < next.size(); ++p) next[p].slot = &tables[(step % 2) * (k + 1) + p];
      for (std::size_t p = 0; p < acc.size(); ++p) {
        for (auto& [mk, cv] : acc[p].items) {
          for (auto& [b, x] : c01[a]) {
            if (mk >> b & 1u) continue;
            C t = cv * x;
            next[p].add(mk | (1u << b), (std::popcount(mk >> (b + 1)) & 1) ? t * cplx(-1.0) : t);
          }
          for (auto& [b, x] : c10[a]) {
            if (mk >> b & 1u) continue;
            C t = cv * x;
            next[p + 1].add(mk | (1u << b), (std::popcount(mk >> (b + 1)) & 1) ? t * cplx(-1.0) : t);
          }
        }
        acc[p].release();
      }
      acc.swap(next);
    }
    for (std::size_t p = 0; p < acc.size(); ++p) {
      for (auto& [mk, cv] : acc[p].items) out[p].add(mk, cv);
      acc[p].release();
    }
  }
  for (int p = 0; p <= k; ++p) {
    out[p].release();
    Ext<C> e(n);
    e.terms = std::move(out[p].items);
    std::sort(e.terms.begin(), e.terms.end(), [](auto& x, auto& y) { return x.first < y.first; });
    prune(e);
    s.parts[p] = std::move(e);
  }
  return s;
}

inline Split<cplx> bidegree_split(const ExteriorValue& v, const BidegreeProjector& P, int k_hint = -1) {
  return bidegree_split(v, projector_data(P), k_hint);
}

// (p,q) of a pure value, or throws MixedBidegree. Zero values report (-1,-1).
std::pair<int, int> bidegree_of(const ExteriorValue& v, const BidegreeProjector& P, double tol = 1e-10);

// ---------------------------------------------------------------- positivity

struct StronglyPositiveDecomposition {
  int n = 0;
  std::vector<double> lambda;
  std::vector<std::vector<Eigen::VectorXcd>> alpha;  // alpha[j][k]: covector coefficients
  std::optional<Eigen::MatrixXd> anchor_J;
};

ExteriorValue covector(const Eigen::VectorXcd& a);
ExteriorValue strongly_positive_form(const StronglyPositiveDecomposition& dec);

struct PositivityResult {
  bool positive = true;
  double min_value = 0.0;
  std::vector<Eigen::VectorXd> witness;  // xi_1..xi_p on failure
};

PositivityResult is_positive_sample(const ExteriorValue& v, const Eigen::MatrixXd& J, std::uint64_t seed,
                                    int m, double tol);

// dz_j, dzbar_j for the standard coordinates z_j = x_{2j} + i x_{2j+1}
ExteriorValue dz(int n, int j);
ExteriorValue dzbar(int n, int j);
ExteriorValue dx(int n, int a);

double max_abs(const ExteriorValue& v);

}  // namespace acx
