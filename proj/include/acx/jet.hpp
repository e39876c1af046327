#pragma once

// Second-order truncated Taylor jets in up to kMaxDim real variables with
// complex values. The Hessian is stored packed (i <= j).

#include <array>
#include <cmath>
#include <complex>
#include <type_traits>

namespace acx {

using cplx = std::complex<double>;
inline constexpr int kMaxDim = 6;
inline constexpr int kHess = kMaxDim * (kMaxDim + 1) / 2;

constexpr int hidx(int i, int j) { return i <= j ? j * (j + 1) / 2 + i : i * (i + 1) / 2 + j; }

struct Jet {
  cplx v{};
  std::array<cplx, kMaxDim> g{};
  std::array<cplx, kHess> h{};
  int m = 0;  // number of live variables

  Jet() = default;
  Jet(double c) : v(c) {}
  Jet(cplx c) : v(c) {}

  static Jet variable(double value, int i, int m) {
    Jet r(value);
    r.m = m;
    r.g[i] = 1.0;
    return r;
  }
  cplx hess(int i, int j) const { return h[hidx(i, j)]; }
};

inline int nh(int m) { return m * (m + 1) / 2; }

inline Jet operator+(const Jet& a, const Jet& b) {
  Jet r;
  r.m = std::max(a.m, b.m);
  r.v = a.v + b.v;
  for (int i = 0; i < r.m; ++i) r.g[i] = a.g[i] + b.g[i];
  for (int k = 0; k < nh(r.m); ++k) r.h[k] = a.h[k] + b.h[k];
  return r;
}
inline Jet operator-(const Jet& a) {
  Jet r = a;
  r.v = -r.v;
  for (int i = 0; i < r.m; ++i) r.g[i] = -r.g[i];
  for (int k = 0; k < nh(r.m); ++k) r.h[k] = -r.h[k];
  return r;
}
inline Jet operator-(const Jet& a, const Jet& b) { return a + (-b); }

inline Jet operator*(const Jet& a, cplx s) {
  Jet r = a;
  r.v *= s;
  for (int i = 0; i < r.m; ++i) r.g[i] *= s;
  for (int k = 0; k < nh(r.m); ++k) r.h[k] *= s;
  return r;
}
inline Jet operator*(cplx s, const Jet& a) { return a * s; }
inline Jet operator*(const Jet& a, double s) { return a * cplx(s); }
inline Jet operator*(double s, const Jet& a) { return a * cplx(s); }
inline Jet operator/(const Jet& a, cplx s) { return a * (1.0 / s); }
inline Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }
inline Jet operator+(const Jet& a, cplx s) { Jet r = a; r.v += s; return r; }
inline Jet operator+(cplx s, const Jet& a) { return a + s; }
inline Jet operator-(const Jet& a, cplx s) { Jet r = a; r.v -= s; return r; }
inline Jet operator-(cplx s, const Jet& a) { return (-a) + s; }
inline Jet operator+(const Jet& a, double s) { return a + cplx(s); }
inline Jet operator+(double s, const Jet& a) { return a + cplx(s); }
inline Jet operator-(const Jet& a, double s) { return a - cplx(s); }
inline Jet operator-(double s, const Jet& a) { return cplx(s) - a; }

inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r;
  r.m = std::max(a.m, b.m);
  r.v = a.v * b.v;
  for (int i = 0; i < r.m; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  for (int j = 0; j < r.m; ++j)
    for (int i = 0; i <= j; ++i) {
      int k = hidx(i, j);
      r.h[k] = a.h[k] * b.v + a.v * b.h[k] + a.g[i] * b.g[j] + a.g[j] * b.g[i];
    }
  return r;
}

// f(a) given f, f', f'' at a.v
inline Jet chain(const Jet& a, cplx f0, cplx f1, cplx f2) {
  Jet r;
  r.m = a.m;
  r.v = f0;
  for (int i = 0; i < r.m; ++i) r.g[i] = f1 * a.g[i];
  for (int j = 0; j < r.m; ++j)
    for (int i = 0; i <= j; ++i) {
      int k = hidx(i, j);
      r.h[k] = f1 * a.h[k] + f2 * a.g[i] * a.g[j];
    }
  return r;
}

inline Jet inv(const Jet& a) {
  cplx i0 = 1.0 / a.v;
  return chain(a, i0, -i0 * i0, 2.0 * i0 * i0 * i0);
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * inv(b); }
inline Jet operator/(cplx s, const Jet& b) { return inv(b) * s; }
inline Jet operator/(double s, const Jet& b) { return inv(b) * s; }

inline Jet& operator+=(Jet& a, const Jet& b) { return a = a + b; }
inline Jet& operator-=(Jet& a, const Jet& b) { return a = a - b; }
inline Jet& operator*=(Jet& a, const Jet& b) { return a = a * b; }
inline Jet& operator*=(Jet& a, cplx s) { return a = a * s; }

inline Jet exp(const Jet& a) {
  cplx e = std::exp(a.v);
  return chain(a, e, e, e);
}
inline Jet log(const Jet& a) { return chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Jet sqrt(const Jet& a) {
  cplx s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Jet sin(const Jet& a) { return chain(a, std::sin(a.v), std::cos(a.v), -std::sin(a.v)); }
inline Jet cos(const Jet& a) { return chain(a, std::cos(a.v), -std::sin(a.v), -std::cos(a.v)); }
inline Jet conj(const Jet& a) {
  Jet r = a;
  r.v = std::conj(r.v);
  for (int i = 0; i < r.m; ++i) r.g[i] = std::conj(r.g[i]);
  for (int k = 0; k < nh(r.m); ++k) r.h[k] = std::conj(r.h[k]);
  return r;
}
inline Jet real(const Jet& a) { return (a + conj(a)) * 0.5; }
inline Jet imag(const Jet& a) { return (a - conj(a)) * cplx(0, -0.5); }
inline Jet pow(const Jet& a, int k) {
  Jet r(1.0);
  for (int i = 0; i < k; ++i) r = r * a;
  return r;
}

// First-order jet of the partial derivative d/dx_i (its Hessian is unknown and left zero).
inline Jet partial(const Jet& a, int i) {
  Jet r;
  r.m = a.m;
  r.v = a.g[i];
  for (int j = 0; j < a.m; ++j) r.g[j] = a.hess(i, j);
  return r;
}

inline cplx value_of(const Jet& a) { return a.v; }
inline cplx value_of(cplx a) { return a; }
inline double value_of(double a) { return a; }

// Coefficient type paired with a point scalar type.
template <class S>
using coeff_t = std::conditional_t<std::is_same_v<S, double>, cplx, Jet>;

inline cplx conj(cplx a) { return std::conj(a); }

// scalar helpers usable for both double and Jet points
inline double sqr(double a) { return a * a; }
inline Jet sqr(const Jet& a) { return a * a; }

}  // namespace acx

namespace acx {

// How form fields are differentiated: exact second-order jets, or central
// differences with step h (relative to max(1,|x|)).
struct Engine {
  enum Mode { Exact, Central } mode = Exact;
  double h = 1e-5;
  double budget() const { return mode == Exact ? 1e-12 : 10 * h * h; }
};

inline Jet seed(double value, int i, int m) { return Jet::variable(value, i, m); }

}  // namespace acx
