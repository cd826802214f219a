#pragma once

#include <cmath>
#include <cstdint>

namespace gbt {

// Double-double value: an unevaluated sum hi + lo with |lo| <= ulp(hi)/2.
// Roughly 32 significant decimal digits while using only 64-bit hardware
// arithmetic. Used by the gradient checker to evaluate the loss at p +- h
// accurately enough that the pinned step size h = 1e-6 is limited by
// truncation error instead of rounding noise.
struct dd {
  double hi = 0.0;
  double lo = 0.0;

  constexpr dd() = default;
  constexpr dd(double h) : hi(h), lo(0.0) {}
  constexpr dd(double h, double l) : hi(h), lo(l) {}
};

namespace detail {

inline dd two_sum(double a, double b) {
  double s = a + b;
  double bb = s - a;
  double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}

// Requires |a| >= |b| (or a == 0).
inline dd quick_two_sum(double a, double b) {
  double s = a + b;
  return {s, b - (s - a)};
}

inline dd two_prod(double a, double b) {
  double p = a * b;
  return {p, std::fma(a, b, -p)};
}

}  // namespace detail

inline dd operator+(dd a, dd b) {
  dd s = detail::two_sum(a.hi, b.hi);
  dd t = detail::two_sum(a.lo, b.lo);
  s.lo += t.hi;
  s = detail::quick_two_sum(s.hi, s.lo);
  s.lo += t.lo;
  return detail::quick_two_sum(s.hi, s.lo);
}

inline dd operator-(dd a) { return {-a.hi, -a.lo}; }
inline dd operator-(dd a, dd b) { return a + (-b); }

inline dd operator*(dd a, dd b) {
  dd p = detail::two_prod(a.hi, b.hi);
  p.lo += a.hi * b.lo + a.lo * b.hi;
  return detail::quick_two_sum(p.hi, p.lo);
}

inline dd operator/(dd a, dd b) {
  double q1 = a.hi / b.hi;
  dd r = a - dd(q1) * b;
  double q2 = r.hi / b.hi;
  r = r - dd(q2) * b;
  double q3 = r.hi / b.hi;
  dd q = detail::quick_two_sum(q1, q2);
  return q + dd(q3);
}

inline dd& operator+=(dd& a, dd b) { return a = a + b; }
inline dd& operator-=(dd& a, dd b) { return a = a - b; }
inline dd& operator*=(dd& a, dd b) { return a = a * b; }
inline dd& operator/=(dd& a, dd b) { return a = a / b; }

inline bool operator==(dd a, dd b) { return a.hi == b.hi && a.lo == b.lo; }
inline bool operator!=(dd a, dd b) { return !(a == b); }
inline bool operator<(dd a, dd b) { return a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo); }
inline bool operator>(dd a, dd b) { return b < a; }
inline bool operator<=(dd a, dd b) { return !(b < a); }
inline bool operator>=(dd a, dd b) { return !(a < b); }

inline double to_double(dd a) { return a.hi + a.lo; }

inline dd dd_abs(dd a) { return a.hi < 0.0 || (a.hi == 0.0 && a.lo < 0.0) ? -a : a; }

inline dd dd_sqrt(dd a) {
  if (a.hi == 0.0 && a.lo == 0.0) return dd(0.0);
  // One Newton step from the double estimate (Karp & Markstein).
  double x = 1.0 / std::sqrt(a.hi);
  double ax = a.hi * x;
  dd err = a - dd(ax) * dd(ax);
  return dd(ax) + dd(err.hi * (x * 0.5));
}

inline dd dd_ldexp(dd a, int n) { return {std::ldexp(a.hi, n), std::ldexp(a.lo, n)}; }

inline dd dd_exp(dd a) {
  // exp(a) = 2^m * exp(r)  with  r = a - m ln2, then r scaled down by 2^k so
  // the Taylor series converges fast, and the result squared back k times.
  static const dd kLn2{6.931471805599452862e-01, 2.319046813846299558e-17};
  if (a.hi > 709.0) return dd(HUGE_VAL);
  if (a.hi < -709.0) return dd(0.0);
  double m = std::floor(a.hi / kLn2.hi + 0.5);
  dd r = a - dd(m) * kLn2;
  const int k = 9;  // scale by 512
  r = dd_ldexp(r, -k);
  dd term = r;
  dd sum = dd(1.0) + r;
  dd fact = dd(1.0);
  for (int i = 2; i <= 18; ++i) {
    fact = fact * dd(static_cast<double>(i));
    term = term * r;
    dd add = term / fact;
    sum = sum + add;
    if (std::fabs(add.hi) < 1e-35 * std::fabs(sum.hi)) break;
  }
  for (int i = 0; i < k; ++i) sum = sum * sum;
  return dd_ldexp(sum, static_cast<int>(m));
}

inline dd dd_log(dd a) {
  // Newton iteration x_{n+1} = x_n + a * exp(-x_n) - 1, starting from the
  // double-precision logarithm; two steps reach full dd precision.
  dd x(std::log(a.hi));
  for (int i = 0; i < 2; ++i) x = x + a * dd_exp(-x) - dd(1.0);
  return x;
}

inline dd dd_log1p(dd a) { return dd_log(dd(1.0) + a); }

inline dd dd_tanh(dd a) {
  bool neg = a.hi < 0.0;
  dd x = neg ? -a : a;
  dd u = dd_exp(dd_ldexp(-x, 1));  // exp(-2x) <= 1, no cancellation in 1 - u
  dd t = (dd(1.0) - u) / (dd(1.0) + u);
  return neg ? -t : t;
}

inline bool dd_isfinite(dd a) { return std::isfinite(a.hi) && std::isfinite(a.lo); }

// Scalar shims so numeric kernels can be written once for double and dd.
inline double s_exp(double x) { return std::exp(x); }
inline double s_log(double x) { return std::log(x); }
inline double s_log1p(double x) { return std::log1p(x); }
inline double s_sqrt(double x) { return std::sqrt(x); }
inline double s_tanh(double x) { return std::tanh(x); }
inline double s_abs(double x) { return std::fabs(x); }
inline bool s_isfinite(double x) { return std::isfinite(x); }
inline double s_double(double x) { return x; }

inline dd s_exp(dd x) { return dd_exp(x); }
inline dd s_log(dd x) { return dd_log(x); }
inline dd s_log1p(dd x) { return dd_log1p(x); }
inline dd s_sqrt(dd x) { return dd_sqrt(x); }
inline dd s_tanh(dd x) { return dd_tanh(x); }
inline dd s_abs(dd x) { return dd_abs(x); }
inline bool s_isfinite(dd x) { return dd_isfinite(x); }
inline double s_double(dd x) { return to_double(x); }

}  // namespace gbt
