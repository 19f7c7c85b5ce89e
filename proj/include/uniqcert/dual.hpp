#pragma once

#include <cmath>

namespace uniqcert {

// Forward-mode dual number. T is double for first derivatives or another
// Dual for derivatives of derivatives.
template <class T>
struct Dual {
  T val{};
  T dot{};
};

inline double scalar_value(double x) { return x; }
template <class T>
double scalar_value(const Dual<T>& d) {
  return scalar_value(d.val);
}

inline bool all_finite(double x) { return std::isfinite(x); }
template <class T>
bool all_finite(const Dual<T>& d) {
  return all_finite(d.val) && all_finite(d.dot);
}

inline bool all_zero(double x) { return x == 0.0; }
template <class T>
bool all_zero(const Dual<T>& d) {
  return all_zero(d.val) && all_zero(d.dot);
}

template <class T>
struct scalar_of {
  using type = T;
  static T constant(double c) { return c; }
};
template <class T>
struct scalar_of<Dual<T>> {
  static Dual<T> constant(double c) {
    return {scalar_of<T>::constant(c), scalar_of<T>::constant(0.0)};
  }
};

template <class T>
Dual<T> operator-(const Dual<T>& a) {
  return {-a.val, -a.dot};
}
template <class T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.val + b.val, a.dot + b.dot};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.val - b.val, a.dot - b.dot};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.val * b.val, a.dot * b.val + a.val * b.dot};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T q = a.val / b.val;
  return {q, (a.dot - q * b.dot) / b.val};
}

template <class T>
Dual<T> sin(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {sin(a.val), cos(a.val) * a.dot};
}
template <class T>
Dual<T> cos(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {cos(a.val), -(sin(a.val) * a.dot)};
}
template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  T e = exp(a.val);
  return {e, e * a.dot};
}
template <class T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return {log(a.val), a.dot / a.val};
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  T s = sqrt(a.val);
  if (all_zero(a.dot)) return {s, scalar_of<T>::constant(0.0)};
  return {s, a.dot / (s + s)};
}

// Kink convention: derivative 0 exactly at the kink.
template <class T>
Dual<T> abs(const Dual<T>& a) {
  using std::abs;
  double v = scalar_value(a);
  if (v > 0.0) return a;
  if (v < 0.0) return -a;
  return {abs(a.val), scalar_of<T>::constant(0.0)};
}

// pow with a constant exponent; the only pow form the DSL admits.
inline double pow_const(double base, double e) { return std::pow(base, e); }
template <class T>
Dual<T> pow_const(const Dual<T>& a, double e) {
  T v = pow_const(a.val, e);
  if (e == 0.0) return {v, scalar_of<T>::constant(0.0)};
  if (all_zero(a.dot)) return {v, scalar_of<T>::constant(0.0)};
  T scale = scalar_of<T>::constant(e) * pow_const(a.val, e - 1.0);
  return {v, scale * a.dot};
}

// Ties take the first argument's branch.
inline double min_first(double a, double b) { return a <= b ? a : b; }
inline double max_first(double a, double b) { return a >= b ? a : b; }
template <class T>
Dual<T> min_first(const Dual<T>& a, const Dual<T>& b) {
  return scalar_value(a) <= scalar_value(b) ? a : b;
}
template <class T>
Dual<T> max_first(const Dual<T>& a, const Dual<T>& b) {
  return scalar_value(a) >= scalar_value(b) ? a : b;
}

}  // namespace uniqcert
