#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "uniqcert/errors.hpp"
#include "uniqcert/expr.hpp"

namespace uniqcert {

struct QuadResult {
  double value = 0.0;
  double err_estimate = 0.0;
  std::size_t evals = 0;
  bool converged = true;
};

namespace detail {

// Gauss-Kronrod 7-15 abscissae/weights on [-1,1] (positive half).
inline constexpr double kGK15X[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
inline constexpr double kGK15W[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
inline constexpr double kG7W[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Panel {
  double k15;
  double g7;
  double resabs;
};

template <class F>
Panel gk15(F& f, double a, double b) {
  double c = 0.5 * (a + b);
  double h = 0.5 * (b - a);
  double fc = f(c);
  double k15 = kGK15W[7] * fc;
  double g7 = kG7W[3] * fc;
  double resabs = kGK15W[7] * std::abs(fc);
  for (int i = 0; i < 7; ++i) {
    double lo = f(c - h * kGK15X[i]);
    double hi = f(c + h * kGK15X[i]);
    k15 += kGK15W[i] * (lo + hi);
    resabs += kGK15W[i] * (std::abs(lo) + std::abs(hi));
    if (i % 2 == 1) g7 += kG7W[i / 2] * (lo + hi);
  }
  return {k15 * h, g7 * h, resabs * std::abs(h)};
}

inline constexpr std::size_t kEvalBudget = 20'000'000;

template <class F>
void adapt(F& f, double a, double b, double tol, int depth, std::size_t budget,
           QuadResult& out) {
  Panel p = gk15(f, a, b);
  out.evals += 15;
  double roundoff = 50.0 * std::numeric_limits<double>::epsilon() * p.resabs;
  double raw = std::abs(p.k15 - p.g7);
  double err = raw < roundoff ? roundoff : raw;
  // Splitting below the round-off floor only multiplies panels, never accuracy.
  bool accept = raw <= tol || raw <= roundoff || depth >= 40 || out.evals > budget;
  if (accept) {
    out.value += p.k15;
    out.err_estimate += err;
    if (raw > tol && raw > roundoff) out.converged = false;
    return;
  }
  double mid = 0.5 * (a + b);
  adapt(f, a, mid, 0.5 * tol, depth + 1, budget, out);
  adapt(f, mid, b, 0.5 * tol, depth + 1, budget, out);
}

}  // namespace detail

template <class F>
QuadResult adaptive_quad(F&& f, double a, double b, double tol = 1e-10,
                         std::size_t eval_budget = detail::kEvalBudget) {
  if (tol <= 0.0) throw InvalidRangeError("quadrature tolerance must be positive");
  if (a == b) return {};
  double sign = 1.0;
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }
  QuadResult out;
  detail::adapt(f, a, b, tol, 0, eval_budget, out);
  out.value *= sign;
  return out;
}

inline QuadResult integrate1d(const Expr& f, double a, double b, double tol = 1e-10) {
  auto vars = used_variables(f);
  if (vars.size() > 1) {
    throw Error("integrate1d requires a univariate expression: " + to_string(f));
  }
  std::string var = vars.empty() ? std::string("s") : vars[0];
  Env env;
  env.set(var, a);
  return adaptive_quad(
      [&](double s) {
        env.set(var, s);
        return eval(f, env);
      },
      a, b, tol);
}

enum class Divergence { Convergent, Divergent, Undetermined };

inline const char* to_string(Divergence d) {
  switch (d) {
    case Divergence::Convergent: return "Convergent";
    case Divergence::Divergent: return "Divergent";
    default: return "Undetermined";
  }
}

// Integrates over [lo, hi] in by-decade bands when the interval spans many
// scales with 0 < lo; each band is a single decade, so integrands steep near
// the left endpoint stay within the bisection depth budget.
template <class F>
QuadResult banded_quad(F&& f, double lo, double hi, double tol = 1e-10) {
  if (lo > hi) {
    QuadResult r = banded_quad(f, hi, lo, tol);
    r.value = -r.value;
    return r;
  }
  if (!(lo > 0.0) || hi / lo < 100.0) return adaptive_quad(f, lo, hi, tol);
  int bands = static_cast<int>(std::ceil(std::log10(hi / lo)));
  double band_tol = tol / bands;
  QuadResult out;
  out.converged = true;
  double edge = lo;
  while (edge < hi) {
    double next = std::min(edge * 10.0, hi);
    QuadResult band = adaptive_quad(f, edge, next, band_tol);
    out.value += band.value;
    out.err_estimate += band.err_estimate;
    out.evals += band.evals;
    out.converged = out.converged && band.converged;
    edge = next;
  }
  return out;
}

// Classification of int_{a+}^{b} f for an integrand possibly singular at a.
// `value` is the k=12 partial integral; `partials` holds I_1..I_12 with
// I_k = int_{a + (b-a)*10^-k}^{b} f.
struct DivergenceClass {
  Divergence tag = Divergence::Undetermined;
  double value = 0.0;
  std::vector<double> partials;
  std::size_t evals = 0;
};

template <class F>
DivergenceClass classify_improper_left_fn(F&& f, double a, double b, double tol = 1e-10) {
  if (!(a < b)) throw InvalidRangeError("classify_improper_left requires a < b");
  const int kMax = 12;
  double span = b - a;
  DivergenceClass out;
  double band_tol = tol / kMax;

  QuadResult head = adaptive_quad(f, a + span * 1e-1, b, band_tol);
  out.evals += head.evals;
  out.partials.resize(kMax);
  out.partials[0] = head.value;
  double eps_k = 1e-1;
  for (int k = 1; k < kMax; ++k) {
    double eps_next = eps_k * 0.1;
    QuadResult band = adaptive_quad(f, a + span * eps_next, a + span * eps_k, band_tol);
    out.evals += band.evals;
    out.partials[k] = out.partials[k - 1] + band.value;
    eps_k = eps_next;
  }
  out.value = out.partials.back();

  double first_step = out.partials[1] - out.partials[0];
  bool growing = first_step > 0.0;
  for (int k = 0; k + 1 < kMax && growing; ++k) {
    if (out.partials[k + 1] - out.partials[k] < 0.1 * std::abs(first_step)) growing = false;
  }
  if (growing) {
    out.tag = Divergence::Divergent;
    return out;
  }
  double tail = std::abs(out.partials[11] - out.partials[10]);
  if (tail <= std::max(1e-8, 1e-5 * std::abs(out.value))) {
    out.tag = Divergence::Convergent;
    return out;
  }
  out.tag = Divergence::Undetermined;
  return out;
}

inline DivergenceClass classify_improper_left(const Expr& f, double a, double b,
                                              double tol = 1e-10) {
  auto vars = used_variables(f);
  if (vars.size() > 1) {
    throw Error("classify_improper_left requires a univariate expression: " + to_string(f));
  }
  std::string var = vars.empty() ? std::string("s") : vars[0];
  Env env;
  return classify_improper_left_fn(
      [&](double s) {
        env.set(var, s);
        return eval(f, env);
      },
      a, b, tol);
}

}  // namespace uniqcert
