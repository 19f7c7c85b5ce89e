#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uniqcert/calculus.hpp"
#include "uniqcert/errors.hpp"
#include "uniqcert/expr.hpp"
#include "uniqcert/quadrature.hpp"
#include "uniqcert/threads.hpp"

namespace uniqcert {

inline constexpr double kSlack = 1e-12;

enum class VerdictTag { Certified, Refuted, Inconclusive };

inline const char* to_string(VerdictTag t) {
  switch (t) {
    case VerdictTag::Certified: return "Certified";
    case VerdictTag::Refuted: return "Refuted";
    default: return "Inconclusive";
  }
}

// Outcome of a criterion check. Certified names the criterion and the grid it
// was validated on; Refuted carries a machine-checkable witness; Inconclusive
// names the failing hypothesis. All inequality checks are grid checks, so the
// grid string is the honesty metadata: "certified" always means
// "certified on this grid".
struct Verdict {
  VerdictTag tag = VerdictTag::Inconclusive;
  std::string criterion;
  std::string reason;
  std::string witness;
  std::string grid;
  std::vector<double> partials;
  std::vector<std::pair<std::string, double>> metrics;

  bool certified() const { return tag == VerdictTag::Certified; }
  const double* metric(std::string_view name) const {
    for (const auto& kv : metrics) {
      if (kv.first == name) return &kv.second;
    }
    return nullptr;
  }
};

namespace detail {

inline Verdict certified(std::string criterion, std::string grid) {
  Verdict v;
  v.tag = VerdictTag::Certified;
  v.criterion = std::move(criterion);
  v.grid = std::move(grid);
  return v;
}

inline Verdict inconclusive(std::string reason) {
  Verdict v;
  v.tag = VerdictTag::Inconclusive;
  v.reason = std::move(reason);
  return v;
}

// expressions "in x": bind x plus the s/r spellings
inline double eval_x(const Expr& e, double xv, Env& env) {
  env.set("x", xv).set("s", xv).set("r", xv);
  return eval(e, env);
}

// expressions "in t": bind t plus the s spelling
inline double eval_t(const Expr& e, double tv, Env& env) {
  env.set("t", tv).set("s", tv);
  return eval(e, env);
}

inline std::string half_open_grid(double hi, const char* var) {
  return std::string(var) + " in (0," + num_to_string(hi) + "], 256 uniform points";
}

}  // namespace detail

// psi(0)=0, psi>0 on (0,b], and the improper integral of 1/psi at 0 diverges.
inline Verdict check_osgood(const Expr& psi, double b) {
  if (!(b > 0)) throw InvalidRangeError("check_osgood requires b > 0");
  Env env;
  double at0 = detail::eval_x(psi, 0.0, env);
  if (std::abs(at0) > kSlack) {
    return detail::inconclusive("psi(0) != 0 (psi(0)=" + detail::num_to_string(at0) + ")");
  }
  for (int i = 1; i < kGridPoints; ++i) {
    double x = b * i / (kGridPoints - 1);
    double v = detail::eval_x(psi, x, env);
    if (v <= 0.0) {
      return detail::inconclusive("psi not positive at x=" + detail::num_to_string(x));
    }
  }
  DivergenceClass dc = classify_improper_left_fn(
      [&](double s) { return 1.0 / detail::eval_x(psi, s, env); }, 0.0, b);
  if (dc.tag != Divergence::Divergent) {
    Verdict v = detail::inconclusive(std::string("integral of 1/psi near 0 classified ") +
                                     to_string(dc.tag) + ", needs Divergent");
    v.partials = dc.partials;
    return v;
  }
  Verdict v = detail::certified("osgood", detail::half_open_grid(b, "x"));
  v.partials = dc.partials;
  return v;
}

// p integrable at 0+ and psi an Osgood modulus.
inline Verdict check_montel_tonelli(const Expr& p, const Expr& psi, double a, double b) {
  if (!(a > 0)) throw InvalidRangeError("check_montel_tonelli requires a > 0");
  Env env;
  for (int i = 1; i < kGridPoints; ++i) {
    double t = a * i / (kGridPoints - 1);
    if (detail::eval_t(p, t, env) <= 0.0) {
      return detail::inconclusive("p not positive at t=" + detail::num_to_string(t));
    }
  }
  DivergenceClass dc =
      classify_improper_left_fn([&](double s) { return detail::eval_t(p, s, env); }, 0.0, a);
  if (dc.tag != Divergence::Convergent) {
    Verdict v = detail::inconclusive(std::string("integral of p near 0 classified ") +
                                     to_string(dc.tag) + ", needs Convergent");
    v.partials = dc.partials;
    return v;
  }
  Verdict os = check_osgood(psi, b);
  if (!os.certified()) {
    return detail::inconclusive("osgood sub-check failed: " + os.reason);
  }
  Verdict v = detail::certified("montel_tonelli", detail::half_open_grid(a, "t") + "; " + os.grid);
  v.partials = dc.partials;
  v.metrics.emplace_back("p_integral", dc.value);
  return v;
}

// q(t) = t*p(t) - 1 nonnegative with q(s)/s integrable at 0+, psi the
// identity. q identically zero is the classical 1/t case and keeps its
// older name.
inline Verdict check_van_kampen(const Expr& p, const Expr& psi, double a) {
  if (!(a > 0)) throw InvalidRangeError("check_van_kampen requires a > 0");
  Env env;
  auto q = [&](double t) { return t * detail::eval_t(p, t, env) - 1.0; };
  double max_abs_q = 0.0;
  for (int i = 1; i < kGridPoints; ++i) {
    double t = a * i / (kGridPoints - 1);
    double qv = q(t);
    if (qv < -kSlack) {
      return detail::inconclusive("q(t)=t*p(t)-1 negative at t=" + detail::num_to_string(t));
    }
    max_abs_q = std::max(max_abs_q, std::abs(qv));
  }

  bool psi_is_identity = psi.root->kind == NodeKind::Variable && psi.root->name == "x";
  if (!psi_is_identity) {
    bool ratio_one = true;
    Env penv;
    for (int i = 1; i < kGridPoints && ratio_one; ++i) {
      double x = static_cast<double>(i) / (kGridPoints - 1);
      if (references(psi, "t")) {
        for (int j = 1; j < kGridPoints; j += 16) {
          double t = a * j / (kGridPoints - 1);
          penv.set("t", t);
          if (std::abs(detail::eval_x(psi, x, penv) / x - 1.0) > kSlack) {
            ratio_one = false;
            break;
          }
        }
      } else if (std::abs(detail::eval_x(psi, x, penv) / x - 1.0) > kSlack) {
        ratio_one = false;
      }
    }
    if (!ratio_one) {
      return detail::inconclusive("psi differs from x (this criterion needs psi(x)=x)");
    }
  }

  DivergenceClass dc = classify_improper_left_fn([&](double s) { return q(s) / s; }, 0.0, a);
  if (dc.tag != Divergence::Convergent) {
    Verdict v = detail::inconclusive(std::string("integral of q(s)/s near 0 classified ") +
                                     to_string(dc.tag) + ", needs Convergent");
    v.partials = dc.partials;
    return v;
  }
  const char* name = max_abs_q <= kSlack ? "nagumo" : "van_kampen";
  Verdict v = detail::certified(name, detail::half_open_grid(a, "t"));
  v.partials = dc.partials;
  v.metrics.emplace_back("max_abs_q", max_abs_q);
  return v;
}

// J(t) = int_t^m (1/psi(s) - p(s)) ds on t = m*10^-k: certify when J blows up
// (growth test) or when J stabilizes and psi(x) <= x.
inline Verdict check_lasalle(const Expr& p, const Expr& psi, double a, double b) {
  if (!(a > 0) || !(b > 0)) throw InvalidRangeError("check_lasalle requires a,b > 0");
  Env env;
  for (int i = 1; i < kGridPoints; ++i) {
    double t = a * i / (kGridPoints - 1);
    if (detail::eval_t(p, t, env) <= 0.0) {
      return detail::inconclusive("p not positive at t=" + detail::num_to_string(t));
    }
  }
  Env xenv;
  double at0 = detail::eval_x(psi, 0.0, xenv);
  if (std::abs(at0) > kSlack) {
    return detail::inconclusive("psi(0) != 0 (psi(0)=" + detail::num_to_string(at0) + ")");
  }
  for (int i = 1; i < kGridPoints; ++i) {
    double x = b * i / (kGridPoints - 1);
    if (detail::eval_x(psi, x, xenv) <= 0.0) {
      return detail::inconclusive("psi not positive at x=" + detail::num_to_string(x));
    }
  }

  double m = std::min(a, b);
  auto h = [&](double s) {
    return 1.0 / detail::eval_x(psi, s, xenv) - detail::eval_t(p, s, env);
  };
  const int kMax = 12;
  std::vector<double> J(kMax);
  {
    // capped eval budget: 1/psi - p cancels catastrophically for steep psi
    // near 0, and refining past the cancellation noise buys nothing
    double band_tol = 1e-10 / kMax;
    const std::size_t band_budget = 200'000;
    QuadResult head = adaptive_quad(h, m * 1e-1, m, band_tol, band_budget);
    J[0] = head.value;
    double eps_k = 1e-1;
    for (int k = 1; k < kMax; ++k) {
      double eps_next = eps_k * 0.1;
      QuadResult band = adaptive_quad(h, m * eps_next, m * eps_k, band_tol, band_budget);
      J[k] = J[k - 1] + band.value;
      eps_k = eps_next;
    }
  }

  double first_step = J[1] - J[0];
  bool growing = first_step > 0.0;
  for (int k = 0; k + 1 < kMax && growing; ++k) {
    if (J[k + 1] - J[k] < 0.1 * std::abs(first_step)) growing = false;
  }
  std::string jgrid = "J sampled at t = " + detail::num_to_string(m) + "*10^-k, k=1..12";
  if (growing) {
    Verdict v = detail::certified("lasalle_13", jgrid);
    v.partials = J;
    return v;
  }

  bool stable = std::abs(J[11] - J[10]) <= std::max(1e-8, 1e-5 * std::abs(J[11]));
  if (stable) {
    bool psi_below_identity = true;
    double bad_x = 0.0;
    for (int i = 1; i < kGridPoints; ++i) {
      double x = b * i / (kGridPoints - 1);
      if (detail::eval_x(psi, x, xenv) > x + kSlack) {
        psi_below_identity = false;
        bad_x = x;
        break;
      }
    }
    if (psi_below_identity) {
      Verdict v = detail::certified("lasalle_14", jgrid + "; " + detail::half_open_grid(b, "x"));
      v.partials = J;
      v.metrics.emplace_back("J_floor", *std::min_element(J.begin(), J.end()));
      return v;
    }
    Verdict v = detail::inconclusive("J stabilizes but psi exceeds x at x=" +
                                     detail::num_to_string(bad_x));
    v.partials = J;
    return v;
  }
  Verdict v = detail::inconclusive("J neither grows persistently nor stabilizes");
  v.partials = J;
  return v;
}

// Family p=(1+q1(t))/t, psi=(1+q2(t)*x^gamma)*x: certify from integrability
// of q1(s)/s and |q2'(s)|, nonnegativity, and gamma>0.
inline Verdict check_corollary1(const Expr& q1, const Expr& q2, double gamma, double a,
                                double b) {
  if (!(a > 0) || !(b > 0)) throw InvalidRangeError("check_corollary1 requires a,b > 0");
  if (!(gamma > 0)) return detail::inconclusive("gamma must be positive");
  Env env;
  for (int i = 1; i < kGridPoints; ++i) {
    double t = a * i / (kGridPoints - 1);
    if (detail::eval_t(q1, t, env) < -kSlack) {
      return detail::inconclusive("q1 negative at t=" + detail::num_to_string(t));
    }
  }
  for (int i = 0; i < kGridPoints; ++i) {
    double t = a * i / (kGridPoints - 1);
    if (detail::eval_t(q2, t, env) < -kSlack) {
      return detail::inconclusive("q2 negative at t=" + detail::num_to_string(t));
    }
  }
  DivergenceClass dq1 = classify_improper_left_fn(
      [&](double s) { return detail::eval_t(q1, s, env) / s; }, 0.0, a);
  if (dq1.tag != Divergence::Convergent) {
    Verdict v = detail::inconclusive(std::string("integral of q1(s)/s near 0 classified ") +
                                     to_string(dq1.tag) + ", needs Convergent");
    v.partials = dq1.partials;
    return v;
  }
  Env denv;
  DivergenceClass dq2 = classify_improper_left_fn(
      [&](double s) {
        denv.set("s", s);
        return std::abs(partial(q2, "t", denv.set("t", s)));
      },
      0.0, a);
  if (dq2.tag != Divergence::Convergent) {
    Verdict v = detail::inconclusive(std::string("integral of |q2'| near 0 classified ") +
                                     to_string(dq2.tag) + ", needs Convergent");
    v.partials = dq2.partials;
    return v;
  }
  Verdict v = detail::certified(
      "corollary_co1", detail::half_open_grid(a, "t") + "; " + detail::half_open_grid(b, "x"));
  v.partials = dq1.partials;
  v.reason = "implies p(t)=(1+" + to_string(q1) + ")/t, psi(x)=(1+" + to_string(q2) +
             "*x^" + detail::num_to_string(gamma) + ")*x";
  v.metrics.emplace_back("gamma", gamma);
  return v;
}

// phi(0)=0, phi>0, phi'(0)<=1, phi'' bounded above: then phi(x) <= x + c x^2
// with c = max(0, sup phi'')/2, reducing to the previous family.
inline Verdict check_corollary2(const Expr& phi, double b) {
  if (!(b > 0)) throw InvalidRangeError("check_corollary2 requires b > 0");
  Env env;
  double at0 = detail::eval_x(phi, 0.0, env);
  if (std::abs(at0) > kSlack) {
    return detail::inconclusive("phi(0) != 0 (phi(0)=" + detail::num_to_string(at0) + ")");
  }
  for (int i = 1; i < kGridPoints; ++i) {
    double x = b * i / (kGridPoints - 1);
    if (detail::eval_x(phi, x, env) <= 0.0) {
      return detail::inconclusive("phi not positive at x=" + detail::num_to_string(x));
    }
  }
  Env denv;
  denv.set("x", 0.0).set("s", 0.0).set("r", 0.0);
  double slope0 = partial(phi, "x", denv);
  if (slope0 > 1.0 + kSlack) {
    return detail::inconclusive("phi'(0)=" + detail::num_to_string(slope0) + " > 1");
  }
  double sup_pp = -std::numeric_limits<double>::infinity();
  for (int i = 1; i + 1 < kGridPoints; ++i) {
    double x = b * i / (kGridPoints - 1);
    denv.set("x", x).set("s", x).set("r", x);
    sup_pp = std::max(sup_pp, detail::second_partial(phi, "x", denv));
  }
  double c = std::max(0.0, sup_pp) / 2.0;
  Verdict v = detail::certified("corollary_co2",
                                "x in (0," + detail::num_to_string(b) + "), 255 uniform points");
  v.reason = "phi(x) <= x + c*x^2 on-grid with c=" + detail::num_to_string(c);
  v.metrics.emplace_back("taylor_constant", c);
  v.metrics.emplace_back("phi_prime_0", slope0);
  v.metrics.emplace_back("sup_phi_second", sup_pp);
  return v;
}

// For c > 1 the bound c*x/t fails uniqueness: t^c solves x' = c*x/t with
// x(0)=x'(0)=0, alongside the zero solution.
inline Verdict find_counterexample_witness(double c, double a) {
  if (!(c > 1.0)) throw InvalidRangeError("witness family requires c > 1");
  if (!(a > 0)) throw InvalidRangeError("witness window requires a > 0");
  double max_residual = 0.0;
  for (int i = 1; i < kGridPoints; ++i) {
    double t = a * i / (kGridPoints - 1);
    double lhs = c * std::pow(t, c - 1.0);
    double rhs = c * std::pow(t, c) / t;
    max_residual = std::max(max_residual, std::abs(lhs - rhs));
  }
  double phi0 = std::pow(0.0, c);
  double slope0 = c * std::pow(0.0, c - 1.0);
  if (max_residual > 1e-10 || phi0 != 0.0 || slope0 != 0.0) {
    return detail::inconclusive("witness residual too large: " +
                                detail::num_to_string(max_residual));
  }
  Verdict v;
  v.tag = VerdictTag::Refuted;
  v.witness = "t^" + detail::num_to_string(c);
  v.reason = "g(t,x)=" + detail::num_to_string(c) +
             "*x/t admits the nontrivial solution x(t)=" + v.witness +
             " with x(0)=x'(0)=0, so the zero solution is not unique";
  v.grid = detail::half_open_grid(a, "t");
  v.metrics.emplace_back("max_residual", max_residual);
  v.metrics.emplace_back("c", c);
  return v;
}

// Scalar or vector IVP: x' = f(t,x), x(t0)=x0, on the closed box
// [t0-a, t0+a] x Ball(x0, b) in the max norm.
class IvpSpec {
 public:
  IvpSpec(std::vector<Expr> f, double t0, std::vector<double> x0, double a, double b)
      : f_(std::move(f)), t0_(t0), x0_(std::move(x0)), a_(a), b_(b) {
    if (f_.empty() || f_.size() != x0_.size()) {
      throw InvalidRangeError("IvpSpec needs one equation per state component");
    }
    if (!(a_ > 0) || !(b_ > 0)) throw InvalidRangeError("IvpSpec requires a,b > 0");
    for (std::size_t i = 0; i < f_.size(); ++i) {
      names_.push_back(scalar() ? std::string("x") : "x" + std::to_string(i + 1));
    }
    // finiteness scan: 257 per axis scalar, 33 per axis vector; a right side
    // singular exactly at t0 (1/t terms at t0=0) is tolerated and flagged
    int n = scalar() ? kGridPoints : 33;
    Env env;
    std::vector<double> x(dim());
    std::vector<std::size_t> idx(dim(), 0);
    std::vector<double> out(dim());
    while (true) {
      for (std::size_t d = 0; d < dim(); ++d) {
        x[d] = x0_[d] - b_ + 2.0 * b_ * idx[d] / (n - 1);
      }
      for (int i = 0; i < n; ++i) {
        double t = t0_ - a_ + 2.0 * a_ * i / (n - 1);
        try {
          eval_f(t, x, out, env);
        } catch (const Error&) {
          if (std::abs(t - t0_) <= 1e-12 * a_) {
            singular_t0_ = true;
          } else {
            throw;
          }
        }
      }
      std::size_t d = 0;
      for (; d < dim(); ++d) {
        if (++idx[d] < static_cast<std::size_t>(n)) break;
        idx[d] = 0;
      }
      if (d == dim()) break;
    }
  }

  bool scalar() const { return f_.size() == 1; }
  bool singular_t0() const { return singular_t0_; }
  std::size_t dim() const { return f_.size(); }
  const std::vector<Expr>& f() const { return f_; }
  double t0() const { return t0_; }
  const std::vector<double>& x0() const { return x0_; }
  double a() const { return a_; }
  double b() const { return b_; }

  void eval_f(double t, const std::vector<double>& x, std::vector<double>& out, Env& env) const {
    env.set("t", t);
    for (std::size_t d = 0; d < dim(); ++d) env.set(names_[d], x[d]);
    for (std::size_t d = 0; d < dim(); ++d) out[d] = eval(f_[d], env);
  }

 private:
  std::vector<Expr> f_;
  double t0_;
  std::vector<double> x0_;
  double a_, b_;
  std::vector<std::string> names_;
  bool singular_t0_ = false;
};

// Factorized bound g(t,x) = p(t) * psi(t,x) on (0,a] x [0,b].
class BoundSpec {
 public:
  BoundSpec(Expr p, Expr psi, double a, double b)
      : p_(std::move(p)), psi_(std::move(psi)), a_(a), b_(b) {
    if (!(a_ > 0) || !(b_ > 0)) throw InvalidRangeError("BoundSpec requires a,b > 0");
    Env env;
    for (int i = 1; i < kGridPoints; ++i) {
      double t = a_ * i / (kGridPoints - 1);
      if (detail::eval_t(p_, t, env) <= 0.0) {
        throw InvalidRangeError("BoundSpec requires p > 0 on (0,a]; fails at t=" +
                                detail::num_to_string(t));
      }
    }
    Env xenv;
    for (int i = 0; i < kGridPoints; ++i) {
      double x = b_ * i / (kGridPoints - 1);
      if (references(psi_, "t")) {
        for (int j = 1; j < kGridPoints; j += 16) {
          xenv.set("t", a_ * j / (kGridPoints - 1));
          if (detail::eval_x(psi_, x, xenv) < -kSlack) {
            throw InvalidRangeError("BoundSpec requires psi >= 0 on the grid");
          }
        }
      } else if (detail::eval_x(psi_, x, xenv) < -kSlack) {
        throw InvalidRangeError("BoundSpec requires psi >= 0 on the grid");
      }
    }
  }

  const Expr& p() const { return p_; }
  const Expr& psi() const { return psi_; }
  double a() const { return a_; }
  double b() const { return b_; }

  // g(tau, u) = p(tau) * psi(tau, u), tau > 0
  double g(double tau, double u, Env& penv, Env& xenv) const {
    double pv = detail::eval_t(p_, tau, penv);
    if (references(psi_, "t")) xenv.set("t", tau);
    return pv * detail::eval_x(psi_, u, xenv);
  }

 private:
  Expr p_, psi_;
  double a_, b_;
};

// |f(t,x)| <= psi(|x-x0|) on the box grid plus psi an Osgood modulus: the
// constant solution x0 is the unique one.
inline Verdict check_zero_solution(const IvpSpec& ivp, const Expr& psi) {
  if (!ivp.scalar()) return detail::inconclusive("scalar problems only");
  Env fenv;
  Env penv;
  std::vector<double> xv(1), out(1);
  for (int i = 0; i < kGridPoints; ++i) {
    double t = ivp.t0() - ivp.a() + 2.0 * ivp.a() * i / (kGridPoints - 1);
    for (int j = 0; j < kGridPoints; ++j) {
      double x = ivp.x0()[0] - ivp.b() + 2.0 * ivp.b() * j / (kGridPoints - 1);
      xv[0] = x;
      ivp.eval_f(t, xv, out, fenv);
      double rhs = detail::eval_x(psi, std::abs(x - ivp.x0()[0]), penv);
      if (std::abs(out[0]) > rhs + kSlack) {
        return detail::inconclusive(
            "|f| exceeds psi(|x-x0|) at (t,x)=(" + detail::num_to_string(t) + "," +
            detail::num_to_string(x) + "): |f|=" + detail::num_to_string(std::abs(out[0])) +
            ", bound=" + detail::num_to_string(rhs));
      }
    }
  }
  Verdict os = check_osgood(psi, ivp.b());
  if (!os.certified()) {
    return detail::inconclusive("osgood sub-check failed: " + os.reason);
  }
  Verdict v = detail::certified("theorem_th3: unique constant solution",
                                "box grid 257x257 around (t0,x0); " + os.grid);
  v.partials = os.partials;
  return v;
}

enum class KamkeMode { SelfBound, DifferenceBound };

namespace detail {

struct GridHit {
  bool found = false;
  std::string where;
};

}  // namespace detail

// Validates the comparison inequality on the box grid against an already
// certified bound: SelfBound checks |f(t,x)| <= g(|t-t0|, |x-x0|) plus
// f(t,x0)=0; DifferenceBound checks |f(t,x)-f(t,y)| <= g(|t-t0|, |x-y|) on
// the half-radius box. Grid columns with t = t0 are skipped (g is defined
// for tau > 0 only).
inline Verdict check_kamke(const IvpSpec& ivp, const BoundSpec& bound, KamkeMode mode,
                           const Verdict& certificate) {
  if (!certificate.certified()) {
    return detail::inconclusive("the supplied bound certificate is not Certified");
  }
  std::size_t dim = ivp.dim();
  bool self = mode == KamkeMode::SelfBound;
  double box_a = self ? ivp.a() : ivp.a() / 2.0;
  double box_b = self ? ivp.b() : ivp.b() / 2.0;
  int n_t = ivp.scalar() ? (self ? kGridPoints : 65) : 33;
  int n_x = n_t;

  // one x-lattice per axis, shared by x and y sweeps
  std::vector<double> axis(n_x);
  std::vector<std::size_t> powers(dim, 1);
  std::size_t lattice = 1;
  for (std::size_t d = 0; d < dim; ++d) {
    powers[d] = lattice;
    lattice *= n_x;
  }
  auto point = [&](std::size_t flat, std::vector<double>& x) {
    for (std::size_t d = 0; d < dim; ++d) {
      x[d] = ivp.x0()[d] - box_b + 2.0 * box_b * ((flat / powers[d]) % n_x) / (n_x - 1);
    }
  };

  std::vector<detail::GridHit> hits(n_t);
  parallel_for(static_cast<std::size_t>(n_t), [&](std::size_t ti) {
    Env fenv;
    Env penv;
    Env xenv;
    std::vector<double> x(dim), y(dim), fx(dim), fy(dim);
    double t = ivp.t0() - box_a + 2.0 * box_a * ti / (n_t - 1);
    double tau = std::abs(t - ivp.t0());
    detail::GridHit& hit = hits[ti];
    if (tau <= 1e-14 * box_a) return;  // g is defined for tau > 0 only

    if (self) {
      ivp.eval_f(t, ivp.x0(), fx, fenv);
      double base = 0.0;
      for (double v : fx) base = std::max(base, std::abs(v));
      if (base > kSlack) {
        hit.found = true;
        hit.where = "f(t,x0) != 0 at t=" + detail::num_to_string(t) +
                    " (|f|=" + detail::num_to_string(base) + ")";
        return;
      }
    }

    // cache f over the x-lattice for this t
    std::vector<double> fcache(lattice * dim);
    for (std::size_t xi = 0; xi < lattice; ++xi) {
      point(xi, x);
      ivp.eval_f(t, x, fx, fenv);
      for (std::size_t d = 0; d < dim; ++d) fcache[xi * dim + d] = fx[d];
    }

    if (self) {
      for (std::size_t xi = 0; xi < lattice && !hit.found; ++xi) {
        point(xi, x);
        double fn = 0.0, un = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          fn = std::max(fn, std::abs(fcache[xi * dim + d]));
          un = std::max(un, std::abs(x[d] - ivp.x0()[d]));
        }
        double gv = bound.g(tau, un, penv, xenv);
        if (fn > gv + kSlack) {
          hit.found = true;
          hit.where = "|f| > g at t=" + detail::num_to_string(t) +
                      ", |x-x0|=" + detail::num_to_string(un) +
                      ": |f|=" + detail::num_to_string(fn) +
                      ", g=" + detail::num_to_string(gv);
        }
      }
    } else {
      for (std::size_t xi = 0; xi < lattice && !hit.found; ++xi) {
        point(xi, x);
        for (std::size_t yi = 0; yi < lattice && !hit.found; ++yi) {
          point(yi, y);
          double fn = 0.0, un = 0.0;
          for (std::size_t d = 0; d < dim; ++d) {
            fn = std::max(fn, std::abs(fcache[xi * dim + d] - fcache[yi * dim + d]));
            un = std::max(un, std::abs(x[d] - y[d]));
          }
          double gv = bound.g(tau, un, penv, xenv);
          if (fn > gv + kSlack) {
            hit.found = true;
            hit.where = "|f(t,x)-f(t,y)| > g at t=" + detail::num_to_string(t) +
                        ", |x-y|=" + detail::num_to_string(un) +
                        ": diff=" + detail::num_to_string(fn) +
                        ", g=" + detail::num_to_string(gv);
          }
        }
      }
    }
  });

  for (const auto& hit : hits) {
    if (hit.found) return detail::inconclusive(hit.where);
  }
  std::string grid = self ? (ivp.scalar() ? "(ub) 257x257 box grid, t=t0 column skipped"
                                          : "(ub) 33-per-axis box grid, t=t0 column skipped")
                          : (ivp.scalar() ? "65^3 half-radius grid, t=t0 column skipped"
                                          : "33-per-axis half-radius grid, t=t0 column skipped");
  Verdict v = detail::certified("kamke", grid);
  v.reason = "bound certificate: " + certificate.criterion;
  return v;
}

// Separation functional for a user-supplied test function u with u(t1)=0:
// s(t) = int_{u(t)}^{u(t2)} dr/psi(t2,r) - int_t^{t2} p(s) ds, sampled along
// t decreasing to t1. Reports the observed trend; no verdict is implied.
struct ComparisonTrend {
  std::vector<double> ts;
  std::vector<double> values;
  std::string trend;
};

inline ComparisonTrend comparison_probe(const Expr& p, const Expr& psi, const Expr& u,
                                        double t1, double t2) {
  if (!(t1 < t2)) throw InvalidRangeError("comparison_probe requires t1 < t2");
  Env uenv;
  auto uval = [&](double t) {
    uenv.set("t", t);
    return eval(u, uenv);
  };
  if (std::abs(uval(t1)) > 1e-9) {
    throw InvalidRangeError("comparison_probe requires u(t1)=0");
  }
  Env penv;
  Env xenv;
  if (references(psi, "t")) xenv.set("t", t2);
  double u2 = uval(t2);
  ComparisonTrend out;
  for (int k = 1; k <= 8; ++k) {
    double t = t1 + (t2 - t1) * std::pow(10.0, -k);
    double inner =
        banded_quad([&](double r) { return 1.0 / detail::eval_x(psi, r, xenv); }, uval(t), u2,
                    1e-10)
            .value;
    double drift =
        banded_quad([&](double s) { return detail::eval_t(p, s, penv); }, t, t2, 1e-10).value;
    out.ts.push_back(t);
    out.values.push_back(inner - drift);
  }
  double first = out.values.front();
  double last = out.values.back();
  double swing = std::max(1e-8, 0.01 * std::abs(first));
  bool up = true, down = true;
  for (std::size_t i = 0; i + 1 < out.values.size(); ++i) {
    if (out.values[i + 1] < out.values[i] - 1e-12) up = false;
    if (out.values[i + 1] > out.values[i] + 1e-12) down = false;
  }
  if (up && last - first > swing) {
    out.trend = "increasing";
  } else if (down && first - last > swing) {
    out.trend = "decreasing";
  } else {
    out.trend = "stable";
  }
  return out;
}

}  // namespace uniqcert
