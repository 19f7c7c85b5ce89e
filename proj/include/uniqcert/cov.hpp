#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "uniqcert/calculus.hpp"
#include "uniqcert/errors.hpp"
#include "uniqcert/expr.hpp"
#include "uniqcert/quadrature.hpp"

namespace uniqcert {

namespace detail {

// f as a function of (t, second argument); x and r both name the second
// argument so fixtures may use either spelling.
inline double eval_f2(const Expr& f, double t, double second, Env& env) {
  env.set("t", t).set("x", second).set("r", second);
  return eval(f, env);
}

inline double partial_t_f2(const Expr& f, double t, double second, Env& env) {
  env.set("t", t).set("x", second).set("r", second);
  return partial(f, "t", env);
}

inline void collect_switches(const NodePtr& n, std::vector<NodePtr>& out) {
  if (n->kind == NodeKind::Call) {
    if (n->name == "abs") out.push_back(n->kids[0]);
    if (n->name == "min" || n->name == "max") {
      out.push_back(make_node(NodeKind::Sub, {n->kids[0], n->kids[1]}));
    }
  }
  if (n->kind == NodeKind::Piecewise) {
    for (std::size_t i = 0; i + 1 < n->kids.size(); i += 2) {
      const NodePtr& cond = n->kids[i];
      out.push_back(make_node(NodeKind::Sub, {cond->kids[0], cond->kids[1]}));
    }
  }
  for (const auto& k : n->kids) collect_switches(k, out);
}

}  // namespace detail

// Interior abscissae where abs/min/max arguments or piecewise conditions of
// x(t) change sign: the places a Lipschitz x(t) can fail to be C1. Found by a
// sign scan on the 257-grid plus bisection.
inline std::vector<double> kink_abscissae(const Expr& x, double a, double b) {
  std::vector<NodePtr> switches;
  detail::collect_switches(x.root, switches);
  if (switches.empty()) return {};

  double span = b - a;
  std::vector<double> roots;
  Env env;
  for (const NodePtr& sw : switches) {
    Expr s;
    s.root = sw;
    s.signature = x.signature;
    auto val = [&](double t) {
      env.set("t", t);
      return eval(s, env);
    };
    double prev = val(a);
    for (int i = 1; i < kGridPoints; ++i) {
      double t = a + span * i / (kGridPoints - 1);
      double cur = val(t);
      if (prev == 0.0) {
        roots.push_back(a + span * (i - 1) / (kGridPoints - 1));
      } else if (prev * cur < 0.0) {
        double lo = a + span * (i - 1) / (kGridPoints - 1), hi = t;
        double flo = prev;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * span; ++it) {
          double mid = 0.5 * (lo + hi);
          double fm = val(mid);
          if (fm == 0.0) {
            lo = hi = mid;
            break;
          }
          if (flo * fm < 0.0) {
            hi = mid;
          } else {
            lo = mid;
            flo = fm;
          }
        }
        roots.push_back(0.5 * (lo + hi));
      }
      prev = cur;
    }
  }
  std::sort(roots.begin(), roots.end());
  std::vector<double> out;
  for (double r : roots) {
    if (r <= a + 1e-12 * span || r >= b - 1e-12 * span) continue;
    if (!out.empty() && r - out.back() < 1e-12 * span) continue;
    out.push_back(r);
  }
  return out;
}

// The change-of-variables problem: f(t,x) with a C1 (or piecewise-C1)
// substitution x(t) on [a,b] whose range stays inside [c,d].
class CovProblem {
 public:
  CovProblem(Expr f, Expr x_path, double a, double b, double c, double d)
      : f_(std::move(f)), x_(std::move(x_path)), a_(a), b_(b), c_(c), d_(d) {
    if (!(a < b)) throw InvalidRangeError("CovProblem requires a < b");
    if (!(c <= d)) throw InvalidRangeError("CovProblem requires c <= d");
    Env env;
    for (int i = 0; i < kGridPoints; ++i) {
      double t = a + (b - a) * i / (kGridPoints - 1);
      env.set("t", t);
      double xv = eval(x_, env);
      if (xv < c - kChainSlack || xv > d + kChainSlack) {
        throw InvalidRangeError("x(t) leaves [c,d] at t=" + detail::num_to_string(t));
      }
    }
    // finiteness scan of f and df/dt on a 65x65 subgrid of the box
    Env fe;
    for (int i = 0; i < kGridPoints; i += 4) {
      double t = a + (b - a) * i / (kGridPoints - 1);
      for (int j = 0; j < kGridPoints; j += 4) {
        double xv = c + (d - c) * j / (kGridPoints - 1);
        detail::eval_f2(f_, t, xv, fe);
        detail::partial_t_f2(f_, t, xv, fe);
      }
    }
  }

  const Expr& f() const { return f_; }
  const Expr& x() const { return x_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }
  double d() const { return d_; }

  double x_at(double t) const {
    Env env;
    env.set("t", t);
    return eval(x_, env);
  }

 private:
  Expr f_, x_;
  double a_, b_, c_, d_;
};

struct IdentityReport {
  QuadResult lhs;
  QuadResult rhs;
  double residual = 0.0;
  bool pass = false;
  double tol = 0.0;
};

// int_a^b f(t, x(t)) x'(t) dt, split at the kinks of x. With reversed=true
// the sweep runs b -> a.
inline QuadResult cov_lhs(const CovProblem& p, double tol = 1e-10, bool reversed = false) {
  std::vector<double> cuts = kink_abscissae(p.x(), p.a(), p.b());
  cuts.insert(cuts.begin(), p.a());
  cuts.push_back(p.b());
  double piece_tol = tol / static_cast<double>(cuts.size() - 1);
  QuadResult total;
  Env env;
  Env fenv;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double lo = cuts[i], hi = cuts[i + 1];
    if (reversed) std::swap(lo, hi);
    QuadResult piece = adaptive_quad(
        [&](double t) {
          env.set("t", t);
          double xv = eval(p.x(), env);
          double xp = partial(p.x(), "t", env);
          return detail::eval_f2(p.f(), t, xv, fenv) * xp;
        },
        lo, hi, piece_tol);
    total.value += piece.value;
    total.err_estimate += piece.err_estimate;
    total.evals += piece.evals;
    total.converged = total.converged && piece.converged;
  }
  return total;
}

// int_{x(a)}^{x(b)} f(b,r) dr - int_a^b ( int_{x(a)}^{x(t)} df/dt (t,r) dr ) dt,
// the time partial taken by AD, inner limits signed. With reversed=true the
// roles of a and b swap (the sweep starts at b, the boundary slice sits at a).
inline QuadResult cov_rhs(const CovProblem& p, double tol = 1e-10, bool reversed = false) {
  double t_from = reversed ? p.b() : p.a();
  double t_to = reversed ? p.a() : p.b();
  double x_from = p.x_at(t_from);
  double x_to = p.x_at(t_to);

  Env fenv;
  QuadResult boundary = adaptive_quad(
      [&](double r) { return detail::eval_f2(p.f(), t_to, r, fenv); }, x_from, x_to, 0.5 * tol);

  double span = p.b() - p.a();
  double inner_tol = 0.5 * tol / (4.0 * span);
  std::vector<double> cuts = kink_abscissae(p.x(), p.a(), p.b());
  cuts.insert(cuts.begin(), p.a());
  cuts.push_back(p.b());
  double piece_tol = 0.5 * tol / static_cast<double>(cuts.size() - 1);

  Env xenv;
  Env ienv;
  double max_inner_err = 0.0;
  bool inner_converged = true;
  std::size_t inner_evals = 0;
  QuadResult sweep;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double lo = cuts[i], hi = cuts[i + 1];
    if (reversed) std::swap(lo, hi);
    QuadResult piece = adaptive_quad(
        [&](double t) {
          xenv.set("t", t);
          double xt = eval(p.x(), xenv);
          QuadResult inner = adaptive_quad(
              [&](double r) { return detail::partial_t_f2(p.f(), t, r, ienv); }, x_from, xt,
              inner_tol);
          if (inner.err_estimate > max_inner_err) max_inner_err = inner.err_estimate;
          inner_converged = inner_converged && inner.converged;
          inner_evals += inner.evals;
          return inner.value;
        },
        lo, hi, piece_tol);
    sweep.value += piece.value;
    sweep.err_estimate += piece.err_estimate;
    sweep.evals += piece.evals;
    sweep.converged = sweep.converged && piece.converged;
  }

  QuadResult out;
  out.value = boundary.value - sweep.value;
  out.err_estimate = boundary.err_estimate + sweep.err_estimate + span * max_inner_err;
  out.evals = boundary.evals + sweep.evals + inner_evals;
  out.converged = boundary.converged && sweep.converged && inner_converged;
  return out;
}

inline IdentityReport verify_cov(const CovProblem& p, double tol = 1e-10,
                                 bool reversed = false) {
  IdentityReport rep;
  rep.tol = tol;
  rep.lhs = cov_lhs(p, tol, reversed);
  rep.rhs = cov_rhs(p, tol, reversed);
  rep.residual = std::abs(rep.lhs.value - rep.rhs.value);
  rep.pass = rep.residual <= tol + rep.lhs.err_estimate + rep.rhs.err_estimate;
  return rep;
}

// Residual of d/dt int_{x1(t)}^{x2(t)} f(t,r) dr against the expanded rule
// f(t,x2)x2' - f(t,x1)x1' + int_{x1}^{x2} df/dt; centered difference in t.
inline double leibniz_check(const Expr& f, const Expr& x1, const Expr& x2, double t,
                            double h = 1e-4) {
  Env xe;
  Env fe;
  auto limit = [&](const Expr& xexpr, double tv) {
    xe.set("t", tv);
    return eval(xexpr, xe);
  };
  auto G = [&](double tv) {
    return adaptive_quad([&](double r) { return detail::eval_f2(f, tv, r, fe); },
                         limit(x1, tv), limit(x2, tv), 1e-12)
        .value;
  };
  double diff = (G(t + h) - G(t - h)) / (2.0 * h);

  Env et;
  et.set("t", t);
  double x1v = eval(x1, et), x1p = partial(x1, "t", et);
  double x2v = eval(x2, et), x2p = partial(x2, "t", et);
  double boundary =
      detail::eval_f2(f, t, x2v, fe) * x2p - detail::eval_f2(f, t, x1v, fe) * x1p;
  double inner =
      adaptive_quad([&](double r) { return detail::partial_t_f2(f, t, r, fe); }, x1v, x2v, 1e-12)
          .value;
  return std::abs(diff - (boundary + inner));
}

}  // namespace uniqcert
