#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "uniqcert/calculus.hpp"
#include "uniqcert/cov.hpp"
#include "uniqcert/errors.hpp"
#include "uniqcert/expr.hpp"
#include "uniqcert/quadrature.hpp"

namespace uniqcert {

// Plane field (f1, f2) on a graph region, with a bounding box on which the
// crossed partials must be finite.
class FieldProblem {
 public:
  FieldProblem(Expr f1, Expr f2, GraphRegion D, double box_c, double box_d)
      : f1_(std::move(f1)), f2_(std::move(f2)), D_(std::move(D)), c_(box_c), d_(box_d) {
    if (!(c_ <= d_)) throw InvalidRangeError("FieldProblem box requires c <= d");
    Env env;
    for (int i = 0; i < kGridPoints; ++i) {
      double t = D_.a() + (D_.b() - D_.a()) * i / (kGridPoints - 1);
      env.set("t", t);
      double lo = eval(D_.phi(), env), hi = eval(D_.psi(), env);
      if (lo < c_ - kChainSlack || hi > d_ + kChainSlack) {
        throw InvalidRangeError("region leaves the box at t=" + detail::num_to_string(t));
      }
    }
    // crossed partials finite on a 65x65 subgrid of the box
    Env fe;
    for (int i = 0; i < kGridPoints; i += 4) {
      double t = D_.a() + (D_.b() - D_.a()) * i / (kGridPoints - 1);
      for (int j = 0; j < kGridPoints; j += 4) {
        double xv = c_ + (d_ - c_) * j / (kGridPoints - 1);
        fe.set("t", t).set("x", xv);
        partial(f1_, "x", fe);
        partial(f2_, "t", fe);
      }
    }
  }

  const Expr& f1() const { return f1_; }
  const Expr& f2() const { return f2_; }
  const GraphRegion& region() const { return D_; }

 private:
  Expr f1_, f2_;
  GraphRegion D_;
  double c_, d_;
};

// Signed boundary contributions: bottom graph, right vertical, top graph
// (negated), left vertical (negated); their sum is the circulation.
struct CirculationTerms {
  QuadResult bottom;
  QuadResult right;
  QuadResult top;
  QuadResult left;
};

namespace detail {

// int <(f1,f2), (1, g'(t))> dt along x = g(t), split at kinks of g.
inline QuadResult graph_flux(const Expr& f1, const Expr& f2, const Expr& g, double a, double b,
                             double tol) {
  std::vector<double> cuts = kink_abscissae(g, a, b);
  cuts.insert(cuts.begin(), a);
  cuts.push_back(b);
  double piece_tol = tol / static_cast<double>(cuts.size() - 1);
  QuadResult total;
  Env genv;
  Env fenv;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    QuadResult piece = adaptive_quad(
        [&](double t) {
          genv.set("t", t);
          double xv = eval(g, genv);
          double xp = partial(g, "t", genv);
          fenv.set("t", t).set("x", xv);
          return eval(f1, fenv) + eval(f2, fenv) * xp;
        },
        cuts[i], cuts[i + 1], piece_tol);
    total.value += piece.value;
    total.err_estimate += piece.err_estimate;
    total.evals += piece.evals;
    total.converged = total.converged && piece.converged;
  }
  return total;
}

inline QuadResult vertical_flux(const Expr& f2, double t, double from, double to, double tol) {
  Env env;
  env.set("t", t);
  return adaptive_quad(
      [&](double x) {
        env.set("x", x);
        return eval(f2, env);
      },
      from, to, tol);
}

}  // namespace detail

inline CirculationTerms circulation_terms(const FieldProblem& P, double tol = 1e-10) {
  const GraphRegion& D = P.region();
  Env env;
  auto at = [&](const Expr& e, double t) {
    env.set("t", t);
    return eval(e, env);
  };
  double term_tol = 0.25 * tol;
  CirculationTerms terms;
  terms.bottom = detail::graph_flux(P.f1(), P.f2(), D.phi(), D.a(), D.b(), term_tol);
  terms.right =
      detail::vertical_flux(P.f2(), D.b(), at(D.phi(), D.b()), at(D.psi(), D.b()), term_tol);
  terms.top = detail::graph_flux(P.f1(), P.f2(), D.psi(), D.a(), D.b(), term_tol);
  terms.top.value = -terms.top.value;
  terms.left =
      detail::vertical_flux(P.f2(), D.a(), at(D.phi(), D.a()), at(D.psi(), D.a()), term_tol);
  terms.left.value = -terms.left.value;
  return terms;
}

inline QuadResult circulation(const FieldProblem& P, double tol = 1e-10,
                              bool reversed_orientation = false) {
  CirculationTerms t = circulation_terms(P, tol);
  QuadResult out;
  out.value = ((t.bottom.value + t.right.value) + t.top.value) + t.left.value;
  if (reversed_orientation) out.value = -out.value;
  out.err_estimate =
      t.bottom.err_estimate + t.right.err_estimate + t.top.err_estimate + t.left.err_estimate;
  out.evals = t.bottom.evals + t.right.evals + t.top.evals + t.left.evals;
  out.converged = t.bottom.converged && t.right.converged && t.top.converged && t.left.converged;
  return out;
}

// int_D (df2/dt - df1/dx), both partials by AD.
inline QuadResult curl_integral(const FieldProblem& P, double tol = 1e-10) {
  const GraphRegion& D = P.region();
  double span = D.b() - D.a();
  double inner_tol = tol / (4.0 * span);
  Env benv;
  Env fenv;
  double max_inner_err = 0.0;
  bool inner_converged = true;
  std::size_t inner_evals = 0;
  QuadResult out = adaptive_quad(
      [&](double t) {
        benv.set("t", t);
        double lo = eval(D.phi(), benv);
        double hi = eval(D.psi(), benv);
        QuadResult inner = adaptive_quad(
            [&](double x) {
              fenv.set("t", t).set("x", x);
              return partial(P.f2(), "t", fenv) - partial(P.f1(), "x", fenv);
            },
            lo, hi, inner_tol);
        if (inner.err_estimate > max_inner_err) max_inner_err = inner.err_estimate;
        inner_converged = inner_converged && inner.converged;
        inner_evals += inner.evals;
        return inner.value;
      },
      D.a(), D.b(), tol);
  out.err_estimate += span * max_inner_err;
  out.converged = out.converged && inner_converged;
  out.evals += inner_evals;
  return out;
}

inline IdentityReport verify_green(const FieldProblem& P, double tol = 1e-10) {
  IdentityReport rep;
  rep.tol = tol;
  rep.lhs = circulation(P, tol);
  rep.rhs = curl_integral(P, tol);
  rep.residual = std::abs(rep.lhs.value - rep.rhs.value);
  rep.pass = rep.residual <= tol + rep.lhs.err_estimate + rep.rhs.err_estimate;
  return rep;
}

struct EquivalenceReport {
  IdentityReport green;    // circulation vs curl on the constructed region
  double recovered_lhs = 0.0;  // boundary terms minus curl, rearranged
  double direct_lhs = 0.0;
  double lhs_residual = 0.0;
  bool pass = false;
};

// The construction tying the substitution identity to the plane identity:
// region between the constant minimum of x(t) and the graph of x(t), field
// (0, f). The circulation equals the curl integral, and rearranging recovers
// the substitution identity's left side.
inline EquivalenceReport equivalence_check(const CovProblem& p, double tol = 1e-10) {
  Env env;
  auto X = [&](double t) {
    env.set("t", t);
    return eval(p.x(), env);
  };
  double best = X(p.a());
  double tbest = p.a();
  double step = (p.b() - p.a()) / (kGridPoints - 1);
  for (int i = 1; i < kGridPoints; ++i) {
    double t = p.a() + step * i;
    double v = X(t);
    if (v < best) {
      best = v;
      tbest = t;
    }
  }
  // golden-section refinement around the grid argmin
  double lo = std::max(p.a(), tbest - step);
  double hi = std::min(p.b(), tbest + step);
  const double gr = 0.6180339887498949;
  double c1 = hi - gr * (hi - lo), c2 = lo + gr * (hi - lo);
  double v1 = X(c1), v2 = X(c2);
  while (hi - lo > 1e-12) {
    if (v1 < v2) {
      hi = c2;
      c2 = c1;
      v2 = v1;
      c1 = hi - gr * (hi - lo);
      v1 = X(c1);
    } else {
      lo = c1;
      c1 = c2;
      v1 = v2;
      c2 = lo + gr * (hi - lo);
      v2 = X(c2);
    }
  }
  double floor_x = std::min({best, v1, v2});

  Expr phi;
  phi.root = make_constant(floor_x);
  phi.signature = p.x().signature;
  GraphRegion D(p.a(), p.b(), phi, p.x());
  Expr zero;
  zero.root = make_constant(0.0);
  zero.signature = p.f().signature;
  FieldProblem F(zero, p.f(), std::move(D), floor_x, p.d());

  CirculationTerms terms = circulation_terms(F, tol);
  QuadResult eqg1;
  eqg1.value = ((terms.bottom.value + terms.right.value) + terms.top.value) + terms.left.value;
  eqg1.err_estimate = terms.bottom.err_estimate + terms.right.err_estimate +
                      terms.top.err_estimate + terms.left.err_estimate;
  eqg1.evals = terms.bottom.evals + terms.right.evals + terms.top.evals + terms.left.evals;
  eqg1.converged = terms.bottom.converged && terms.right.converged && terms.top.converged &&
                   terms.left.converged;
  QuadResult eqg2 = curl_integral(F, tol);
  QuadResult direct = cov_lhs(p, tol);

  EquivalenceReport rep;
  rep.green.tol = tol;
  rep.green.lhs = eqg1;
  rep.green.rhs = eqg2;
  rep.green.residual = std::abs(eqg1.value - eqg2.value);
  rep.green.pass =
      rep.green.residual <= tol + eqg1.err_estimate + eqg2.err_estimate;
  rep.recovered_lhs = terms.right.value + terms.left.value - eqg2.value;
  rep.direct_lhs = direct.value;
  rep.lhs_residual = std::abs(rep.recovered_lhs - rep.direct_lhs);
  bool lhs_ok = rep.lhs_residual <= tol + terms.right.err_estimate + terms.left.err_estimate +
                                        eqg2.err_estimate + direct.err_estimate;
  rep.pass = rep.green.pass && lhs_ok;
  return rep;
}

}  // namespace uniqcert
