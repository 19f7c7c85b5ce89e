#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "uniqcert/errors.hpp"
#include "uniqcert/expr.hpp"
#include "uniqcert/quadrature.hpp"

namespace uniqcert {

inline constexpr int kGridPoints = 257;
inline constexpr double kChainSlack = 1e-12;

// D = { (t,x) : a <= t <= b, phi(t) <= x <= psi(t) }.
// phi <= psi is enforced on the uniform 257-point grid at construction.
class GraphRegion {
 public:
  GraphRegion(double a, double b, Expr phi, Expr psi)
      : a_(a), b_(b), phi_(std::move(phi)), psi_(std::move(psi)) {
    if (!(a < b)) throw InvalidRangeError("GraphRegion requires a < b");
    Env env;
    for (int i = 0; i < kGridPoints; ++i) {
      double t = a + (b - a) * i / (kGridPoints - 1);
      env.set("t", t);
      double lo = eval(phi_, env);
      double hi = eval(psi_, env);
      if (lo > hi + kChainSlack) {
        throw InvalidRangeError("GraphRegion requires phi <= psi on [a,b]; violated at t=" +
                                detail::num_to_string(t));
      }
    }
  }

  double a() const { return a_; }
  double b() const { return b_; }
  const Expr& phi() const { return phi_; }
  const Expr& psi() const { return psi_; }

 private:
  double a_, b_;
  Expr phi_, psi_;
};

struct Segment {
  enum class Kind { Graph, Vertical };
  Kind kind;
  Expr x;             // Graph: x(t), t runs from a to b
  double a = 0.0, b = 0.0;
  double t = 0.0, c = 0.0, d = 0.0;  // Vertical: x runs from c to d at fixed t
  bool reversed = false;
};

inline Segment graph_segment(Expr x, double a, double b) {
  return {Segment::Kind::Graph, std::move(x), a, b, 0.0, 0.0, 0.0, false};
}

inline Segment vertical_segment(double t, double c, double d) {
  Expr none;
  none.root = make_constant(0.0);
  return {Segment::Kind::Vertical, std::move(none), 0.0, 0.0, t, c, d, false};
}

inline Segment reversed(Segment s) {
  s.reversed = !s.reversed;
  return s;
}

namespace detail {

inline std::pair<double, double> segment_start(const Segment& s);
inline std::pair<double, double> segment_end(const Segment& s);

inline std::pair<double, double> forward_start(const Segment& s) {
  if (s.kind == Segment::Kind::Graph) {
    Env env;
    env.set("t", s.a);
    return {s.a, eval(s.x, env)};
  }
  return {s.t, s.c};
}

inline std::pair<double, double> forward_end(const Segment& s) {
  if (s.kind == Segment::Kind::Graph) {
    Env env;
    env.set("t", s.b);
    return {s.b, eval(s.x, env)};
  }
  return {s.t, s.d};
}

inline std::pair<double, double> segment_start(const Segment& s) {
  return s.reversed ? forward_end(s) : forward_start(s);
}

inline std::pair<double, double> segment_end(const Segment& s) {
  return s.reversed ? forward_start(s) : forward_end(s);
}

inline bool near(std::pair<double, double> p, std::pair<double, double> q) {
  return std::abs(p.first - q.first) <= kChainSlack &&
         std::abs(p.second - q.second) <= kChainSlack;
}

}  // namespace detail

// Piecewise path of graph and vertical segments; consecutive segments must
// share endpoints within 1e-12.
class Path2 {
 public:
  explicit Path2(std::vector<Segment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw InvalidRangeError("Path2 requires at least one segment");
    for (std::size_t i = 0; i + 1 < segments_.size(); ++i) {
      if (!detail::near(detail::segment_end(segments_[i]), detail::segment_start(segments_[i + 1]))) {
        throw InvalidRangeError("Path2 segments " + detail::num_to_string(double(i)) + " and " +
                                detail::num_to_string(double(i + 1)) + " do not chain");
      }
    }
  }

  const std::vector<Segment>& segments() const { return segments_; }

  bool closed() const {
    return detail::near(detail::segment_end(segments_.back()),
                        detail::segment_start(segments_.front()));
  }

 private:
  std::vector<Segment> segments_;
};

// Nested quadrature over a graph region; inner tolerance tol/(4(b-a)).
inline QuadResult integrate_region(const Expr& h, const GraphRegion& D, double tol = 1e-10) {
  double span = D.b() - D.a();
  double inner_tol = tol / (4.0 * span);
  Env outer_env;
  Env inner_env;
  double max_inner_err = 0.0;
  bool inner_converged = true;
  std::size_t inner_evals = 0;
  auto g = [&](double t) {
    outer_env.set("t", t);
    double lo = eval(D.phi(), outer_env);
    double hi = eval(D.psi(), outer_env);
    inner_env.set("t", t);
    QuadResult inner = adaptive_quad(
        [&](double x) {
          inner_env.set("x", x);
          return eval(h, inner_env);
        },
        lo, hi, inner_tol);
    if (inner.err_estimate > max_inner_err) max_inner_err = inner.err_estimate;
    inner_converged = inner_converged && inner.converged;
    inner_evals += inner.evals;
    return inner.value;
  };
  QuadResult out = adaptive_quad(g, D.a(), D.b(), tol);
  out.err_estimate += span * max_inner_err;
  out.converged = out.converged && inner_converged;
  out.evals += inner_evals;
  return out;
}

// Line integral of F = (f1, f2) over the path. Graph segments integrate
// <F(t, x(t)), (1, x'(t))> dt with x' by AD; vertical segments integrate the
// second component in x; reversal negates the forward value.
inline QuadResult line_integral(const Expr& f1, const Expr& f2, const Path2& path,
                                double tol = 1e-10, bool require_closed = false) {
  if (require_closed && !path.closed()) {
    throw OpenPathError("circulation requires a closed path");
  }
  double seg_tol = tol / static_cast<double>(path.segments().size());
  QuadResult total;
  for (const Segment& s : path.segments()) {
    QuadResult part;
    if (s.kind == Segment::Kind::Graph) {
      Env env;
      part = adaptive_quad(
          [&](double t) {
            env.set("t", t);
            double xv = eval(s.x, env);
            double xp = partial(s.x, "t", env);
            env.set("x", xv);
            return eval(f1, env) + eval(f2, env) * xp;
          },
          s.a, s.b, seg_tol);
    } else {
      Env env;
      env.set("t", s.t);
      part = adaptive_quad(
          [&](double x) {
            env.set("x", x);
            return eval(f2, env);
          },
          s.c, s.d, seg_tol);
    }
    total.value += s.reversed ? -part.value : part.value;
    total.err_estimate += part.err_estimate;
    total.evals += part.evals;
    total.converged = total.converged && part.converged;
  }
  return total;
}

}  // namespace uniqcert
