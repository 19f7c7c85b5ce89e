#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "uniqcert/errors.hpp"
#include "uniqcert/expr.hpp"
#include "uniqcert/quadrature.hpp"
#include "uniqcert/threads.hpp"
#include "uniqcert/uniqbound.hpp"

namespace uniqcert {

struct Trajectory {
  std::vector<std::pair<double, std::vector<double>>> samples;
  std::size_t steps_accepted = 0;
  std::size_t steps_rejected = 0;
  double max_error_estimate = 0.0;
  bool shifted_start = false;  // right side singular at t0; first step taken from t0 + 1e-10*span

  const std::vector<double>& final_state() const { return samples.back().second; }
  double final_time() const { return samples.back().first; }
};

namespace detail {

// Dormand-Prince 4(5) coefficients
inline constexpr double kDpC[7] = {0.0,       1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0,
                                   8.0 / 9.0, 1.0,       1.0};
inline constexpr double kDpA[7][6] = {
    {},
    {1.0 / 5.0},
    {3.0 / 40.0, 9.0 / 40.0},
    {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
    {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
    {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0},
    {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0}};
inline constexpr double kDpB5[7] = {35.0 / 384.0,     0.0,  500.0 / 1113.0, 125.0 / 192.0,
                                    -2187.0 / 6784.0, 11.0 / 84.0, 0.0};
inline constexpr double kDpE[7] = {71.0 / 57600.0,       0.0,           -71.0 / 16695.0,
                                   71.0 / 1920.0,        -17253.0 / 339200.0,
                                   22.0 / 525.0,         -1.0 / 40.0};

inline Trajectory integrate_core(const IvpSpec& ivp, std::vector<double> x, double t_end,
                                 double rtol, double atol) {
  if (!(rtol > 0) || !(atol > 0)) throw InvalidRangeError("integrate needs rtol, atol > 0");
  double t0 = ivp.t0();
  double span = t_end - t0;
  if (!(span > 0)) throw InvalidRangeError("integrate runs forward: t_end > t0");
  if (t_end > t0 + ivp.a() + 1e-12 * ivp.a()) {
    throw InvalidRangeError("t_end outside the time box [t0, t0+a]");
  }
  std::size_t n = ivp.dim();
  for (std::size_t d = 0; d < n; ++d) {
    if (std::abs(x[d] - ivp.x0()[d]) > ivp.b() + kSlack) {
      throw BoxExitError("start state outside the space box", t0);
    }
  }

  Trajectory out;
  out.samples.emplace_back(t0, x);

  Env env;
  double t = t0;
  std::vector<double> k[7];
  for (auto& v : k) v.assign(n, 0.0);
  std::vector<double> stage(n), x5(n), errv(n);

  // probe the right side at the start; a singular t0 shifts the first step
  try {
    ivp.eval_f(t, x, k[0], env);
  } catch (const Error&) {
    t = t0 + 1e-10 * span;
    out.shifted_start = true;
    out.samples.emplace_back(t, x);
    ivp.eval_f(t, x, k[0], env);
  }

  double h = 1e-4 * span;
  double facold = 1e-4;
  while (t < t_end) {
    if (h < 1e-14 * span) {
      throw StepUnderflowError("step underflow", t);
    }
    if (t + h > t_end) h = t_end - t;

    for (int s = 1; s < 7; ++s) {
      for (std::size_t d = 0; d < n; ++d) {
        double acc = 0.0;
        for (int j = 0; j < s; ++j) acc += kDpA[s][j] * k[j][d];
        stage[d] = x[d] + h * acc;
      }
      ivp.eval_f(t + kDpC[s] * h, stage, k[s], env);
    }
    double err = 0.0;
    double est = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      double acc5 = 0.0, acce = 0.0;
      for (int j = 0; j < 7; ++j) {
        acc5 += kDpB5[j] * k[j][d];
        acce += kDpE[j] * k[j][d];
      }
      x5[d] = x[d] + h * acc5;
      double e = h * acce;
      double sc = atol + rtol * std::max(std::abs(x[d]), std::abs(x5[d]));
      err = std::max(err, std::abs(e) / sc);
      est = std::max(est, std::abs(e));
    }

    if (err <= 1.0) {
      t += h;
      x = x5;
      for (std::size_t d = 0; d < n; ++d) k[0][d] = k[6][d];  // FSAL
      ++out.steps_accepted;
      out.max_error_estimate = std::max(out.max_error_estimate, est);
      out.samples.emplace_back(t, x);
      for (std::size_t d = 0; d < n; ++d) {
        if (std::abs(x[d] - ivp.x0()[d]) > ivp.b() + kSlack) {
          throw BoxExitError("state left the box", t);
        }
      }
      // PI controller (safety 0.9, growth clamped to [0.2, 10])
      double fac;
      if (err == 0.0) {
        fac = 10.0;
      } else {
        fac = 0.9 * std::pow(err, -0.17) * std::pow(facold, 0.04);
        fac = std::min(10.0, std::max(0.2, fac));
      }
      facold = std::max(err, 1e-4);
      h *= fac;
    } else {
      ++out.steps_rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      // a rejected trial leaves k[0] (FSAL slot) valid: it still holds f(t, x)
    }
  }
  return out;
}

}  // namespace detail

// Adaptive embedded Runge-Kutta 4(5), local error per step <= atol + rtol*|state|.
inline Trajectory integrate_ivp(const IvpSpec& ivp, double t_end, double rtol, double atol) {
  return detail::integrate_core(ivp, ivp.x0(), t_end, rtol, atol);
}

struct FunnelReport {
  std::vector<double> deltas;
  std::vector<double> spreads;
  double fitted_order = 0.0;
};

inline std::vector<double> default_funnel_deltas() {
  std::vector<double> d;
  for (int k = 2; k <= 10; ++k) d.push_back(std::pow(10.0, -k));
  return d;
}

// Perturb x0 by +delta on every axis and measure the max-norm distance to the
// unperturbed run at t_end. fitted_order is the least-squares slope of
// log spread vs log delta over the last four deltas.
inline FunnelReport funnel_probe(const IvpSpec& ivp, double t_end, std::vector<double> deltas,
                                 double rtol = 1e-11, double atol = 1e-13) {
  if (deltas.empty()) throw InvalidRangeError("funnel_probe needs at least one delta");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0)) throw InvalidRangeError("funnel deltas must be positive");
    if (i > 0 && !(deltas[i] < deltas[i - 1])) {
      throw InvalidRangeError("funnel deltas must be strictly decreasing");
    }
    if (deltas[i] > ivp.b()) throw InvalidRangeError("perturbed start outside the box");
  }

  Trajectory base = detail::integrate_core(ivp, ivp.x0(), t_end, rtol, atol);
  const std::vector<double>& ref = base.final_state();

  FunnelReport out;
  out.deltas = deltas;
  out.spreads.assign(deltas.size(), 0.0);
  parallel_for(deltas.size(), [&](std::size_t i) {
    std::vector<double> start = ivp.x0();
    for (double& v : start) v += deltas[i];
    Trajectory run = detail::integrate_core(ivp, std::move(start), t_end, rtol, atol);
    double spread = 0.0;
    for (std::size_t d = 0; d < ivp.dim(); ++d) {
      spread = std::max(spread, std::abs(run.final_state()[d] - ref[d]));
    }
    out.spreads[i] = spread;
  });

  std::size_t tail = std::min<std::size_t>(4, deltas.size());
  std::size_t from = deltas.size() - tail;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = from; i < deltas.size(); ++i) {
    mx += std::log(deltas[i]);
    my += std::log(std::max(out.spreads[i], 1e-300));
  }
  mx /= tail;
  my /= tail;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = from; i < deltas.size(); ++i) {
    double dx = std::log(deltas[i]) - mx;
    sxy += dx * (std::log(std::max(out.spreads[i], 1e-300)) - my);
    sxx += dx * dx;
  }
  out.fitted_order = sxx > 0 ? sxy / sxx : 0.0;
  return out;
}

// Max residual |witness'(t) - g(t, witness(t))| on a 257-grid of (0,a];
// witness' by forward-mode differentiation. Also asserts witness(t)/t -> 0
// along t = a*10^-k (throws HypothesisViolatedError when it does not vanish).
inline double verify_witness_dynamics(const Expr& g, const Expr& witness, double a) {
  if (!(a > 0)) throw InvalidRangeError("verify_witness_dynamics requires a > 0");
  Env wenv;
  wenv.set("t", 0.0);
  if (std::abs(eval(witness, wenv)) > kSlack) {
    throw InvalidRangeError("witness(0) != 0");
  }
  double r_first = 0.0, r_last = 0.0;
  for (int k = 1; k <= 12; ++k) {
    double t = a * std::pow(10.0, -k);
    wenv.set("t", t);
    double r = std::abs(eval(witness, wenv)) / t;
    if (k == 1) r_first = r;
    r_last = r;
  }
  if (r_last > std::max(1e-8, 0.1 * r_first)) {
    throw HypothesisViolatedError("witness(t)/t does not vanish as t -> 0", 0.0);
  }
  Env genv;
  double residual = 0.0;
  for (int i = 1; i < kGridPoints; ++i) {
    double t = a * i / (kGridPoints - 1);
    wenv.set("t", t);
    double w = eval(witness, wenv);
    double wprime = partial(witness, "t", wenv);
    genv.set("t", t).set("x", w);
    residual = std::max(residual, std::abs(wprime - eval(g, genv)));
  }
  return residual;
}

// bound(t) = phi0*exp(B(t)) + int_{t0}^t alpha(s)*exp(B(t)-B(s)) ds with
// B(t) = int_{t0}^t beta, evaluated at grid_n uniform points. B and the
// alpha*exp(-B) integral accumulate once as prefix tables over the grid cells.
inline std::vector<std::pair<double, double>> gronwall_bound(const Expr& alpha, const Expr& beta,
                                                             double phi0, double t0, double a,
                                                             int grid_n) {
  if (!(a > 0) || grid_n < 2) throw InvalidRangeError("gronwall_bound requires a > 0, grid_n >= 2");
  Env aenv;
  Env benv;
  auto beta_at = [&](double s) { return detail::eval_t(beta, s, benv); };
  std::vector<std::pair<double, double>> out(grid_n);
  double B = 0.0;
  double C = 0.0;  // int_{t0}^{t} alpha(s)*exp(-B(s)) ds
  out[0] = {t0, phi0};
  for (int i = 1; i < grid_n; ++i) {
    double lo = t0 + a * (i - 1) / (grid_n - 1);
    double hi = t0 + a * i / (grid_n - 1);
    double b_cell = B;
    Env ienv;
    C += adaptive_quad(
             [&](double s) {
               double bs = b_cell + adaptive_quad(beta_at, lo, s, 1e-13).value;
               return detail::eval_t(alpha, s, aenv) * std::exp(-bs);
             },
             lo, hi, 1e-12)
             .value;
    B += adaptive_quad(beta_at, lo, hi, 1e-12).value;
    out[i] = {hi, std::exp(B) * (phi0 + C)};
  }
  return out;
}

struct GronwallReport {
  std::vector<double> grid;
  std::vector<double> phi;
  std::vector<double> bound;
  double min_margin = 0.0;
  bool pass = false;
};

// First validates phi'(t) <= alpha(t) + beta(t)*phi(t) on the grid (phi' by
// forward-mode differentiation), then asserts phi <= bound + tol pointwise.
inline GronwallReport gronwall_check(const Expr& alpha, const Expr& beta, const Expr& phi,
                                     double t0, double a, double tol) {
  if (!(a > 0) || !(tol > 0)) throw InvalidRangeError("gronwall_check requires a > 0, tol > 0");
  const int n = kGridPoints;
  Env env;
  GronwallReport out;
  out.grid.resize(n);
  out.phi.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = t0 + a * i / (n - 1);
    out.grid[i] = t;
    env.set("t", t).set("s", t);
    double ph = eval(phi, env);
    out.phi[i] = ph;
    double rhs = detail::eval_t(alpha, t, env) + detail::eval_t(beta, t, env) * ph;
    env.set("t", t).set("s", t);
    double dph = partial(phi, "t", env);
    if (dph > rhs + 1e-9 * (1.0 + std::abs(rhs))) {
      throw HypothesisViolatedError("phi' > alpha + beta*phi", t);
    }
  }
  auto table = gronwall_bound(alpha, beta, out.phi[0], t0, a, n);
  out.bound.resize(n);
  out.min_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    out.bound[i] = table[i].second;
    out.min_margin = std::min(out.min_margin, out.bound[i] - out.phi[i]);
  }
  out.pass = out.min_margin >= -tol;
  return out;
}

}  // namespace uniqcert
