// Acceptance suite: ten end-to-end criteria over the bundled fixture corpus,
// the library, and the CLI binary. Prints one PASS/FAIL line per criterion
// and exits nonzero if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uniqcert/cov.hpp"
#include "uniqcert/green.hpp"
#include "uniqcert/odeprobe.hpp"
#include "uniqcert/uniqbound.hpp"

namespace {

using json = nlohmann::json;
using namespace uniqcert;

int failures = 0;

void report(int idx, bool ok, const char* name, const std::string& detail) {
  std::printf("%s %2d. %-28s %s\n", ok ? "PASS" : "FAIL", idx, name, detail.c_str());
  if (!ok) ++failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// fixtures of one kind, sorted by filename
std::vector<json> fixtures_of(const std::string& kind) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(UNIQCERT_FIXTURE_DIR)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<json> out;
  for (const auto& p : files) {
    std::ifstream f(p);
    json j = json::parse(f);
    if (j["kind"] == kind) out.push_back(std::move(j));
  }
  return out;
}

CovProblem cov_of(const json& j) {
  return CovProblem(parse(j["f"].get<std::string>()), parse(j["x"].get<std::string>(), {"t"}),
                    j["a"].get<double>(), j["b"].get<double>(), j["c"].get<double>(),
                    j["d"].get<double>());
}

// ---- 1. change-of-variables fixture suite ------------------------------

void criterion_1() {
  auto t0 = std::chrono::steady_clock::now();
  auto fixtures = fixtures_of("cov");
  double max_residual = 0.0;
  bool all_pass = true;
  bool autonomous = false, f_of_t_only = false, constant_path = false;
  for (const auto& j : fixtures) {
    Expr f = parse(j["f"].get<std::string>());
    Expr x = parse(j["x"].get<std::string>(), {"t"});
    if (!references(f, "t")) autonomous = true;
    if (!references(f, "x")) f_of_t_only = true;
    if (!references(x, "t")) constant_path = true;
    IdentityReport rep = verify_cov(cov_of(j), 1e-8, j.value("reversed", false));
    max_residual = std::max(max_residual, rep.residual);
    all_pass = all_pass && rep.pass && rep.residual <= 1e-8;
  }
  double secs = seconds_since(t0);
  bool ok = fixtures.size() >= 12 && all_pass && autonomous && f_of_t_only && constant_path &&
            secs < 1.0;
  report(1, ok, "substitution identity suite",
         fmt("%zu fixtures, max residual %.2e, degenerate regimes %d/3, %.2f s",
             fixtures.size(), max_residual, int(autonomous) + int(f_of_t_only) +
             int(constant_path), secs));
}

// ---- 2. circulation identity suite -------------------------------------

void criterion_2() {
  auto fixtures = fixtures_of("green");
  double max_residual = 0.0;
  bool all_pass = true, curved = false;
  double area_err = 1.0;
  for (const auto& j : fixtures) {
    Expr lower = parse(j["lower"].get<std::string>(), {"t"});
    Expr upper = parse(j["upper"].get<std::string>(), {"t"});
    GraphRegion D(j["a"].get<double>(), j["b"].get<double>(), lower, upper);
    FieldProblem P(parse(j["f1"].get<std::string>()), parse(j["f2"].get<std::string>()), D,
                   j["c"].get<double>(), j["d"].get<double>());
    IdentityReport rep = verify_green(P, 1e-8);
    max_residual = std::max(max_residual, rep.residual);
    all_pass = all_pass && rep.pass && rep.residual <= 1e-8;
    Env env;
    env.set("t", 0.5 * (D.a() + D.b()));
    if (std::abs(detail::second_partial(upper, "t", env)) > 1e-9) curved = true;
    // the area field integrates to the region area on both sides
    if (j["f1"] == "-x/2" && j["f2"] == "t/2" && j["upper"] == "1 - t^2") {
      double area = 4.0 / 3.0;
      area_err = std::max(std::abs(rep.lhs.value - area), std::abs(rep.rhs.value - area));
    }
  }

  // splitting the region at an interior line keeps both sides additive
  Expr f1 = parse("x^2"), f2 = parse("t*x"), lo = parse("0", {"t"}), hi = parse("1", {"t"});
  auto green_on = [&](double a, double b) {
    return verify_green(FieldProblem(f1, f2, GraphRegion(a, b, lo, hi), -0.2, 1.2), 1e-10);
  };
  IdentityReport whole = green_on(0.0, 2.0), left = green_on(0.0, 1.0), right = green_on(1.0, 2.0);
  double split_lhs = std::abs(whole.lhs.value - left.lhs.value - right.lhs.value);
  double split_rhs = std::abs(whole.rhs.value - left.rhs.value - right.rhs.value);

  bool ok = fixtures.size() >= 10 && all_pass && curved && area_err <= 1e-8 &&
            split_lhs <= 2e-10 && split_rhs <= 2e-10;
  report(2, ok, "circulation identity suite",
         fmt("%zu fixtures, max residual %.2e, area err %.2e, split gap %.2e",
             fixtures.size(), max_residual, area_err, std::max(split_lhs, split_rhs)));
}

// ---- 3. the two identities recover each other --------------------------

void criterion_3() {
  auto shared = fixtures_of("equivalence");
  auto cov_fixtures = fixtures_of("cov");
  auto is_shared = [&](const json& e) {
    for (const auto& c : cov_fixtures) {
      if (c["f"] == e["f"] && c["x"] == e["x"] && c["a"] == e["a"] && c["b"] == e["b"])
        return true;
    }
    return false;
  };
  double max_residual = 0.0;
  bool all_ok = !shared.empty();
  for (const auto& j : shared) {
    EquivalenceReport rep = equivalence_check(cov_of(j), 2e-8);
    max_residual = std::max(max_residual, rep.lhs_residual);
    all_ok = all_ok && rep.pass && rep.lhs_residual <= 2e-8 && is_shared(j);
  }
  report(3, all_ok, "identity equivalence",
         fmt("%zu shared fixtures, max recovered-side residual %.2e", shared.size(),
             max_residual));
}

// ---- 4. criteria ladder separations -------------------------------------

void criterion_4() {
  Verdict os_x = check_osgood(parse("x"), 1.0);
  Verdict os_sqrt = check_osgood(parse("sqrt(x)"), 1.0);
  Verdict vk_nagumo = check_van_kampen(parse("1/t"), parse("x"), 1.0);
  Verdict vk_shift = check_van_kampen(parse("(1+t)/t"), parse("x"), 1.0);
  Verdict ls = check_lasalle(parse("1/t"), parse("exp(x)-1"), 1.0, 1.0);
  Verdict co2 = check_corollary2(parse("exp(x)-1"), 1.0);
  bool ok = os_x.certified() && !os_sqrt.certified() && vk_nagumo.criterion == "nagumo" &&
            vk_shift.criterion == "van_kampen" && ls.tag == VerdictTag::Inconclusive &&
            co2.certified();
  report(4, ok, "criteria ladder",
         fmt("osgood %s/%s, van kampen %s/%s, separable %s vs taylor %s",
             to_string(os_x.tag), to_string(os_sqrt.tag), vk_nagumo.criterion.c_str(),
             vk_shift.criterion.c_str(), to_string(ls.tag), to_string(co2.tag)));
}

// ---- 5. refutation of the scaled borderline bound -----------------------

void criterion_5() {
  double max_residual = 0.0;
  bool refuted = true;
  for (double c : {1.25, 1.5, 2.0, 3.0}) {
    Verdict v = find_counterexample_witness(c, 1.0);
    refuted = refuted && v.tag == VerdictTag::Refuted;
    const double* r = v.metric("max_residual");
    max_residual = std::max(max_residual, r ? *r : 1.0);
  }
  // no checker certifies g = 2x/t: every decomposition fails some hypothesis
  bool none = !check_van_kampen(parse("2/t"), parse("x"), 1.0).certified() &&
              !check_montel_tonelli(parse("2/t"), parse("x"), 1.0, 1.0).certified() &&
              !check_lasalle(parse("2/t"), parse("x"), 1.0, 1.0).certified() &&
              !check_corollary1(parse("1"), parse("t"), 1.0, 1.0, 1.0).certified();
  bool ok = refuted && max_residual <= 1e-10 && none;
  report(5, ok, "witness refutation",
         fmt("max dynamic residual %.2e, doubled bound uncertified: %s", max_residual,
             none ? "yes" : "no"));
}

// ---- 6. piecewise flagship end-to-end ------------------------------------

void criterion_6() {
  auto t0 = std::chrono::steady_clock::now();
  IvpSpec ivp({parse("piecewise(ln(1+t^2)<abs(x), t, 0<t, (exp(abs(x))-1)/t, 0)")}, 0.0, {0.0},
              0.5, 0.5);
  BoundSpec bound(parse("1/t"), parse("exp(x)-1"), 0.5, 0.5);
  Verdict cert = check_corollary2(parse("exp(x)-1"), 0.5);
  Verdict kamke = check_kamke(ivp, bound, KamkeMode::SelfBound, cert);

  FunnelReport fun = funnel_probe(ivp, 0.5, default_funnel_deltas());
  bool shrinking = true;
  for (std::size_t i = 1; i < fun.spreads.size(); ++i)
    shrinking = shrinking && fun.spreads[i] < fun.spreads[i - 1];
  double secs = seconds_since(t0);
  bool ok = cert.certified() && kamke.certified() && kamke.criterion == "kamke" &&
            fun.deltas.back() == 1e-10 && shrinking && fun.spreads.back() < 1e-4 &&
            fun.fitted_order > 0.0 && secs < 5.0;
  report(6, ok, "piecewise flagship",
         fmt("%s via %s, funnel order %.3f, final spread %.2e, %.2f s", to_string(kamke.tag),
             kamke.reason.c_str(), fun.fitted_order, fun.spreads.back(), secs));
}

// ---- 7. non-uniqueness shows a non-vanishing funnel ----------------------

void criterion_7() {
  IvpSpec ivp({parse("2*sqrt(abs(x))")}, 0.0, {0.0}, 1.0, 5.0);
  FunnelReport fun = funnel_probe(ivp, 1.0, default_funnel_deltas());
  bool ok = fun.deltas.back() == 1e-10 && fun.spreads.back() >= 0.9 &&
            fun.fitted_order <= 0.05;
  report(7, ok, "non-uniqueness funnel",
         fmt("spread %.6f at delta 1e-10, fitted order %.2e", fun.spreads.back(),
             fun.fitted_order));
}

// ---- 8. integral bound sharpness -----------------------------------------

void criterion_8() {
  GronwallReport eq = gronwall_check(parse("0", {"t"}), parse("1", {"t"}), parse("exp(t)", {"t"}),
                                     0.0, 1.0, 1e-9);
  IvpSpec ivp({parse("x")}, 0.0, {1.0}, 1.0, 8.0);
  FunnelReport fun = funnel_probe(ivp, 1.0, default_funnel_deltas());
  bool enveloped = true;
  for (std::size_t i = 0; i < fun.deltas.size(); ++i)
    enveloped = enveloped && fun.spreads[i] <= fun.deltas[i] * std::exp(1.0) * 1.001;
  bool ok = eq.pass && std::abs(eq.min_margin) <= 1e-7 && enveloped;
  report(8, ok, "integral bound sharpness",
         fmt("equality margin %.2e, spreads within exp envelope: %s", eq.min_margin,
             enveloped ? "yes" : "no"));
}

// ---- 9. derivatives and quadrature against oracles -----------------------

// random smooth expression over t and x; depth-limited, exp arguments damped
std::string random_expr(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 8);
  std::uniform_real_distribution<double> num(-1.0, 1.0);
  switch (pick(rng)) {
    case 0: return "t";
    case 1: return "x";
    case 2: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", num(rng));
      return buf;
    }
    case 3: return "(" + random_expr(rng, depth - 1) + " + " + random_expr(rng, depth - 1) + ")";
    case 4: return "(" + random_expr(rng, depth - 1) + " - " + random_expr(rng, depth - 1) + ")";
    case 5: return "(" + random_expr(rng, depth - 1) + ")*(" + random_expr(rng, depth - 1) + ")";
    case 6: return "sin(" + random_expr(rng, depth - 1) + ")";
    case 7: return "cos(" + random_expr(rng, depth - 1) + ")";
    default: return "exp((" + random_expr(rng, depth - 1) + ")/4)";
  }
}

void criterion_9() {
  std::mt19937 rng(20260816u);
  std::uniform_real_distribution<double> point(-1.0, 1.0);
  int checked = 0;
  double max_rel = 0.0;
  while (checked < 100) {
    Expr e = parse(random_expr(rng, 4));
    Env env;
    env.set("t", point(rng)).set("x", point(rng));
    const double h = 1e-6;
    bool usable = true;
    for (const char* var : {"t", "x"}) {
      double ad = partial(e, var, env);
      if (std::abs(ad) < 1e-3) {  // too flat for a meaningful relative check
        usable = false;
        break;
      }
      double at = *env.find(var);
      Env lo = env, hi = env;
      lo.set(var, at - h);
      hi.set(var, at + h);
      double cd = (eval(e, hi) - eval(e, lo)) / (2.0 * h);
      max_rel = std::max(max_rel, std::abs(ad - cd) / std::abs(ad));
    }
    if (usable) ++checked;
  }

  struct Case {
    const char* f;
    double a, b, exact;
  };
  const double pi = 3.14159265358979323846;
  const Case cases[] = {
      {"4/(1+t^2)", 0.0, 1.0, pi},
      {"sin(t)", 0.0, pi, 2.0},
      {"exp(t)", 0.0, 1.0, std::exp(1.0) - 1.0},
      {"1/(1+t)", 0.0, 1.0, std::log(2.0)},
      {"t*ln(1+t)", 0.0, 1.0, 0.25},
      {"abs(t - 1/2)", 0.0, 1.0, 0.25},
  };
  double max_quad_err = 0.0;
  for (const auto& c : cases) {
    Expr e = parse(c.f, {"t"});
    Env env;
    QuadResult q = adaptive_quad(
        [&](double t) {
          env.set("t", t);
          return eval(e, env);
        },
        c.a, c.b, 1e-12);
    max_quad_err = std::max(max_quad_err, std::abs(q.value - c.exact));
  }
  bool ok = max_rel <= 1e-5 && max_quad_err <= 1e-10;
  report(9, ok, "derivative and quadrature oracles",
         fmt("100 random partials, max rel err %.2e; analytic integrals, max err %.2e",
             max_rel, max_quad_err));
}

// ---- 10. CLI fixture bundle ----------------------------------------------

std::pair<int, std::string> run_cli(const std::string& args) {
  std::string cmd = std::string("UNIQCERT_FIXTURE_DIR=\"") + UNIQCERT_FIXTURE_DIR + "\" \"" +
                    UNIQCERT_BIN + "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  int status = pclose(pipe);
  return {status == -1 ? -1 : WEXITSTATUS(status), std::move(out)};
}

bool envelope_valid(const json& env) {
  return env.is_object() && env.value("schema_version", 0) == 1 && env["tool"].is_string() &&
         env["tool_version"].is_string() && env["kind"].is_string() &&
         env["verdict"].is_string() && env["exit_code"].is_number_integer() &&
         env["payload"].is_object() && env["evidence"].is_object() &&
         env["wall_time_s"].is_number();
}

void criterion_10() {
  auto t0 = std::chrono::steady_clock::now();
  auto [code, out] = run_cli("fixtures --format json");
  double secs = seconds_since(t0);
  bool ok = code == 0;
  std::size_t total = 0;
  if (ok) {
    json env = json::parse(out, nullptr, false);
    total = env.is_discarded() ? 0 : env["payload"]["total"].get<std::size_t>();
    ok = !env.is_discarded() && envelope_valid(env) && env["payload"]["failed"] == 0;
  }
  auto [code1, out1] =
      run_cli(std::string("verify-cov --input ") + UNIQCERT_FIXTURE_DIR +
              "/cov_trig_path.json --format json");
  json rep = json::parse(out1, nullptr, false);
  ok = ok && code1 == 0 && !rep.is_discarded() && envelope_valid(rep) && secs < 30.0;
  report(10, ok, "CLI fixture bundle",
         fmt("exit %d, %zu fixtures, reports schema-valid: %s, %.2f s", code, total,
             ok ? "yes" : "no", secs));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  if (failures == 0) {
    std::printf("all 10 acceptance criteria hold\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", failures);
  return 1;
}
