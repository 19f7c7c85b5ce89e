// uniqcert: command-line front end over the header library. Each subcommand
// reads a JSON problem description (or inline flags), runs the corresponding
// check, and emits a single report — text or JSON — in one atomic write.
//
// Exit codes: 0 pass/Certified, 1 fail/Refuted, 2 Inconclusive,
//             64 usage error, 65 unreadable or invalid input.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uniqcert/cov.hpp"
#include "uniqcert/green.hpp"
#include "uniqcert/odeprobe.hpp"
#include "uniqcert/uniqbound.hpp"
#include "uniqcert/version.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace uniqcert;

// Anything wrong with the problem description (unreadable file, bad JSON,
// missing fields, malformed DSL, values the library rejects). Exit 65.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- field access -----------------------------------------------------

const json& need(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw InputError(std::string("missing field \"") + key + "\"");
  return *it;
}

double need_num(const json& j, const char* key) {
  const json& v = need(j, key);
  if (!v.is_number()) throw InputError(std::string("field \"") + key + "\" must be a number");
  return v.get<double>();
}

double opt_num(const json& j, const char* key, double dflt) {
  return j.contains(key) ? need_num(j, key) : dflt;
}

std::string need_str(const json& j, const char* key) {
  const json& v = need(j, key);
  if (!v.is_string()) throw InputError(std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

bool opt_bool(const json& j, const char* key, bool dflt) {
  if (!j.contains(key)) return dflt;
  const json& v = j[key];
  if (!v.is_boolean()) throw InputError(std::string("field \"") + key + "\" must be a boolean");
  return v.get<bool>();
}

// Parses a DSL field; a syntax error is reported with the byte offset plus
// the offending source line and a caret under the bad byte.
Expr expr_from(const std::string& src, const char* key, std::vector<std::string> sig) {
  try {
    return parse(src, std::move(sig));
  } catch (const SyntaxError& e) {
    std::string msg = std::string("field \"") + key + "\": " + e.what();
    msg += "\n  " + src + "\n  " + std::string(std::min(e.offset(), src.size()), ' ') + "^";
    throw InputError(msg);
  }
}

Expr need_expr(const json& j, const char* key,
               std::vector<std::string> sig = {"t", "x", "s", "r"}) {
  return expr_from(need_str(j, key), key, std::move(sig));
}

// ---- report assembly --------------------------------------------------

struct RunResult {
  int exit_code = 0;
  std::string verdict;
  json payload = json::object();
  json evidence = json::object();
  std::string csv;  // non-empty only for series kinds (funnel, gronwall)
};

json quad_json(const QuadResult& q) {
  return {{"value", q.value},
          {"err_estimate", q.err_estimate},
          {"evals", q.evals},
          {"converged", q.converged}};
}

RunResult from_identity(const IdentityReport& rep, json payload) {
  RunResult r;
  r.exit_code = rep.pass ? 0 : 1;
  r.verdict = rep.pass ? "pass" : "fail";
  r.payload = std::move(payload);
  r.payload["residual"] = rep.residual;
  r.payload["tol"] = rep.tol;
  r.evidence = {{"lhs_quad", quad_json(rep.lhs)}, {"rhs_quad", quad_json(rep.rhs)}};
  return r;
}

RunResult from_verdict(const Verdict& v) {
  RunResult r;
  r.exit_code = v.tag == VerdictTag::Certified ? 0 : v.tag == VerdictTag::Refuted ? 1 : 2;
  r.verdict = to_string(v.tag);
  if (!v.criterion.empty()) r.payload["criterion"] = v.criterion;
  if (!v.reason.empty()) r.payload["reason"] = v.reason;
  if (!v.witness.empty()) r.payload["witness"] = v.witness;
  if (!v.grid.empty()) r.evidence["grid"] = v.grid;
  if (!v.partials.empty()) r.evidence["partials"] = v.partials;
  if (!v.metrics.empty()) {
    json m = json::object();
    for (const auto& [name, value] : v.metrics) m[name] = value;
    r.evidence["metrics"] = m;
  }
  return r;
}

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c)
    out += (c ? "," : "") + header[c];
  out += "\n";
  char buf[64];
  for (std::size_t i = 0; i < columns.front().size(); ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", columns[c][i]);
      out += (c ? "," : "") + std::string(buf);
    }
    out += "\n";
  }
  return out;
}

// ---- per-kind runners -------------------------------------------------

CovProblem cov_from_json(const json& in) {
  return CovProblem(need_expr(in, "f"), need_expr(in, "x", {"t"}), need_num(in, "a"),
                    need_num(in, "b"), need_num(in, "c"), need_num(in, "d"));
}

RunResult run_cov(const json& in) {
  CovProblem P = cov_from_json(in);
  IdentityReport rep = verify_cov(P, opt_num(in, "tol", 1e-8), opt_bool(in, "reversed", false));
  return from_identity(rep, {{"lhs", rep.lhs.value}, {"rhs", rep.rhs.value}});
}

RunResult run_green(const json& in) {
  GraphRegion D(need_num(in, "a"), need_num(in, "b"), need_expr(in, "lower", {"t"}),
                need_expr(in, "upper", {"t"}));
  FieldProblem P(need_expr(in, "f1"), need_expr(in, "f2"), D, need_num(in, "c"),
                 need_num(in, "d"));
  IdentityReport rep = verify_green(P, opt_num(in, "tol", 1e-8));
  return from_identity(rep, {{"circulation", rep.lhs.value}, {"curl_integral", rep.rhs.value}});
}

RunResult run_equivalence(const json& in) {
  CovProblem P = cov_from_json(in);
  EquivalenceReport rep = equivalence_check(P, opt_num(in, "tol", 2e-8));
  RunResult r;
  r.exit_code = rep.pass ? 0 : 1;
  r.verdict = rep.pass ? "pass" : "fail";
  r.payload = {{"direct_lhs", rep.direct_lhs},
               {"recovered_lhs", rep.recovered_lhs},
               {"lhs_residual", rep.lhs_residual},
               {"green_residual", rep.green.residual},
               {"tol", rep.green.tol}};
  r.evidence = {{"green_lhs_quad", quad_json(rep.green.lhs)},
                {"green_rhs_quad", quad_json(rep.green.rhs)}};
  return r;
}

Verdict uniqueness_verdict(const json& in) {
  std::string crit = need_str(in, "criterion");
  if (crit == "osgood") return check_osgood(need_expr(in, "psi"), need_num(in, "b"));
  if (crit == "montel_tonelli")
    return check_montel_tonelli(need_expr(in, "p"), need_expr(in, "psi"), need_num(in, "a"),
                                need_num(in, "b"));
  if (crit == "van_kampen")
    return check_van_kampen(need_expr(in, "p"), need_expr(in, "psi"), need_num(in, "a"));
  if (crit == "lasalle")
    return check_lasalle(need_expr(in, "p"), need_expr(in, "psi"), need_num(in, "a"),
                         need_num(in, "b"));
  if (crit == "co1")
    return check_corollary1(need_expr(in, "q1"), need_expr(in, "q2"), need_num(in, "gamma"),
                            need_num(in, "a"), need_num(in, "b"));
  if (crit == "co2") return check_corollary2(need_expr(in, "phi"), need_num(in, "b"));
  throw InputError("unknown criterion \"" + crit +
                   "\" (expected osgood|montel_tonelli|van_kampen|lasalle|co1|co2)");
}

RunResult run_uniqueness(const json& in) { return from_verdict(uniqueness_verdict(in)); }

RunResult run_witness(const json& in) {
  double c = need_num(in, "c");
  double a = need_num(in, "a");
  Verdict v = find_counterexample_witness(c, a);
  RunResult r = from_verdict(v);
  Expr g = parse(detail::num_to_string(c) + "*x/t");
  Expr w = parse(v.witness, {"t"});
  r.evidence["dynamics_residual"] = verify_witness_dynamics(g, w, a);
  return r;
}

// Scalar problems pass f as one string (variables t, x); systems pass an
// array of n strings over t, x1..xn with a matching x0 array.
IvpSpec ivp_from_json(const json& in) {
  const json& fj = need(in, "f");
  const json& x0j = need(in, "x0");
  std::vector<Expr> f;
  std::vector<double> x0;
  if (fj.is_string() || (fj.is_array() && fj.size() == 1)) {
    const json& one = fj.is_string() ? fj : fj[0];
    if (!one.is_string()) throw InputError("field \"f\" must hold DSL strings");
    f.push_back(expr_from(one.get<std::string>(), "f", {"t", "x", "s", "r"}));
    if (x0j.is_number())
      x0.push_back(x0j.get<double>());
    else if (x0j.is_array() && x0j.size() == 1 && x0j[0].is_number())
      x0.push_back(x0j[0].get<double>());
    else
      throw InputError("field \"x0\" must be a number for a scalar problem");
  } else if (fj.is_array()) {
    std::vector<std::string> sig = {"t"};
    for (std::size_t i = 1; i <= fj.size(); ++i) sig.push_back("x" + std::to_string(i));
    for (std::size_t i = 0; i < fj.size(); ++i) {
      if (!fj[i].is_string()) throw InputError("field \"f\" must hold DSL strings");
      f.push_back(expr_from(fj[i].get<std::string>(), "f", sig));
    }
    if (!x0j.is_array() || x0j.size() != fj.size())
      throw InputError("field \"x0\" must be an array matching the length of \"f\"");
    for (const auto& c : x0j) {
      if (!c.is_number()) throw InputError("field \"x0\" must hold numbers");
      x0.push_back(c.get<double>());
    }
  } else {
    throw InputError("field \"f\" must be a string or an array of strings");
  }
  return IvpSpec(std::move(f), need_num(in, "t0"), std::move(x0), need_num(in, "a"),
                 need_num(in, "b"));
}

RunResult run_th3(const json& in) {
  IvpSpec ivp = ivp_from_json(in);
  return from_verdict(check_zero_solution(ivp, need_expr(in, "psi")));
}

RunResult run_kamke(const json& in) {
  IvpSpec ivp = ivp_from_json(in);
  BoundSpec bound(need_expr(in, "p"), need_expr(in, "psi"),
                  opt_num(in, "bound_a", ivp.a()), opt_num(in, "bound_b", ivp.b()));
  const json& cj = need(in, "certificate");
  if (!cj.is_object()) throw InputError("field \"certificate\" must be an object");
  Verdict cert = uniqueness_verdict(cj);
  std::string mode_s = need_str(in, "mode");
  KamkeMode mode;
  if (mode_s == "self")
    mode = KamkeMode::SelfBound;
  else if (mode_s == "difference")
    mode = KamkeMode::DifferenceBound;
  else
    throw InputError("field \"mode\" must be \"self\" or \"difference\"");
  RunResult r = from_verdict(check_kamke(ivp, bound, mode, cert));
  r.evidence["certificate"] = {{"criterion", cert.criterion}, {"verdict", to_string(cert.tag)}};
  return r;
}

RunResult run_gronwall(const json& in) {
  Expr alpha = need_expr(in, "alpha", {"t"});
  Expr beta = need_expr(in, "beta", {"t"});
  double t0 = need_num(in, "t0");
  double a = need_num(in, "a");
  RunResult r;
  if (in.contains("phi")) {
    Expr phi = need_expr(in, "phi", {"t"});
    GronwallReport rep = gronwall_check(alpha, beta, phi, t0, a, opt_num(in, "tol", 1e-9));
    r.exit_code = rep.pass ? 0 : 1;
    r.verdict = rep.pass ? "pass" : "fail";
    r.payload = {{"min_margin", rep.min_margin},
                 {"bound_at_end", rep.bound.back()},
                 {"phi_at_end", rep.phi.back()}};
    r.evidence = {{"grid_n", rep.grid.size()},
                  {"t", rep.grid},
                  {"phi", rep.phi},
                  {"bound", rep.bound}};
    std::vector<double> margin(rep.grid.size());
    for (std::size_t i = 0; i < margin.size(); ++i) margin[i] = rep.bound[i] - rep.phi[i];
    r.csv = csv_table({"t", "phi", "bound", "margin"}, {rep.grid, rep.phi, rep.bound, margin});
  } else {
    double phi0 = need_num(in, "phi0");
    int grid_n = static_cast<int>(opt_num(in, "grid_n", 257));
    auto table = gronwall_bound(alpha, beta, phi0, t0, a, grid_n);
    std::vector<double> ts(table.size()), bs(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
      ts[i] = table[i].first;
      bs[i] = table[i].second;
    }
    r.exit_code = 0;
    r.verdict = "computed";
    r.payload = {{"phi0", phi0}, {"bound_at_end", bs.back()}};
    r.evidence = {{"grid_n", table.size()}, {"t", ts}, {"bound", bs}};
    r.csv = csv_table({"t", "bound"}, {ts, bs});
  }
  return r;
}

RunResult run_funnel(const json& in) {
  IvpSpec ivp = ivp_from_json(in);
  std::vector<double> deltas;
  if (in.contains("deltas")) {
    const json& dj = in["deltas"];
    if (!dj.is_array() || dj.empty()) throw InputError("field \"deltas\" must be a non-empty array");
    for (const auto& d : dj) {
      if (!d.is_number()) throw InputError("field \"deltas\" must hold numbers");
      deltas.push_back(d.get<double>());
    }
  } else {
    deltas = default_funnel_deltas();
  }
  FunnelReport rep = funnel_probe(ivp, need_num(in, "t_end"), deltas,
                                  opt_num(in, "rtol", 1e-11), opt_num(in, "atol", 1e-13));
  RunResult r;
  r.exit_code = 0;
  r.verdict = "computed";
  r.payload = {{"fitted_order", rep.fitted_order}, {"final_spread", rep.spreads.back()}};
  r.evidence = {{"deltas", rep.deltas}, {"spreads", rep.spreads}};
  r.csv = csv_table({"delta", "spread"}, {rep.deltas, rep.spreads});
  return r;
}

RunResult execute(const std::string& kind, const json& in) {
  if (kind == "cov") return run_cov(in);
  if (kind == "green") return run_green(in);
  if (kind == "equivalence") return run_equivalence(in);
  if (kind == "uniqueness") return run_uniqueness(in);
  if (kind == "kamke") return run_kamke(in);
  if (kind == "th3") return run_th3(in);
  if (kind == "gronwall") return run_gronwall(in);
  if (kind == "funnel") return run_funnel(in);
  if (kind == "witness") return run_witness(in);
  throw InputError("unknown kind \"" + kind + "\"");
}

// Runs one problem, folding every anticipated failure into the exit-code
// contract: bad input -> 65, a violated hypothesis or an escaped/underflowed
// trajectory -> Inconclusive (2).
RunResult execute_guarded(const std::string& kind, const json& in) {
  auto inconclusive_at = [](const std::string& what, double t) {
    RunResult r;
    r.exit_code = 2;
    r.verdict = "Inconclusive";
    r.payload = {{"reason", what}, {"t", t}};
    return r;
  };
  try {
    return execute(kind, in);
  } catch (const HypothesisViolatedError& e) {
    return inconclusive_at(e.what(), e.where());
  } catch (const BoxExitError& e) {
    return inconclusive_at(e.what(), e.where());
  } catch (const StepUnderflowError& e) {
    return inconclusive_at(e.what(), e.where());
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {  // SyntaxError, DomainError, InvalidRangeError, ...
    throw InputError(e.what());
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed input: ") + e.what());
  }
}

// ---- input loading ----------------------------------------------------

json load_input(const std::string& path, const std::string& expected_kind) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open input file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw InputError(std::string("input is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("top-level JSON value must be an object");
  if (static_cast<int>(need_num(j, "version")) != 1)
    throw InputError("unsupported input version (expected 1)");
  std::string kind = need_str(j, "kind");
  if (!expected_kind.empty() && kind != expected_kind)
    throw InputError("input kind \"" + kind + "\" does not match this subcommand (expected \"" +
                     expected_kind + "\")");
  return j;
}

// ---- rendering --------------------------------------------------------

std::string scalar_to_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string value_to_text(const json& v) {
  if (v.is_array() && v.size() > 16) {
    return "[" + std::to_string(v.size()) + " values, first " + v.front().dump() + ", last " +
           v.back().dump() + "]";
  }
  if (v.is_object() || v.is_array()) return v.dump();
  return scalar_to_text(v);
}

void render_section(std::string& out, const char* name, const json& obj) {
  if (obj.empty()) return;
  out += std::string(name) + ":\n";
  for (const auto& [k, v] : obj.items()) out += "  " + k + ": " + value_to_text(v) + "\n";
}

json make_envelope(const std::string& kind, const RunResult& r, double wall_s) {
  return {{"schema_version", 1},   {"tool", "uniqcert"},      {"tool_version", kVersion},
          {"kind", kind},          {"verdict", r.verdict},    {"exit_code", r.exit_code},
          {"payload", r.payload},  {"evidence", r.evidence},  {"wall_time_s", wall_s}};
}

std::string render_text(const json& env) {
  std::string out = "uniqcert " + env["tool_version"].get<std::string>() + " — " +
                    env["kind"].get<std::string>() + "\n";
  out += "verdict: " + env["verdict"].get<std::string>() +
         " (exit " + env["exit_code"].dump() + ")\n";
  render_section(out, "payload", env["payload"]);
  render_section(out, "evidence", env["evidence"]);
  out += "wall_time_s: " + env["wall_time_s"].dump() + "\n";
  return out;
}

void emit(const json& env, const std::string& format) {
  std::string out = format == "json" ? env.dump(2) + "\n" : render_text(env);
  std::fwrite(out.data(), 1, out.size(), stdout);
  std::fflush(stdout);
}

int write_csv(const std::string& path, const std::string& csv) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    std::fprintf(stderr, "uniqcert: cannot write CSV file: %s\n", path.c_str());
    return 64;
  }
  f << csv;
  return f.good() ? 0 : 64;
}

// ---- fixtures ---------------------------------------------------------

// One expectation key -> how to check it against the finished RunResult.
bool check_expect(const std::string& key, const json& want, const RunResult& r,
                  std::string& why) {
  auto num_at = [&](const json& obj, const char* field, double& out) {
    if (!obj.contains(field) || !obj[field].is_number()) return false;
    out = obj[field].get<double>();
    return true;
  };
  double got = 0.0;
  if (key == "exit") {
    if (r.exit_code == want.get<int>()) return true;
    why = "exit " + std::to_string(r.exit_code) + ", want " + want.dump();
  } else if (key == "verdict") {
    if (r.verdict == want.get<std::string>()) return true;
    why = "verdict " + r.verdict + ", want " + want.get<std::string>();
  } else if (key == "criterion") {
    std::string c = r.payload.value("criterion", std::string());
    if (c == want.get<std::string>()) return true;
    why = "criterion \"" + c + "\", want \"" + want.get<std::string>() + "\"";
  } else if (key == "reason_contains") {
    std::string reason = r.payload.value("reason", std::string());
    if (reason.find(want.get<std::string>()) != std::string::npos) return true;
    why = "reason \"" + reason + "\" lacks \"" + want.get<std::string>() + "\"";
  } else if (key == "witness") {
    std::string w = r.payload.value("witness", std::string());
    if (w == want.get<std::string>()) return true;
    why = "witness \"" + w + "\", want \"" + want.get<std::string>() + "\"";
  } else if (key == "residual_le") {
    if (num_at(r.payload, "residual", got) && got <= want.get<double>()) return true;
    why = "residual " + std::to_string(got) + " > " + want.dump();
  } else if (key == "lhs_residual_le") {
    if (num_at(r.payload, "lhs_residual", got) && got <= want.get<double>()) return true;
    why = "lhs_residual " + std::to_string(got) + " > " + want.dump();
  } else if (key == "max_residual_le") {
    if (r.evidence.contains("metrics") && num_at(r.evidence["metrics"], "max_residual", got) &&
        got <= want.get<double>())
      return true;
    why = "max_residual " + std::to_string(got) + " > " + want.dump();
  } else if (key == "fitted_order_gt") {
    if (num_at(r.payload, "fitted_order", got) && got > want.get<double>()) return true;
    why = "fitted_order " + std::to_string(got) + " <= " + want.dump();
  } else if (key == "fitted_order_le") {
    if (num_at(r.payload, "fitted_order", got) && got <= want.get<double>()) return true;
    why = "fitted_order " + std::to_string(got) + " > " + want.dump();
  } else if (key == "final_spread_ge") {
    if (num_at(r.payload, "final_spread", got) && got >= want.get<double>()) return true;
    why = "final_spread " + std::to_string(got) + " < " + want.dump();
  } else if (key == "final_spread_le") {
    if (num_at(r.payload, "final_spread", got) && got <= want.get<double>()) return true;
    why = "final_spread " + std::to_string(got) + " > " + want.dump();
  } else if (key == "min_margin_abs_le") {
    if (num_at(r.payload, "min_margin", got) && std::abs(got) <= want.get<double>()) return true;
    why = "|min_margin| " + std::to_string(std::abs(got)) + " > " + want.dump();
  } else {
    why = "unknown expect key \"" + key + "\"";
  }
  return false;
}

int run_fixtures(const std::string& dir, const std::string& format) {
  namespace fs = std::filesystem;
  auto started = std::chrono::steady_clock::now();
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  if (ec) {
    json env = make_envelope("fixtures",
                             {65, "error", {{"message", "cannot read fixture directory: " + dir}},
                              json::object(), ""},
                             0.0);
    emit(env, format);
    return 65;
  }
  std::sort(files.begin(), files.end());

  json rows = json::array();
  std::size_t failed = 0;
  std::string table;
  for (const auto& path : files) {
    std::string name = path.filename().string();
    std::vector<std::string> problems;
    std::string kind = "?";
    std::string verdict = "error";
    int exit_code = 65;
    try {
      json j = load_input(path.string(), "");
      kind = j["kind"].get<std::string>();
      const json& expect = need(j, "expect");
      if (!expect.is_object() || expect.empty())
        throw InputError("fixture needs a non-empty \"expect\" object");
      RunResult r = execute_guarded(kind, j);
      verdict = r.verdict;
      exit_code = r.exit_code;
      for (const auto& [k, want] : expect.items()) {
        std::string why;
        if (!check_expect(k, want, r, why)) problems.push_back(why);
      }
    } catch (const InputError& e) {
      problems.push_back(e.what());
    }
    bool ok = problems.empty();
    if (!ok) ++failed;
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-34s %-12s %-13s exit %d\n", ok ? "ok" : "FAIL",
                  name.c_str(), kind.c_str(), verdict.c_str(), exit_code);
    table += line;
    for (const auto& p : problems) table += "       - " + p + "\n";
    json row = {{"file", name}, {"kind", kind},   {"verdict", verdict},
                {"exit", exit_code}, {"ok", ok}};
    if (!ok) row["problems"] = problems;
    rows.push_back(row);
  }

  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  RunResult r;
  r.exit_code = (failed == 0 && !files.empty()) ? 0 : 1;
  r.verdict = r.exit_code == 0 ? "pass" : "fail";
  r.payload = {{"total", files.size()}, {"failed", failed}};
  r.evidence = {{"dir", dir}, {"rows", rows}};
  json env = make_envelope("fixtures", r, wall);
  if (format == "json") {
    emit(env, "json");
  } else {
    std::string out = table;
    char tail[160];
    std::snprintf(tail, sizeof tail, "%zu/%zu fixtures reproduced their expected results (%.2f s)\n",
                  files.size() - failed, files.size(), wall);
    out += tail;
    if (files.empty()) out += "no fixtures found in " + dir + "\n";
    std::fwrite(out.data(), 1, out.size(), stdout);
    std::fflush(stdout);
  }
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical verification of integral identities and ODE uniqueness criteria"};
  app.set_version_flag("--version", std::string("uniqcert ") + kVersion);
  app.require_subcommand(1);

  std::string input;
  std::string format = "text";
  std::string csv_path;
  std::string fixture_dir;
  double witness_c = 0.0, witness_a = 1.0;
  bool have_witness_c = false;

  // subcommand name -> input kind; series kinds additionally accept --csv
  const std::map<std::string, std::pair<std::string, const char*>> kinds = {
      {"verify-cov", {"cov", "verify the change-of-variables identity"}},
      {"verify-green", {"green", "verify the circulation identity on a graph region"}},
      {"equivalence", {"equivalence", "recover one identity from the other"}},
      {"check-bound", {"uniqueness", "run one uniqueness criterion on a bound"}},
      {"check-kamke", {"kamke", "certify an IVP against a certified comparison bound"}},
      {"check-th3", {"th3", "certify a constant solution as the unique one"}},
      {"gronwall", {"gronwall", "integral bound table, or check a function against it"}},
      {"funnel", {"funnel", "perturbation decay probe for an IVP"}},
      {"witness", {"witness", "exhibit a non-uniqueness witness for c*x/t"}},
  };
  for (const auto& [name, meta] : kinds) {
    CLI::App* sub = app.add_subcommand(name, meta.second);
    sub->add_option("--input", input, "JSON problem description file");
    sub->add_option("--format", format, "output format")
        ->check(CLI::IsMember({"text", "json"}));
    if (meta.first == "funnel" || meta.first == "gronwall")
      sub->add_option("--csv", csv_path, "also write the series as CSV to this path");
    if (name == "witness") {
      sub->add_option("--c", witness_c, "exponent of the bound c*x/t")
          ->each([&](const std::string&) { have_witness_c = true; });
      sub->add_option("--a", witness_a, "time range (0, a]");
    }
  }
  CLI::App* fixtures = app.add_subcommand("fixtures", "run every fixture and compare verdicts");
  fixtures->add_option("--dir", fixture_dir, "fixture directory (default $UNIQCERT_FIXTURE_DIR)");
  fixtures->add_option("--format", format, "output format")
      ->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub == fixtures) {
    if (fixture_dir.empty()) {
      const char* env_dir = std::getenv("UNIQCERT_FIXTURE_DIR");
      fixture_dir = env_dir ? env_dir : "fixtures";
    }
    return run_fixtures(fixture_dir, format);
  }

  const std::string kind = kinds.at(sub->get_name()).first;
  auto started = std::chrono::steady_clock::now();
  RunResult result;
  try {
    json in;
    if (!input.empty()) {
      in = load_input(input, kind);
    } else if (kind == "witness" && have_witness_c) {
      in = {{"version", 1}, {"kind", "witness"}, {"c", witness_c}, {"a", witness_a}};
    } else {
      std::fprintf(stderr, "uniqcert %s: missing --input FILE%s\n", sub->get_name().c_str(),
                   kind == "witness" ? " (or --c / --a)" : "");
      return 64;
    }
    result = execute_guarded(kind, in);
  } catch (const InputError& e) {
    result.exit_code = 65;
    result.verdict = "error";
    result.payload = {{"message", e.what()}};
  }

  if (!csv_path.empty()) {
    if (result.csv.empty()) {
      std::fprintf(stderr, "uniqcert: --csv is not available for this result\n");
      return 64;
    }
    int rc = write_csv(csv_path, result.csv);
    if (rc != 0) return rc;
  }

  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  emit(make_envelope(kind, result, wall), format);
  return result.exit_code;
}
