#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uniqcert/dual.hpp"
#include "uniqcert/errors.hpp"

namespace uniqcert {

enum class NodeKind {
  Constant,
  Variable,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Pow,  // exponent is a folded constant stored in `value`
  Call,
  Le,  // comparisons appear only as piecewise conditions
  Lt,
  Piecewise,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind;
  double value = 0.0;
  std::string name;
  std::vector<NodePtr> kids;
};

inline NodePtr make_constant(double v) {
  return std::make_shared<Node>(Node{NodeKind::Constant, v, {}, {}});
}
inline NodePtr make_variable(std::string name) {
  return std::make_shared<Node>(Node{NodeKind::Variable, 0.0, std::move(name), {}});
}
inline NodePtr make_node(NodeKind k, std::vector<NodePtr> kids) {
  return std::make_shared<Node>(Node{k, 0.0, {}, std::move(kids)});
}
inline NodePtr make_pow(NodePtr base, double exponent) {
  return std::make_shared<Node>(Node{NodeKind::Pow, exponent, {}, {std::move(base)}});
}
inline NodePtr make_call(std::string fn, std::vector<NodePtr> args) {
  return std::make_shared<Node>(Node{NodeKind::Call, 0.0, std::move(fn), std::move(args)});
}

// Parsed expression plus the variable names it may legally reference.
class Expr {
 public:
  NodePtr root;
  std::vector<std::string> signature;
};

template <class T>
class EnvT {
 public:
  EnvT& set(std::string_view name, T v) {
    for (auto& kv : vars_) {
      if (kv.first == name) {
        kv.second = std::move(v);
        return *this;
      }
    }
    vars_.emplace_back(std::string(name), std::move(v));
    return *this;
  }
  const T* find(std::string_view name) const {
    for (const auto& kv : vars_) {
      if (kv.first == name) return &kv.second;
    }
    return nullptr;
  }
  auto begin() const { return vars_.begin(); }
  auto end() const { return vars_.end(); }
  std::size_t size() const { return vars_.size(); }

 private:
  std::vector<std::pair<std::string, T>> vars_;
};

using Env = EnvT<double>;

namespace detail {

inline std::string num_to_string(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline int print_level(const Node* n) {
  switch (n->kind) {
    case NodeKind::Add:
    case NodeKind::Sub:
      return 1;
    case NodeKind::Mul:
    case NodeKind::Div:
      return 2;
    case NodeKind::Neg:
      return 3;
    case NodeKind::Constant:
      return std::signbit(n->value) ? 3 : 5;
    case NodeKind::Pow:
      return 4;
    default:
      return 5;
  }
}

inline void print_node(std::string& out, const Node* n, int min_level, bool guard_minus);

inline std::string print_child(const Node* n, int min_level, bool guard_minus) {
  std::string s;
  print_node(s, n, min_level, guard_minus);
  return s;
}

inline void print_node(std::string& out, const Node* n, int min_level, bool guard_minus) {
  std::string body;
  switch (n->kind) {
    case NodeKind::Constant:
      body = num_to_string(n->value);
      break;
    case NodeKind::Variable:
      body = n->name;
      break;
    case NodeKind::Add:
      body = print_child(n->kids[0].get(), 1, false) + "+" + print_child(n->kids[1].get(), 2, true);
      break;
    case NodeKind::Sub:
      body = print_child(n->kids[0].get(), 1, false) + "-" + print_child(n->kids[1].get(), 2, true);
      break;
    case NodeKind::Mul:
      body = print_child(n->kids[0].get(), 2, false) + "*" + print_child(n->kids[1].get(), 3, true);
      break;
    case NodeKind::Div:
      body = print_child(n->kids[0].get(), 2, false) + "/" + print_child(n->kids[1].get(), 3, true);
      break;
    case NodeKind::Neg:
      body = "-" + print_child(n->kids[0].get(), 3, false);
      break;
    case NodeKind::Pow:
      body = print_child(n->kids[0].get(), 4, false) + "^" + num_to_string(n->value);
      break;
    case NodeKind::Call:
    case NodeKind::Piecewise: {
      body = n->kind == NodeKind::Piecewise ? "piecewise" : n->name;
      body += "(";
      for (std::size_t i = 0; i < n->kids.size(); ++i) {
        if (i) body += ",";
        print_node(body, n->kids[i].get(), 1, false);
      }
      body += ")";
      break;
    }
    case NodeKind::Le:
      body = print_child(n->kids[0].get(), 1, false) + "<=" + print_child(n->kids[1].get(), 1, false);
      break;
    case NodeKind::Lt:
      body = print_child(n->kids[0].get(), 1, false) + "<" + print_child(n->kids[1].get(), 1, false);
      break;
  }
  bool wrap = print_level(n) < min_level || (guard_minus && !body.empty() && body[0] == '-');
  if (wrap) {
    out += "(";
    out += body;
    out += ")";
  } else {
    out += body;
  }
}

}  // namespace detail

inline std::string to_string(const Node* n) {
  std::string s;
  detail::print_node(s, n, 0, false);
  return s;
}

inline std::string to_string(const Expr& e) { return to_string(e.root.get()); }

namespace detail {

template <class T>
T eval_node(const Node* n, const EnvT<T>& env) {
  using std::abs;
  using std::cos;
  using std::exp;
  using std::log;
  using std::sin;
  using std::sqrt;
  switch (n->kind) {
    case NodeKind::Constant:
      return scalar_of<T>::constant(n->value);
    case NodeKind::Variable: {
      const T* v = env.find(n->name);
      if (!v) throw DomainError("unbound variable", to_string(n));
      return *v;
    }
    case NodeKind::Add:
      return eval_node(n->kids[0].get(), env) + eval_node(n->kids[1].get(), env);
    case NodeKind::Sub:
      return eval_node(n->kids[0].get(), env) - eval_node(n->kids[1].get(), env);
    case NodeKind::Mul:
      return eval_node(n->kids[0].get(), env) * eval_node(n->kids[1].get(), env);
    case NodeKind::Div: {
      T a = eval_node(n->kids[0].get(), env);
      T b = eval_node(n->kids[1].get(), env);
      if (scalar_value(b) == 0.0) throw DomainError("division by zero", to_string(n));
      return a / b;
    }
    case NodeKind::Neg:
      return -eval_node(n->kids[0].get(), env);
    case NodeKind::Pow: {
      T base = eval_node(n->kids[0].get(), env);
      double e = n->value;
      double bv = scalar_value(base);
      if (bv == 0.0 && e < 0.0) throw DomainError("zero base with negative exponent", to_string(n));
      if (bv < 0.0 && e != std::rint(e)) {
        throw DomainError("negative base with non-integer exponent", to_string(n));
      }
      return pow_const(base, e);
    }
    case NodeKind::Call: {
      T a = eval_node(n->kids[0].get(), env);
      const std::string& fn = n->name;
      if (fn == "sin") return sin(a);
      if (fn == "cos") return cos(a);
      if (fn == "exp") return exp(a);
      if (fn == "ln") {
        if (scalar_value(a) <= 0.0) throw DomainError("ln of non-positive argument", to_string(n));
        return log(a);
      }
      if (fn == "sqrt") {
        if (scalar_value(a) < 0.0) throw DomainError("sqrt of negative argument", to_string(n));
        return sqrt(a);
      }
      if (fn == "abs") return abs(a);
      T b = eval_node(n->kids[1].get(), env);
      if (fn == "min") return min_first(a, b);
      return max_first(a, b);
    }
    case NodeKind::Piecewise: {
      std::size_t pairs = n->kids.size() / 2;
      for (std::size_t i = 0; i < pairs; ++i) {
        const Node* cond = n->kids[2 * i].get();
        double lhs = scalar_value(eval_node(cond->kids[0].get(), env));
        double rhs = scalar_value(eval_node(cond->kids[1].get(), env));
        bool sat = cond->kind == NodeKind::Le ? lhs <= rhs : lhs < rhs;
        if (sat) return eval_node(n->kids[2 * i + 1].get(), env);
      }
      return eval_node(n->kids.back().get(), env);
    }
    default:
      throw Error("comparison evaluated outside piecewise");
  }
}

inline bool has_variable(const Node* n) {
  if (n->kind == NodeKind::Variable) return true;
  for (const auto& k : n->kids) {
    if (has_variable(k.get())) return true;
  }
  return false;
}

}  // namespace detail

template <class T>
T eval_with(const Expr& e, const EnvT<T>& env) {
  T r = detail::eval_node<T>(e.root.get(), env);
  if (!all_finite(r)) throw DomainError("non-finite result", to_string(e));
  return r;
}

inline double eval(const Expr& e, const Env& env) { return eval_with<double>(e, env); }

inline double partial(const Expr& e, std::string_view var, const Env& env) {
  EnvT<Dual<double>> denv;
  for (const auto& [k, v] : env) denv.set(k, Dual<double>{v, k == var ? 1.0 : 0.0});
  return eval_with(e, denv).dot;
}

inline bool references(const Expr& e, std::string_view var) {
  struct Rec {
    static bool go(const Node* n, std::string_view v) {
      if (n->kind == NodeKind::Variable) return n->name == v;
      for (const auto& k : n->kids) {
        if (go(k.get(), v)) return true;
      }
      return false;
    }
  };
  return Rec::go(e.root.get(), var);
}

// Referenced variables in signature order.
inline std::vector<std::string> used_variables(const Expr& e) {
  std::vector<std::string> out;
  for (const auto& v : e.signature) {
    if (references(e, v)) out.push_back(v);
  }
  return out;
}

namespace detail {

inline double second_partial(const Expr& e, std::string_view var, const Env& env) {
  EnvT<Dual<Dual<double>>> denv;
  for (const auto& [k, v] : env) {
    double seed = k == var ? 1.0 : 0.0;
    denv.set(k, Dual<Dual<double>>{{v, seed}, {seed, 0.0}});
  }
  return eval_with(e, denv).dot.dot;
}

}  // namespace detail

inline bool structurally_equal(const Node* a, const Node* b) {
  if (a->kind != b->kind || a->name != b->name || a->kids.size() != b->kids.size()) return false;
  if (std::memcmp(&a->value, &b->value, sizeof(double)) != 0) return false;
  for (std::size_t i = 0; i < a->kids.size(); ++i) {
    if (!structurally_equal(a->kids[i].get(), b->kids[i].get())) return false;
  }
  return true;
}

inline bool structurally_equal(const Expr& a, const Expr& b) {
  return a.signature == b.signature && structurally_equal(a.root.get(), b.root.get());
}

namespace detail {

enum class Tok { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, Lt, Le, End };

struct Token {
  Tok kind;
  std::size_t off;
  double num = 0.0;
  std::string_view text;
};

inline bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
inline bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
inline bool digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t pos = 0;
  while (true) {
    while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t' || src[pos] == '\n' || src[pos] == '\r')) ++pos;
    std::size_t off = pos;
    if (pos >= src.size()) {
      out.push_back({Tok::End, off});
      return out;
    }
    char c = src[pos];
    if (digit(c) || (c == '.' && pos + 1 < src.size() && digit(src[pos + 1]))) {
      double v = 0.0;
      auto res = std::from_chars(src.data() + pos, src.data() + src.size(), v);
      if (res.ec != std::errc()) throw SyntaxError("malformed number", off);
      pos = static_cast<std::size_t>(res.ptr - src.data());
      out.push_back({Tok::Num, off, v, src.substr(off, pos - off)});
      continue;
    }
    if (ident_start(c)) {
      std::size_t end = pos;
      while (end < src.size() && ident_char(src[end])) ++end;
      out.push_back({Tok::Ident, off, 0.0, src.substr(pos, end - pos)});
      pos = end;
      continue;
    }
    switch (c) {
      case '+': out.push_back({Tok::Plus, off}); break;
      case '-': out.push_back({Tok::Minus, off}); break;
      case '*': out.push_back({Tok::Star, off}); break;
      case '/': out.push_back({Tok::Slash, off}); break;
      case '^': out.push_back({Tok::Caret, off}); break;
      case '(': out.push_back({Tok::LParen, off}); break;
      case ')': out.push_back({Tok::RParen, off}); break;
      case ',': out.push_back({Tok::Comma, off}); break;
      case '<':
        if (pos + 1 < src.size() && src[pos + 1] == '=') {
          out.push_back({Tok::Le, off});
          ++pos;
        } else {
          out.push_back({Tok::Lt, off});
        }
        break;
      default:
        throw SyntaxError("unexpected character", off);
    }
    ++pos;
  }
}

inline int call_arity(std::string_view fn) {
  if (fn == "sin" || fn == "cos" || fn == "exp" || fn == "ln" || fn == "sqrt" || fn == "abs") return 1;
  if (fn == "min" || fn == "max") return 2;
  return -1;
}

class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& signature)
      : toks_(lex(src)), sig_(signature) {}

  NodePtr run() {
    NodePtr e = expression();
    if (peek().kind != Tok::End) throw SyntaxError("unexpected trailing input", peek().off);
    return e;
  }

 private:
  std::vector<Token> toks_;
  std::size_t i_ = 0;
  const std::vector<std::string>& sig_;

  const Token& peek() const { return toks_[i_]; }
  Token eat() { return toks_[i_++]; }

  bool in_signature(std::string_view name) const {
    return std::find(sig_.begin(), sig_.end(), name) != sig_.end();
  }

  NodePtr expression() {
    NodePtr lhs = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      Tok op = eat().kind;
      NodePtr rhs = term();
      lhs = make_node(op == Tok::Plus ? NodeKind::Add : NodeKind::Sub, {lhs, rhs});
    }
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      Tok op = eat().kind;
      NodePtr rhs = unary();
      lhs = make_node(op == Tok::Star ? NodeKind::Mul : NodeKind::Div, {lhs, rhs});
    }
    return lhs;
  }

  NodePtr unary() {
    if (peek().kind == Tok::Minus) {
      eat();
      NodePtr child = unary();
      if (child->kind == NodeKind::Constant) return make_constant(-child->value);
      return make_node(NodeKind::Neg, {child});
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    while (peek().kind == Tok::Caret) {
      std::size_t caret_off = eat().off;
      bool neg = false;
      if (peek().kind == Tok::Minus) {
        eat();
        neg = true;
      }
      NodePtr ex = atom();
      if (has_variable(ex.get())) throw SyntaxError("exponent must be a constant", caret_off);
      double v;
      try {
        EnvT<double> empty;
        v = eval_node<double>(ex.get(), empty);
      } catch (const Error&) {
        throw SyntaxError("exponent must be a finite constant", caret_off);
      }
      if (!std::isfinite(v)) throw SyntaxError("exponent must be a finite constant", caret_off);
      base = make_pow(base, neg ? -v : v);
    }
    return base;
  }

  // A call argument; comparisons are legal only here, for piecewise.
  NodePtr argument(bool allow_comparison) {
    NodePtr lhs = expression();
    if (peek().kind == Tok::Le || peek().kind == Tok::Lt) {
      Token op = eat();
      if (!allow_comparison) throw SyntaxError("comparison outside piecewise", op.off);
      NodePtr rhs = expression();
      return make_node(op.kind == Tok::Le ? NodeKind::Le : NodeKind::Lt, {lhs, rhs});
    }
    return lhs;
  }

  NodePtr call(const Token& name) {
    eat();  // '('
    bool piecewise = name.text == "piecewise";
    std::vector<NodePtr> args;
    if (peek().kind != Tok::RParen) {
      args.push_back(argument(piecewise));
      while (peek().kind == Tok::Comma) {
        eat();
        args.push_back(argument(piecewise));
      }
    }
    if (peek().kind != Tok::RParen) throw SyntaxError("expected ')'", peek().off);
    eat();
    if (piecewise) {
      bool shape_ok = args.size() >= 3 && args.size() % 2 == 1;
      if (shape_ok) {
        for (std::size_t i = 0; i < args.size(); ++i) {
          bool is_cmp = args[i]->kind == NodeKind::Le || args[i]->kind == NodeKind::Lt;
          bool want_cmp = i % 2 == 0 && i + 1 < args.size();
          if (is_cmp != want_cmp) shape_ok = false;
        }
      }
      if (!shape_ok) {
        throw SyntaxError("piecewise expects condition,value pairs then a default", name.off);
      }
      return make_node(NodeKind::Piecewise, std::move(args));
    }
    int arity = call_arity(name.text);
    if (arity < 0) throw UnknownFunctionError(std::string(name.text), name.off);
    if (static_cast<int>(args.size()) != arity) {
      throw SyntaxError("wrong number of arguments to '" + std::string(name.text) + "'", name.off);
    }
    for (const auto& a : args) {
      if (a->kind == NodeKind::Le || a->kind == NodeKind::Lt) {
        throw SyntaxError("comparison outside piecewise", name.off);
      }
    }
    return make_call(std::string(name.text), std::move(args));
  }

  NodePtr atom() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Num:
        eat();
        return make_constant(t.num);
      case Tok::Ident: {
        Token name = eat();
        if (peek().kind == Tok::LParen) return call(name);
        if (name.text == "pi") return make_constant(std::numbers::pi);
        if (name.text == "e") return make_constant(std::numbers::e);
        if (!in_signature(name.text)) throw UnknownVariableError(std::string(name.text), name.off);
        return make_variable(std::string(name.text));
      }
      case Tok::LParen: {
        eat();
        NodePtr e = expression();
        if (peek().kind != Tok::RParen) throw SyntaxError("expected ')'", peek().off);
        eat();
        return e;
      }
      default:
        throw SyntaxError("expected expression", t.off);
    }
  }
};

}  // namespace detail

inline Expr parse(std::string_view text, std::vector<std::string> signature = {"t", "x", "s", "r"}) {
  if (text.empty()) throw SyntaxError("empty input", 0);
  for (const auto& v : signature) {
    if (v.empty() || !detail::ident_start(v[0]) ||
        !std::all_of(v.begin(), v.end(), detail::ident_char)) {
      throw Error("invalid variable name in signature: '" + v + "'");
    }
    if (v == "pi" || v == "e" || v == "piecewise" || detail::call_arity(v) > 0) {
      throw Error("reserved name in signature: '" + v + "'");
    }
  }
  detail::Parser p(text, signature);
  Expr e;
  e.root = p.run();
  e.signature = std::move(signature);
  return e;
}

}  // namespace uniqcert
