#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "nonlocal_spectra/error.hpp"
#include "nonlocal_spectra/geometry.hpp"

namespace nls {

/// Values an expression may read.
///
/// x, x1, x2 are the position; z, z1, z2 a jump offset; r = |x|, rz = |z|;
/// u is the unknown in nonlinearities. pi is a constant.
struct ExprEnv {
  Point x = Point::Zero();
  Point z = Point::Zero();
  double u = 0.0;
  int dim = 1;
};

/// Compiled arithmetic expression.
///
/// Grammar (usual precedence, ^ right associative and binding tighter than unary minus):
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := '-' unary | '+' unary | power
///   power  := atom ('^' unary)?
///   atom   := number | identifier | identifier '(' expr (',' expr)* ')' | '(' expr ')'
///
/// Functions: exp abs sqrt sin cos log (one argument), min max (two or more),
/// indicator(v, hi) = [v <= hi], indicator(v, lo, hi) = [lo <= v <= hi],
/// indicator_open(v, lo, hi) = [lo <= v < hi].
class Expression {
 public:
  enum class Op {
    Const, VarX1, VarX2, VarZ1, VarZ2, VarR, VarRz, VarU,
    Add, Sub, Mul, Div, Pow, Neg,
    Exp, Abs, Sqrt, Sin, Cos, Log, Min, Max, Indicator, IndicatorOpen
  };

  Expression() = default;

  /// Parses `text`; identifiers outside `allowed` are rejected. Errors carry
  /// the 1-based column inside `text`, prefixed by `where`.
  static Expression parse(const std::string& text, const std::set<std::string>& allowed,
                          const std::string& where = "expression") {
    Parser p{text, allowed, where, 0, {}};
    Expression e;
    e.source_ = text;
    e.root_ = p.parse_all();
    e.uses_ = std::move(p.used);
    return e;
  }

  static Expression constant(double v) {
    Expression e;
    e.root_ = std::make_shared<Node>(Node{Op::Const, v, {}});
    e.source_ = std::to_string(v);
    return e;
  }

  double operator()(const ExprEnv& env) const {
    if (!root_) fail(ErrorCode::Internal, "evaluating an empty expression");
    return eval(*root_, env);
  }

  double at(const Point& x) const {
    ExprEnv env;
    env.x = x;
    return (*this)(env);
  }

  bool valid() const { return static_cast<bool>(root_); }
  const std::string& source() const { return source_; }
  /// Identifiers the expression actually reads.
  const std::set<std::string>& uses() const { return uses_; }
  bool is_constant() const {
    for (const auto& u : uses_)
      if (u != "pi") return false;
    return true;
  }

 private:
  struct Node {
    Op op;
    double value;
    std::vector<std::shared_ptr<const Node>> kids;
  };
  using NodePtr = std::shared_ptr<const Node>;

  static double eval(const Node& n, const ExprEnv& e) {
    auto k = [&](std::size_t i) { return eval(*n.kids[i], e); };
    switch (n.op) {
      case Op::Const: return n.value;
      case Op::VarX1: return e.x[0];
      case Op::VarX2: return e.dim == 2 ? e.x[1] : 0.0;
      case Op::VarZ1: return e.z[0];
      case Op::VarZ2: return e.dim == 2 ? e.z[1] : 0.0;
      case Op::VarR: return norm(e.x, e.dim);
      case Op::VarRz: return norm(e.z, e.dim);
      case Op::VarU: return e.u;
      case Op::Add: return k(0) + k(1);
      case Op::Sub: return k(0) - k(1);
      case Op::Mul: return k(0) * k(1);
      case Op::Div: return k(0) / k(1);
      case Op::Pow: return std::pow(k(0), k(1));
      case Op::Neg: return -k(0);
      case Op::Exp: return std::exp(k(0));
      case Op::Abs: return std::abs(k(0));
      case Op::Sqrt: return std::sqrt(k(0));
      case Op::Sin: return std::sin(k(0));
      case Op::Cos: return std::cos(k(0));
      case Op::Log: return std::log(k(0));
      case Op::Min: {
        double m = k(0);
        for (std::size_t i = 1; i < n.kids.size(); ++i) m = std::min(m, k(i));
        return m;
      }
      case Op::Max: {
        double m = k(0);
        for (std::size_t i = 1; i < n.kids.size(); ++i) m = std::max(m, k(i));
        return m;
      }
      case Op::Indicator: {
        const double v = k(0);
        if (n.kids.size() == 2) return v <= k(1) ? 1.0 : 0.0;
        return (k(1) <= v && v <= k(2)) ? 1.0 : 0.0;
      }
      case Op::IndicatorOpen: {
        const double v = k(0);
        return (k(1) <= v && v < k(2)) ? 1.0 : 0.0;
      }
    }
    return 0.0;
  }

  struct Parser {
    const std::string& s;
    const std::set<std::string>& allowed;
    std::string where;
    std::size_t pos = 0;
    std::set<std::string> used;

    [[noreturn]] void error(const std::string& msg, std::size_t at) const {
      fail(ErrorCode::ConfigParse, where + ", column " + std::to_string(at + 1) + ": " + msg + " in '" + s + "'");
    }

    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool eat(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    static NodePtr make(Op op, std::vector<NodePtr> kids = {}, double v = 0.0) {
      return std::make_shared<const Node>(Node{op, v, std::move(kids)});
    }

    NodePtr parse_all() {
      NodePtr n = expr();
      skip();
      if (pos != s.size()) error(std::string("unexpected '") + s[pos] + "'", pos);
      return n;
    }

    NodePtr expr() {
      NodePtr lhs = term();
      for (;;) {
        if (eat('+')) lhs = make(Op::Add, {lhs, term()});
        else if (eat('-')) lhs = make(Op::Sub, {lhs, term()});
        else return lhs;
      }
    }

    NodePtr term() {
      NodePtr lhs = unary();
      for (;;) {
        if (eat('*')) lhs = make(Op::Mul, {lhs, unary()});
        else if (eat('/')) lhs = make(Op::Div, {lhs, unary()});
        else return lhs;
      }
    }

    NodePtr unary() {
      if (eat('-')) return make(Op::Neg, {unary()});
      if (eat('+')) return unary();
      return power();
    }

    NodePtr power() {
      NodePtr base = atom();
      if (eat('^')) return make(Op::Pow, {base, unary()});
      return base;
    }

    NodePtr atom() {
      skip();
      if (pos >= s.size()) error("unexpected end of expression", pos);
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        NodePtr n = expr();
        if (!eat(')')) error("expected ')'", pos);
        return n;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
      error(std::string("unexpected '") + c + "'", pos);
    }

    NodePtr number() {
      const std::size_t start = pos;
      while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.')) ++pos;
      if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
        std::size_t p = pos + 1;
        if (p < s.size() && (s[p] == '+' || s[p] == '-')) ++p;
        if (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) {
          pos = p;
          while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        }
      }
      const std::string text = s.substr(start, pos - start);
      double v = 0.0;
      const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
      if (res.ec != std::errc() || res.ptr != text.data() + text.size()) error("malformed number '" + text + "'", start);
      return make(Op::Const, {}, v);
    }

    NodePtr identifier() {
      const std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
      const std::string name = s.substr(start, pos - start);
      skip();
      if (pos < s.size() && s[pos] == '(') {
        ++pos;
        std::vector<NodePtr> args{expr()};
        while (eat(',')) args.push_back(expr());
        if (!eat(')')) error("expected ')' after arguments of " + name, pos);
        return function(name, std::move(args), start);
      }
      if (name == "pi") return make(Op::Const, {}, M_PI);
      if (!allowed.count(name)) error("unknown identifier '" + name + "'", start);
      used.insert(name);
      if (name == "x" || name == "x1") return make(Op::VarX1);
      if (name == "x2") return make(Op::VarX2);
      if (name == "z" || name == "z1") return make(Op::VarZ1);
      if (name == "z2") return make(Op::VarZ2);
      if (name == "r") return make(Op::VarR);
      if (name == "rz") return make(Op::VarRz);
      if (name == "u") return make(Op::VarU);
      error("identifier '" + name + "' has no value", start);
    }

    NodePtr function(const std::string& name, std::vector<NodePtr> args, std::size_t at) {
      auto arity = [&](std::size_t lo, std::size_t hi) {
        if (args.size() < lo || args.size() > hi)
          error(name + " takes " + (lo == hi ? std::to_string(lo) : std::to_string(lo) + ".." + std::to_string(hi)) +
                    " arguments, got " + std::to_string(args.size()),
                at);
      };
      struct Unary {
        const char* name;
        Op op;
      };
      static const Unary unary_fns[] = {{"exp", Op::Exp}, {"abs", Op::Abs}, {"sqrt", Op::Sqrt},
                                        {"sin", Op::Sin}, {"cos", Op::Cos}, {"log", Op::Log}};
      for (const auto& f : unary_fns)
        if (name == f.name) {
          arity(1, 1);
          return make(f.op, std::move(args));
        }
      if (name == "min" || name == "max") {
        arity(2, 64);
        return make(name == "min" ? Op::Min : Op::Max, std::move(args));
      }
      if (name == "indicator") {
        arity(2, 3);
        return make(Op::Indicator, std::move(args));
      }
      if (name == "indicator_open") {
        arity(3, 3);
        return make(Op::IndicatorOpen, std::move(args));
      }
      error("unknown function '" + name + "'", at);
    }
  };

  NodePtr root_;
  std::string source_;
  std::set<std::string> uses_;
};

}  // namespace nls
