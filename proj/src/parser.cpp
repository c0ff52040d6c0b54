#include <algorithm>
#include <map>
#include <set>

#include "lexer.hpp"
#include "realc/ast.hpp"

namespace realc {

using detail::Tok;
using detail::Token;

namespace {

enum class Mode { body, pre, post, open };

// One conjunct of a predicate before it is classified into spec clauses.
struct Atom {
  enum Kind { formula, in_range, plusminus } kind = formula;
  FormulaPtr f;
  ExprPtr subject;  // in_range / plusminus: left operand
  ExprPtr a, b;     // in_range: bounds; plusminus: a = magnitude
  int line = 0, col = 0;
};

struct PendingCall {
  std::string caller, callee;
  std::size_t arity;
  int line, col;
};

const std::set<std::string> kReserved = {"def",     "val",  "if",   "else", "require",
                                         "ensuring", "sqrt", "Real", "true", "false"};

std::optional<CmpOp> cmp_of(Tok t) {
  switch (t) {
    case Tok::lt: return CmpOp::lt;
    case Tok::le: return CmpOp::le;
    case Tok::gt: return CmpOp::gt;
    case Tok::ge: return CmpOp::ge;
    default: return std::nullopt;
  }
}

std::optional<Rational> const_value(const ExprPtr& e) {
  if (!free_vars(e).empty() || contains_kind(e, ExprKind::actual) || contains_kind(e, ExprKind::initial_error) ||
      contains_kind(e, ExprKind::call)) {
    return std::nullopt;
  }
  ExprPtr s = simplify(e);
  if (s->is_constant()) return s->value;
  return std::nullopt;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(detail::lex(src)) {}

  Program program() {
    Program p;
    if (peek().kind == Tok::end) throw SyntaxError("empty program", peek().line, peek().col);
    while (peek().kind != Tok::end) p.functions.push_back(function());
    check_program(p);
    return p;
  }

  ExprPtr standalone_expr() {
    mode_ = Mode::open;
    ExprPtr e = expr();
    expect(Tok::end, "end of input");
    return e;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Mode mode_ = Mode::body;
  std::set<std::string> params_;
  std::vector<std::string> scope_;
  std::string fn_name_;
  std::string result_name_ = "res";
  std::vector<PendingCall> calls_;

  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    next();
    return true;
  }
  [[noreturn]] void fail(const std::string& msg, const Token& at) const {
    throw SyntaxError(msg + ", found " + detail::describe(at), at.line, at.col);
  }
  const Token& expect(Tok k, const std::string& what) {
    if (peek().kind != k) fail("expected " + what, peek());
    return next();
  }
  bool keyword(const char* kw) const { return peek().kind == Tok::ident && peek().text == kw; }
  void expect_keyword(const char* kw) {
    if (!keyword(kw)) fail(std::string("expected '") + kw + "'", peek());
    next();
  }
  std::string identifier(const std::string& what) {
    const Token& t = expect(Tok::ident, what);
    if (kReserved.count(t.text)) throw SyntaxError("'" + t.text + "' is reserved", t.line, t.col);
    return t.text;
  }

  FunctionDef function() {
    FunctionDef f;
    const Token& def = peek();
    expect_keyword("def");
    f.line = def.line;
    f.name = identifier("function name");
    fn_name_ = f.name;
    expect(Tok::lparen, "'('");
    if (peek().kind != Tok::rparen) {
      do {
        const Token& at = peek();
        std::string p = identifier("parameter name");
        expect(Tok::colon, "':'");
        expect_keyword("Real");
        if (std::find(f.params.begin(), f.params.end(), p) != f.params.end()) {
          throw SemanticError("duplicate parameter '" + p + "'", at.line, at.col);
        }
        if (p == "res") throw SemanticError("'res' is reserved for the result", at.line, at.col);
        f.params.push_back(p);
      } while (accept(Tok::comma));
    }
    expect(Tok::rparen, "')'");
    expect(Tok::colon, "':'");
    expect_keyword("Real");
    expect(Tok::assign, "'='");
    expect(Tok::lbrace, "'{'");
    params_ = {f.params.begin(), f.params.end()};

    if (keyword("require")) {
      const Token& req = next();
      expect(Tok::lparen, "'('");
      mode_ = Mode::pre;
      auto atoms = pred();
      expect(Tok::rparen, "')'");
      accept(Tok::semi);
      f.pre = classify(atoms, false);
      for (const auto& p : f.params) {
        auto r = std::find_if(f.pre.begin(), f.pre.end(),
                              [&](const SpecClause& c) { return c.kind == ClauseKind::range_bound && c.var == p; });
        if (r == f.pre.end() || !r->lo || !r->hi) {
          throw SemanticError("parameter '" + p + "' of '" + f.name + "' needs a lower and an upper bound",
                              req.line, req.col);
        }
      }
    } else if (!f.params.empty()) {
      throw SemanticError("function '" + f.name + "' has no require clause bounding its parameters", def.line,
                          def.col);
    }

    mode_ = Mode::body;
    scope_.clear();
    f.body = block_body();
    expect(Tok::rbrace, "'}'");

    if (keyword("ensuring")) {
      next();
      expect(Tok::lparen, "'('");
      result_name_ = identifier("result name");
      expect(Tok::arrow, "'=>'");
      mode_ = Mode::post;
      auto atoms = pred();
      expect(Tok::rparen, "')'");
      f.post = classify(atoms, true);
      f.has_post = true;
      result_name_ = "res";
    }
    mode_ = Mode::body;
    return f;
  }

  // stmts := ("val" ID (":" "Real")? "=" expr ";")* expr
  ExprPtr block_body() {
    if (keyword("val")) {
      next();
      std::string name = identifier("variable name");
      if (accept(Tok::colon)) expect_keyword("Real");
      expect(Tok::assign, "'='");
      ExprPtr bound = expr();
      expect(Tok::semi, "';'");
      scope_.push_back(name);
      ExprPtr rest = block_body();
      scope_.pop_back();
      return ex::let(name, bound, rest);
    }
    return expr();
  }

  ExprPtr expr() {
    if (keyword("if")) {
      next();
      expect(Tok::lparen, "'('");
      ExprPtr lhs = expr();
      const Token& op = peek();
      if (op.kind == Tok::eq || op.kind == Tok::ne) {
        throw SemanticError("equality conditions are not allowed; use <, <=, > or >=", op.line, op.col);
      }
      auto cmp = cmp_of(op.kind);
      if (!cmp) fail("expected a comparison operator", op);
      next();
      ExprPtr rhs = expr();
      expect(Tok::rparen, "')'");
      ExprPtr then_e = expr();
      expect_keyword("else");
      ExprPtr else_e = expr();
      return ex::ite(lhs, *cmp, rhs, then_e, else_e);
    }
    return additive();
  }

  ExprPtr additive() {
    ExprPtr e = multiplicative();
    for (;;) {
      if (accept(Tok::plus)) {
        e = ex::add(e, multiplicative());
      } else if (accept(Tok::minus)) {
        e = ex::sub(e, multiplicative());
      } else {
        return e;
      }
    }
  }

  ExprPtr multiplicative() {
    ExprPtr e = unary();
    for (;;) {
      if (accept(Tok::star)) {
        e = ex::mul(e, unary());
      } else if (accept(Tok::slash)) {
        e = ex::div(e, unary());
      } else {
        return e;
      }
    }
  }

  ExprPtr unary() {
    if (accept(Tok::minus)) {
      ExprPtr a = unary();
      if (a->is_constant()) {
        // Negative literals stay literals.
        std::string lit = a->literal.empty() ? "" : a->literal[0] == '-' ? a->literal.substr(1) : "-" + a->literal;
        return ex::constant(-a->value, lit);
      }
      return ex::neg(a);
    }
    return primary();
  }

  ExprPtr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::number: {
        next();
        return ex::constant(parse_decimal(t.text), t.text);
      }
      case Tok::lparen: {
        next();
        ExprPtr e = expr();
        expect(Tok::rparen, "')'");
        return e;
      }
      case Tok::lbrace: {
        next();
        std::size_t depth = scope_.size();
        ExprPtr e = block_body();
        scope_.resize(depth);
        expect(Tok::rbrace, "'}'");
        return e;
      }
      case Tok::tilde:
      case Tok::bang: {
        next();
        const Token& id = expect(Tok::ident, "a variable after '" + t.text + "'");
        if (mode_ != Mode::post && mode_ != Mode::open) {
          throw SemanticError("'" + t.text + id.text + "' may only appear in a postcondition", t.line, t.col);
        }
        std::string name = id.text == result_name_ ? "res" : id.text;
        if (mode_ == Mode::post && name != "res" && !params_.count(name)) {
          throw SemanticError("unknown variable '" + id.text + "'", id.line, id.col);
        }
        if (t.kind == Tok::bang) {
          if (name == "res") throw SemanticError("'!res' is meaningless; use 'res +/- e'", t.line, t.col);
          return ex::initial_error(name);
        }
        return ex::actual(name);
      }
      case Tok::ident: {
        if (t.text == "sqrt" && peek(1).kind == Tok::lparen) {
          next();
          next();
          ExprPtr a = expr();
          expect(Tok::rparen, "')'");
          return ex::sqrt(a);
        }
        if (kReserved.count(t.text)) fail("expected an expression", t);
        next();
        if (peek().kind == Tok::lparen) return call(t);
        return variable(t);
      }
      default: fail("expected an expression", t);
    }
  }

  ExprPtr call(const Token& name) {
    next();  // (
    std::vector<ExprPtr> args;
    if (peek().kind != Tok::rparen) {
      do args.push_back(expr());
      while (accept(Tok::comma));
    }
    expect(Tok::rparen, "')'");
    if (mode_ != Mode::body && mode_ != Mode::open) {
      throw SemanticError("function calls are not allowed in require or ensuring clauses", name.line, name.col);
    }
    calls_.push_back({fn_name_, name.text, args.size(), name.line, name.col});
    return ex::call(name.text, std::move(args));
  }

  ExprPtr variable(const Token& t) {
    switch (mode_) {
      case Mode::open: return ex::var(t.text);
      case Mode::post:
        if (t.text == result_name_) return ex::var("res");
        [[fallthrough]];
      case Mode::pre:
        if (params_.count(t.text)) return ex::var(t.text);
        break;
      case Mode::body:
        if (params_.count(t.text) || std::find(scope_.begin(), scope_.end(), t.text) != scope_.end()) {
          return ex::var(t.text);
        }
        break;
    }
    throw SemanticError("unknown variable '" + t.text + "'", t.line, t.col);
  }

  // ---- predicates

  std::vector<Atom> pred() {
    std::vector<std::vector<Atom>> alts{conjunction()};
    while (accept(Tok::or_)) alts.push_back(conjunction());
    if (alts.size() == 1) return alts[0];
    std::vector<FormulaPtr> parts;
    for (const auto& a : alts) parts.push_back(as_formula(a));
    Atom out;
    out.f = fm::disj(std::move(parts));
    return {out};
  }

  std::vector<Atom> conjunction() {
    std::vector<Atom> out;
    do {
      auto more = pred_unary();
      out.insert(out.end(), more.begin(), more.end());
    } while (accept(Tok::and_));
    return out;
  }

  std::vector<Atom> pred_unary() {
    if (peek().kind == Tok::bang && peek(1).kind == Tok::lparen) {
      next();
      next();
      auto inner = pred();
      expect(Tok::rparen, "')'");
      Atom a;
      a.f = fm::negation(as_formula(inner));
      return {a};
    }
    if (peek().kind == Tok::lparen) {
      std::size_t save = pos_;
      try {
        return {atom()};
      } catch (const SyntaxError&) {
        pos_ = save;
      }
      next();
      auto inner = pred();
      expect(Tok::rparen, "')'");
      return inner;
    }
    return {atom()};
  }

  Atom atom() {
    const Token& start = peek();
    Atom a;
    a.line = start.line;
    a.col = start.col;
    if (keyword("true")) {
      next();
      a.f = fm::truth();
      return a;
    }
    if (start.kind == Tok::ident && peek(1).kind == Tok::dot) {
      ExprPtr v = (next(), variable(start));
      next();  // .
      if (!keyword("in")) fail("expected 'in'", peek());
      next();
      expect(Tok::lparen, "'('");
      a.kind = Atom::in_range;
      a.subject = v;
      a.a = expr();
      expect(Tok::comma, "','");
      a.b = expr();
      expect(Tok::rparen, "')'");
      return a;
    }
    ExprPtr lhs = expr();
    const Token& op = peek();
    if (op.kind == Tok::plusminus) {
      next();
      a.kind = Atom::plusminus;
      a.subject = lhs;
      a.a = expr();
      return a;
    }
    if (op.kind == Tok::eq || op.kind == Tok::ne) {
      throw SemanticError("equality comparisons are not allowed", op.line, op.col);
    }
    auto cmp = cmp_of(op.kind);
    if (!cmp) fail("expected a comparison", op);
    next();
    a.f = fm::cmp(lhs, *cmp, expr());
    return a;
  }

  FormulaPtr as_formula(const std::vector<Atom>& atoms) {
    std::vector<FormulaPtr> parts;
    for (const auto& a : atoms) {
      switch (a.kind) {
        case Atom::formula: parts.push_back(a.f); break;
        case Atom::in_range:
          parts.push_back(fm::conj({fm::cmp(a.a, CmpOp::lt, a.subject), fm::cmp(a.subject, CmpOp::lt, a.b)}));
          break;
        case Atom::plusminus:
          throw SemanticError("'+/-' may only appear as a top-level conjunct", a.line, a.col);
      }
    }
    return fm::conj(std::move(parts));
  }

  // ---- spec clauses

  static void tighten(SpecClause& c, const std::optional<Rational>& lo, bool lo_strict,
                      const std::optional<Rational>& hi, bool hi_strict) {
    if (lo) {
      if (!c.lo || *lo > *c.lo) {
        c.lo = lo;
        c.lo_strict = lo_strict;
      } else if (*lo == *c.lo) {
        c.lo_strict = c.lo_strict || lo_strict;
      }
    }
    if (hi) {
      if (!c.hi || *hi < *c.hi) {
        c.hi = hi;
        c.hi_strict = hi_strict;
      } else if (*hi == *c.hi) {
        c.hi_strict = c.hi_strict || hi_strict;
      }
    }
  }

  bool bound_target(const ExprPtr& e, bool post) const {
    if (e->kind != ExprKind::variable) return false;
    return post ? e->name == "res" : params_.count(e->name) > 0;
  }

  Spec classify(const std::vector<Atom>& atoms, bool post) {
    Spec out;
    std::map<std::string, std::size_t> range_at;
    std::set<std::string> noisy;
    auto add_bound = [&](const std::string& var, std::optional<Rational> lo, bool ls, std::optional<Rational> hi,
                         bool hs) {
      auto it = range_at.find(var);
      if (it == range_at.end()) {
        range_at[var] = out.size();
        out.push_back(SpecClause::range(var, std::nullopt, std::nullopt));
        it = range_at.find(var);
      }
      tighten(out[it->second], lo, ls, hi, hs);
    };

    for (const auto& a : atoms) {
      switch (a.kind) {
        case Atom::in_range: {
          auto lo = const_value(a.a), hi = const_value(a.b);
          if (!lo || !hi) throw SemanticError("bounds of 'in' must be constants", a.line, a.col);
          if (!(*lo < *hi)) throw SemanticError("empty range: lower bound must be below upper bound", a.line, a.col);
          if (bound_target(a.subject, post)) {
            add_bound(a.subject->name, lo, true, hi, true);
          } else {
            out.push_back(SpecClause::constraint_of(as_formula({a})));
          }
          break;
        }
        case Atom::plusminus: {
          if (!bound_target(a.subject, post)) {
            throw SemanticError(post ? "'+/-' in a postcondition applies to the result"
                                     : "'+/-' must follow a parameter name",
                                a.line, a.col);
          }
          const std::string& v = a.subject->name;
          if (!noisy.insert(v).second) {
            throw SemanticError("duplicate uncertainty on '" + v + "'", a.line, a.col);
          }
          out.push_back(noise_clause(v, a, post));
          break;
        }
        case Atom::formula: {
          const FormulaPtr& f = a.f;
          if (f->kind == FormulaKind::truth) break;
          if (f->kind == FormulaKind::cmp) {
            bool l = bound_target(f->lhs, post), r = bound_target(f->rhs, post);
            auto lc = const_value(f->lhs), rc = const_value(f->rhs);
            if (l && rc) {
              bool strict = is_strict(f->op);
              if (f->op == CmpOp::lt || f->op == CmpOp::le) add_bound(f->lhs->name, std::nullopt, false, rc, strict);
              else add_bound(f->lhs->name, rc, strict, std::nullopt, false);
              break;
            }
            if (r && lc) {
              bool strict = is_strict(f->op);
              if (f->op == CmpOp::lt || f->op == CmpOp::le) add_bound(f->rhs->name, lc, strict, std::nullopt, false);
              else add_bound(f->rhs->name, std::nullopt, false, lc, strict);
              break;
            }
          }
          out.push_back(SpecClause::constraint_of(f));
          break;
        }
      }
    }
    for (const auto& c : out) {
      if (c.kind == ClauseKind::range_bound && c.lo && c.hi && !(*c.lo < *c.hi)) {
        throw SemanticError("empty range for '" + c.var + "'", atoms.front().line, atoms.front().col);
      }
    }
    return out;
  }

  SpecClause noise_clause(const std::string& v, const Atom& a, bool post) {
    const ExprPtr& m = a.a;
    if (auto k = const_value(m)) {
      if (sgn(*k) < 0) throw SemanticError("uncertainty magnitude must be non-negative", a.line, a.col);
      return SpecClause::abs_noise(v, ex::constant(*k, m->is_constant() ? m->literal : ""));
    }
    if (m->kind == ExprKind::mul) {
      for (int i = 0; i < 2; ++i) {
        const ExprPtr& x = m->args[i];
        if (x->kind == ExprKind::variable && x->name == v) {
          if (auto f = const_value(m->args[1 - i])) return SpecClause::rel_noise(v, *f);
        }
      }
    }
    if (post && free_vars(m).empty() && !contains_kind(m, ExprKind::actual)) {
      return SpecClause::abs_noise(v, m);
    }
    throw SemanticError("uncertainty must be a constant k, a relative bound m * " + v +
                            (post ? ", or an expression over constants and !x" : ""),
                        a.line, a.col);
  }

  void check_program(const Program& p) {
    std::map<std::string, const FunctionDef*> byname;
    for (const auto& f : p.functions) {
      if (!byname.emplace(f.name, &f).second) {
        throw SemanticError("duplicate function '" + f.name + "'", f.line, 1);
      }
    }
    for (const auto& c : calls_) {
      auto it = byname.find(c.callee);
      if (it == byname.end()) throw SemanticError("unknown function '" + c.callee + "'", c.line, c.col);
      if (it->second->params.size() != c.arity) {
        throw SemanticError("'" + c.callee + "' expects " + std::to_string(it->second->params.size()) +
                                " argument(s), got " + std::to_string(c.arity),
                            c.line, c.col);
      }
      if (c.callee == c.caller) throw CycleError("recursive call to '" + c.callee + "'", c.line, c.col);
    }
    order_functions(p);  // throws CycleError on mutual recursion
  }
};

}  // namespace

Program parse(std::string_view source) {
  Parser ps(source);
  return ps.program();
}

ExprPtr parse_expr(std::string_view source) {
  Parser ps(source);
  return ps.standalone_expr();
}

}  // namespace realc
