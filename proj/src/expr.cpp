#include "realc/expr.hpp"

#include <stdexcept>
#include <unordered_set>

#include "realc/interval.hpp"

namespace realc {

std::string to_string(CmpOp op) {
  switch (op) {
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::gt: return ">";
    case CmpOp::ge: return ">=";
  }
  return "?";
}

CmpOp negate(CmpOp op) {
  switch (op) {
    case CmpOp::lt: return CmpOp::ge;
    case CmpOp::le: return CmpOp::gt;
    case CmpOp::gt: return CmpOp::le;
    case CmpOp::ge: return CmpOp::lt;
  }
  return op;
}

CmpOp flip(CmpOp op) {
  switch (op) {
    case CmpOp::lt: return CmpOp::gt;
    case CmpOp::le: return CmpOp::ge;
    case CmpOp::gt: return CmpOp::lt;
    case CmpOp::ge: return CmpOp::le;
  }
  return op;
}

bool is_strict(CmpOp op) { return op == CmpOp::lt || op == CmpOp::gt; }

bool compare(const Rational& a, CmpOp op, const Rational& b) {
  switch (op) {
    case CmpOp::lt: return a < b;
    case CmpOp::le: return a <= b;
    case CmpOp::gt: return a > b;
    case CmpOp::ge: return a >= b;
  }
  return false;
}

namespace {

std::size_t mix(std::size_t h, std::size_t v) { return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)); }

std::size_t hash_rational(const Rational& q) {
  std::size_t h = mpz_get_ui(q.get_num_mpz_t());
  h = mix(h, static_cast<std::size_t>(sgn(q) + 1));
  h = mix(h, mpz_get_ui(q.get_den_mpz_t()));
  return mix(h, mpz_sizeinbase(q.get_num_mpz_t(), 2));
}

ExprPtr finish(Expr e) {
  std::size_t h = static_cast<std::size_t>(e.kind) * 1315423911u;
  if (e.kind == ExprKind::ite) h = mix(h, static_cast<std::size_t>(e.cmp));
  if (e.kind == ExprKind::constant) h = mix(h, hash_rational(e.value));
  if (!e.name.empty()) h = mix(h, std::hash<std::string>{}(e.name));
  for (const auto& a : e.args) h = mix(h, a->hash);
  e.hash = h;
  return std::make_shared<const Expr>(std::move(e));
}

Expr node(ExprKind kind, std::vector<ExprPtr> args) {
  Expr e;
  e.kind = kind;
  e.args = std::move(args);
  return e;
}

}  // namespace

namespace ex {

ExprPtr constant(const Rational& v, std::string literal) {
  Expr e;
  e.kind = ExprKind::constant;
  e.value = v;
  e.literal = std::move(literal);
  return finish(std::move(e));
}

ExprPtr var(const std::string& name) {
  Expr e;
  e.kind = ExprKind::variable;
  e.name = name;
  return finish(std::move(e));
}

ExprPtr actual(const std::string& name) {
  Expr e;
  e.kind = ExprKind::actual;
  e.name = name;
  return finish(std::move(e));
}

ExprPtr initial_error(const std::string& name) {
  Expr e;
  e.kind = ExprKind::initial_error;
  e.name = name;
  return finish(std::move(e));
}

ExprPtr add(ExprPtr a, ExprPtr b) { return finish(node(ExprKind::add, {std::move(a), std::move(b)})); }
ExprPtr sub(ExprPtr a, ExprPtr b) { return finish(node(ExprKind::sub, {std::move(a), std::move(b)})); }
ExprPtr mul(ExprPtr a, ExprPtr b) { return finish(node(ExprKind::mul, {std::move(a), std::move(b)})); }
ExprPtr div(ExprPtr a, ExprPtr b) { return finish(node(ExprKind::div, {std::move(a), std::move(b)})); }
ExprPtr neg(ExprPtr a) { return finish(node(ExprKind::neg, {std::move(a)})); }
ExprPtr sqrt(ExprPtr a) { return finish(node(ExprKind::sqrt, {std::move(a)})); }

ExprPtr let(const std::string& name, ExprPtr bound, ExprPtr body) {
  Expr e = node(ExprKind::let, {std::move(bound), std::move(body)});
  e.name = name;
  return finish(std::move(e));
}

ExprPtr ite(ExprPtr lhs, CmpOp op, ExprPtr rhs, ExprPtr then_e, ExprPtr else_e) {
  Expr e = node(ExprKind::ite, {std::move(lhs), std::move(rhs), std::move(then_e), std::move(else_e)});
  e.cmp = op;
  return finish(std::move(e));
}

ExprPtr call(const std::string& fn, std::vector<ExprPtr> args) {
  Expr e = node(ExprKind::call, std::move(args));
  e.name = fn;
  return finish(std::move(e));
}

ExprPtr make(ExprKind kind, std::vector<ExprPtr> args, const Expr& like) {
  Expr e = node(kind, std::move(args));
  e.cmp = like.cmp;
  e.name = like.name;
  e.value = like.value;
  e.literal = like.literal;
  return finish(std::move(e));
}

}  // namespace ex

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->hash != b->hash || a->kind != b->kind || a->args.size() != b->args.size()) return false;
  if (a->kind == ExprKind::constant && a->value != b->value) return false;
  if (a->kind == ExprKind::ite && a->cmp != b->cmp) return false;
  if (a->name != b->name) return false;
  for (std::size_t i = 0; i < a->args.size(); ++i) {
    if (!structurally_equal(a->args[i], b->args[i])) return false;
  }
  return true;
}

bool expr_less(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return false;
  if (a->kind != b->kind) return a->kind < b->kind;
  if (a->hash != b->hash) return a->hash < b->hash;
  if (a->kind == ExprKind::constant && a->value != b->value) return a->value < b->value;
  if (a->name != b->name) return a->name < b->name;
  if (a->cmp != b->cmp) return a->cmp < b->cmp;
  if (a->args.size() != b->args.size()) return a->args.size() < b->args.size();
  for (std::size_t i = 0; i < a->args.size(); ++i) {
    if (expr_less(a->args[i], b->args[i])) return true;
    if (expr_less(b->args[i], a->args[i])) return false;
  }
  return false;
}

namespace {

using Memo = std::unordered_map<const Expr*, ExprPtr>;

ExprPtr rebuild(const ExprPtr& e, std::vector<ExprPtr> args) {
  bool same = args.size() == e->args.size();
  for (std::size_t i = 0; same && i < args.size(); ++i) same = args[i] == e->args[i];
  if (same) return e;
  return ex::make(e->kind, std::move(args), *e);
}

ExprPtr substitute_rec(const ExprPtr& e, const Substitution& s, Memo& memo) {
  if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
  ExprPtr out;
  if (e->kind == ExprKind::variable) {
    auto it = s.find(e->name);
    out = it == s.end() ? e : it->second;
  } else if (e->kind == ExprKind::let && s.count(e->name)) {
    // The binding shadows the substituted name inside the body.
    Substitution inner = s;
    inner.erase(e->name);
    Memo inner_memo;
    out = rebuild(e, {substitute_rec(e->args[0], s, memo), substitute_rec(e->args[1], inner, inner_memo)});
  } else {
    std::vector<ExprPtr> args;
    args.reserve(e->args.size());
    for (const auto& a : e->args) args.push_back(substitute_rec(a, s, memo));
    out = rebuild(e, std::move(args));
  }
  memo.emplace(e.get(), out);
  return out;
}

ExprPtr inline_lets_rec(const ExprPtr& e, const Substitution& env, std::map<std::pair<const Expr*, std::size_t>, ExprPtr>& memo,
                        std::size_t env_id, std::size_t& next_env) {
  auto key = std::make_pair(e.get(), env_id);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  ExprPtr out;
  switch (e->kind) {
    case ExprKind::variable: {
      auto it = env.find(e->name);
      out = it == env.end() ? e : it->second;
      break;
    }
    case ExprKind::let: {
      ExprPtr bound = inline_lets_rec(e->args[0], env, memo, env_id, next_env);
      Substitution inner = env;
      inner[e->name] = bound;
      std::size_t inner_id = ++next_env;
      out = inline_lets_rec(e->args[1], inner, memo, inner_id, next_env);
      break;
    }
    default: {
      std::vector<ExprPtr> args;
      args.reserve(e->args.size());
      for (const auto& a : e->args) args.push_back(inline_lets_rec(a, env, memo, env_id, next_env));
      out = rebuild(e, std::move(args));
    }
  }
  memo.emplace(key, out);
  return out;
}

bool is_const(const ExprPtr& e, int v) { return e->kind == ExprKind::constant && e->value == v; }

ExprPtr simplify_rec(const ExprPtr& e, Memo& memo) {
  if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
  std::vector<ExprPtr> a;
  a.reserve(e->args.size());
  for (const auto& c : e->args) a.push_back(simplify_rec(c, memo));
  ExprPtr out;
  auto both_const = [&] { return a.size() == 2 && a[0]->is_constant() && a[1]->is_constant(); };
  switch (e->kind) {
    case ExprKind::add:
      if (both_const()) out = ex::constant(a[0]->value + a[1]->value);
      else if (is_const(a[0], 0)) out = a[1];
      else if (is_const(a[1], 0)) out = a[0];
      else if (expr_less(a[1], a[0])) out = ex::add(a[1], a[0]);
      else out = rebuild(e, a);
      break;
    case ExprKind::sub:
      if (both_const()) out = ex::constant(a[0]->value - a[1]->value);
      else if (is_const(a[1], 0)) out = a[0];
      else if (structurally_equal(a[0], a[1])) out = ex::constant(0);
      else if (is_const(a[0], 0)) out = simplify_rec(ex::neg(a[1]), memo);
      else out = rebuild(e, a);
      break;
    case ExprKind::mul:
      if (both_const()) out = ex::constant(a[0]->value * a[1]->value);
      else if (is_const(a[0], 0) || is_const(a[1], 0)) out = ex::constant(0);
      else if (is_const(a[0], 1)) out = a[1];
      else if (is_const(a[1], 1)) out = a[0];
      else if (expr_less(a[1], a[0])) out = ex::mul(a[1], a[0]);
      else out = rebuild(e, a);
      break;
    case ExprKind::div:
      if (both_const() && sgn(a[1]->value) != 0) out = ex::constant(a[0]->value / a[1]->value);
      else if (is_const(a[1], 1)) out = a[0];
      else if (is_const(a[0], 0) && a[1]->is_constant() && sgn(a[1]->value) != 0) out = a[0];
      else out = rebuild(e, a);
      break;
    case ExprKind::neg:
      if (a[0]->is_constant()) out = ex::constant(-a[0]->value);
      else if (a[0]->kind == ExprKind::neg) out = a[0]->args[0];
      else out = rebuild(e, a);
      break;
    case ExprKind::sqrt:
      if (a[0]->is_constant() && sgn(a[0]->value) >= 0) {
        Rational r = sqrt_down(a[0]->value, kSqrtBits);
        out = r * r == a[0]->value ? ex::constant(r) : rebuild(e, a);
      } else {
        out = rebuild(e, a);
      }
      break;
    case ExprKind::ite:
      if (a[0]->is_constant() && a[1]->is_constant()) {
        out = compare(a[0]->value, e->cmp, a[1]->value) ? a[2] : a[3];
      } else if (structurally_equal(a[2], a[3])) {
        out = a[2];
      } else {
        out = rebuild(e, a);
      }
      break;
    default:
      out = rebuild(e, a);
  }
  memo.emplace(e.get(), out);
  return out;
}

void free_vars_rec(const ExprPtr& e, std::set<std::string>& bound, std::set<std::string>& out,
                   std::unordered_set<const Expr*>& seen_closed) {
  switch (e->kind) {
    case ExprKind::variable:
      if (!bound.count(e->name)) out.insert(e->name);
      return;
    case ExprKind::let: {
      free_vars_rec(e->args[0], bound, out, seen_closed);
      bool was_bound = bound.count(e->name) > 0;
      bound.insert(e->name);
      std::unordered_set<const Expr*> fresh_seen;
      free_vars_rec(e->args[1], bound, out, fresh_seen);
      if (!was_bound) bound.erase(e->name);
      return;
    }
    default:
      if (bound.empty()) {
        if (!seen_closed.insert(e.get()).second) return;
      }
      for (const auto& a : e->args) free_vars_rec(a, bound, out, seen_closed);
  }
}

enum Prec { kTop = 0, kAdd = 1, kMul = 2, kUnary = 3, kAtom = 4 };

std::string constant_source(const Expr& e) {
  if (!e.literal.empty()) {
    return e.literal[0] == '-' ? "(" + e.literal + ")" : e.literal;
  }
  auto dec = exact_decimal(e.value);
  if (!dec) return "(" + e.value.get_num().get_str() + ".0 / " + e.value.get_den().get_str() + ".0)";
  const std::string& s = *dec;
  return s[0] == '-' ? "(" + s + ")" : s;
}

std::string print(const ExprPtr& e, int ctx);

std::string wrap(const std::string& s, int own, int ctx) { return own < ctx ? "(" + s + ")" : s; }

std::string print_let_chain(const ExprPtr& e) {
  std::string s;
  ExprPtr cur = e;
  while (cur->kind == ExprKind::let) {
    s += "val " + cur->name + " = " + print(cur->args[0], kTop) + "; ";
    cur = cur->args[1];
  }
  return s + print(cur, kTop);
}

std::string print(const ExprPtr& e, int ctx) {
  switch (e->kind) {
    case ExprKind::constant: return constant_source(*e);
    case ExprKind::variable: return e->name;
    case ExprKind::actual: return "~" + e->name;
    case ExprKind::initial_error: return "!" + e->name;
    case ExprKind::add: return wrap(print(e->args[0], kAdd) + " + " + print(e->args[1], kAdd + 1), kAdd, ctx);
    case ExprKind::sub: return wrap(print(e->args[0], kAdd) + " - " + print(e->args[1], kAdd + 1), kAdd, ctx);
    case ExprKind::mul: return wrap(print(e->args[0], kMul) + " * " + print(e->args[1], kMul + 1), kMul, ctx);
    case ExprKind::div: return wrap(print(e->args[0], kMul) + " / " + print(e->args[1], kMul + 1), kMul, ctx);
    case ExprKind::neg: return wrap("-" + print(e->args[0], kAtom), kUnary, ctx);
    case ExprKind::sqrt: return "sqrt(" + print(e->args[0], kTop) + ")";
    case ExprKind::let: return "{ " + print_let_chain(e) + " }";
    case ExprKind::ite: {
      std::string s = "if (" + print(e->args[0], kTop) + " " + to_string(e->cmp) + " " + print(e->args[1], kTop) +
                      ") " + print(e->args[2], kTop) + " else " + print(e->args[3], kTop);
      return ctx == kTop ? s : "(" + s + ")";
    }
    case ExprKind::call: {
      std::string s = e->name + "(";
      for (std::size_t i = 0; i < e->args.size(); ++i) {
        if (i) s += ", ";
        s += print(e->args[i], kTop);
      }
      return s + ")";
    }
  }
  return "?";
}

}  // namespace

ExprPtr substitute(const ExprPtr& e, const Substitution& s) {
  if (s.empty()) return e;
  Memo memo;
  return substitute_rec(e, s, memo);
}

ExprPtr inline_lets(const ExprPtr& e) {
  std::map<std::pair<const Expr*, std::size_t>, ExprPtr> memo;
  std::size_t next_env = 0;
  return inline_lets_rec(e, {}, memo, 0, next_env);
}

ExprPtr simplify(const ExprPtr& e) {
  Memo memo;
  return simplify_rec(e, memo);
}

std::set<std::string> free_vars(const ExprPtr& e) {
  std::set<std::string> bound, out;
  std::unordered_set<const Expr*> seen;
  free_vars_rec(e, bound, out, seen);
  return out;
}

bool contains_kind(const ExprPtr& e, ExprKind kind) {
  std::unordered_set<const Expr*> seen;
  std::vector<const Expr*> stack{e.get()};
  while (!stack.empty()) {
    const Expr* cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    if (cur->kind == kind) return true;
    for (const auto& a : cur->args) stack.push_back(a.get());
  }
  return false;
}

std::size_t dag_size(const ExprPtr& e) {
  std::unordered_set<const Expr*> seen;
  std::vector<const Expr*> stack{e.get()};
  while (!stack.empty()) {
    const Expr* cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    for (const auto& a : cur->args) stack.push_back(a.get());
  }
  return seen.size();
}

std::string to_source(const ExprPtr& e) {
  return print(e, kTop);
}

namespace fm {

FormulaPtr truth() {
  static const FormulaPtr t = std::make_shared<const Formula>(Formula{FormulaKind::truth, CmpOp::lt, nullptr, nullptr, {}});
  return t;
}

FormulaPtr falsity() {
  static const FormulaPtr f = std::make_shared<const Formula>(Formula{FormulaKind::falsity, CmpOp::lt, nullptr, nullptr, {}});
  return f;
}

FormulaPtr cmp(ExprPtr lhs, CmpOp op, ExprPtr rhs) {
  return std::make_shared<const Formula>(Formula{FormulaKind::cmp, op, std::move(lhs), std::move(rhs), {}});
}

FormulaPtr conj(std::vector<FormulaPtr> parts) {
  std::vector<FormulaPtr> kept;
  for (auto& p : parts) {
    if (p->kind == FormulaKind::truth) continue;
    if (p->kind == FormulaKind::falsity) return falsity();
    if (p->kind == FormulaKind::conj) {
      kept.insert(kept.end(), p->children.begin(), p->children.end());
    } else {
      kept.push_back(std::move(p));
    }
  }
  if (kept.empty()) return truth();
  if (kept.size() == 1) return kept[0];
  return std::make_shared<const Formula>(Formula{FormulaKind::conj, CmpOp::lt, nullptr, nullptr, std::move(kept)});
}

FormulaPtr disj(std::vector<FormulaPtr> parts) {
  std::vector<FormulaPtr> kept;
  for (auto& p : parts) {
    if (p->kind == FormulaKind::falsity) continue;
    if (p->kind == FormulaKind::truth) return truth();
    if (p->kind == FormulaKind::disj) {
      kept.insert(kept.end(), p->children.begin(), p->children.end());
    } else {
      kept.push_back(std::move(p));
    }
  }
  if (kept.empty()) return falsity();
  if (kept.size() == 1) return kept[0];
  return std::make_shared<const Formula>(Formula{FormulaKind::disj, CmpOp::lt, nullptr, nullptr, std::move(kept)});
}

FormulaPtr negation(FormulaPtr f) {
  if (f->kind == FormulaKind::truth) return falsity();
  if (f->kind == FormulaKind::falsity) return truth();
  return std::make_shared<const Formula>(Formula{FormulaKind::negation, CmpOp::lt, nullptr, nullptr, {std::move(f)}});
}

FormulaPtr within(ExprPtr e, const Rational& lo, const Rational& hi) {
  return conj({cmp(ex::constant(lo), CmpOp::le, e), cmp(e, CmpOp::le, ex::constant(hi))});
}

}  // namespace fm

FormulaPtr map_exprs(const FormulaPtr& f, const std::function<ExprPtr(const ExprPtr&)>& fn) {
  switch (f->kind) {
    case FormulaKind::truth:
    case FormulaKind::falsity: return f;
    case FormulaKind::cmp: return fm::cmp(fn(f->lhs), f->op, fn(f->rhs));
    case FormulaKind::conj:
    case FormulaKind::disj: {
      std::vector<FormulaPtr> parts;
      for (const auto& c : f->children) parts.push_back(map_exprs(c, fn));
      return f->kind == FormulaKind::conj ? fm::conj(std::move(parts)) : fm::disj(std::move(parts));
    }
    case FormulaKind::negation: return fm::negation(map_exprs(f->children[0], fn));
  }
  return f;
}

FormulaPtr substitute(const FormulaPtr& f, const Substitution& s) {
  return map_exprs(f, [&](const ExprPtr& e) { return substitute(e, s); });
}

std::set<std::string> free_vars(const FormulaPtr& f) {
  std::set<std::string> out;
  if (f->kind == FormulaKind::cmp) {
    auto l = free_vars(f->lhs), r = free_vars(f->rhs);
    out.insert(l.begin(), l.end());
    out.insert(r.begin(), r.end());
  }
  for (const auto& c : f->children) {
    auto v = free_vars(c);
    out.insert(v.begin(), v.end());
  }
  return out;
}

FormulaPtr to_nnf(const FormulaPtr& f, bool negated) {
  switch (f->kind) {
    case FormulaKind::truth: return negated ? fm::falsity() : f;
    case FormulaKind::falsity: return negated ? fm::truth() : f;
    case FormulaKind::cmp: return negated ? fm::cmp(f->lhs, negate(f->op), f->rhs) : f;
    case FormulaKind::negation: return to_nnf(f->children[0], !negated);
    case FormulaKind::conj:
    case FormulaKind::disj: {
      std::vector<FormulaPtr> parts;
      for (const auto& c : f->children) parts.push_back(to_nnf(c, negated));
      bool as_conj = (f->kind == FormulaKind::conj) != negated;
      return as_conj ? fm::conj(std::move(parts)) : fm::disj(std::move(parts));
    }
  }
  return f;
}

std::vector<FormulaPtr> conjuncts(const FormulaPtr& f) {
  if (f->kind == FormulaKind::truth) return {};
  if (f->kind == FormulaKind::conj) {
    std::vector<FormulaPtr> out;
    for (const auto& c : f->children) {
      auto sub = conjuncts(c);
      out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
  }
  return {f};
}

std::string to_source(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::truth: return "true";
    case FormulaKind::falsity: return "false";
    case FormulaKind::cmp: return to_source(f->lhs) + " " + to_string(f->op) + " " + to_source(f->rhs);
    case FormulaKind::conj:
    case FormulaKind::disj: {
      std::string sep = f->kind == FormulaKind::conj ? " && " : " || ";
      std::string s;
      for (std::size_t i = 0; i < f->children.size(); ++i) {
        if (i) s += sep;
        const auto& c = f->children[i];
        bool paren = c->kind == FormulaKind::conj || c->kind == FormulaKind::disj;
        s += paren ? "(" + to_source(c) + ")" : to_source(c);
      }
      return s;
    }
    case FormulaKind::negation: return "!(" + to_source(f->children[0]) + ")";
  }
  return "?";
}

bool structurally_equal(const FormulaPtr& a, const FormulaPtr& b) {
  if (a == b) return true;
  if (a->kind != b->kind || a->children.size() != b->children.size()) return false;
  if (a->kind == FormulaKind::cmp) {
    return a->op == b->op && structurally_equal(a->lhs, b->lhs) && structurally_equal(a->rhs, b->rhs);
  }
  for (std::size_t i = 0; i < a->children.size(); ++i) {
    if (!structurally_equal(a->children[i], b->children[i])) return false;
  }
  return true;
}

}  // namespace realc
