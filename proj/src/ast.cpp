#include <algorithm>
#include <queue>

#include "realc/ast.hpp"

namespace realc {

SpecClause SpecClause::range(std::string var, std::optional<Rational> lo, std::optional<Rational> hi, bool lo_strict,
                             bool hi_strict) {
  SpecClause c;
  c.kind = ClauseKind::range_bound;
  c.var = std::move(var);
  c.lo = std::move(lo);
  c.hi = std::move(hi);
  c.lo_strict = lo_strict;
  c.hi_strict = hi_strict;
  return c;
}

SpecClause SpecClause::abs_noise(std::string var, ExprPtr magnitude) {
  SpecClause c;
  c.kind = ClauseKind::abs_uncertainty;
  c.var = std::move(var);
  c.magnitude = std::move(magnitude);
  return c;
}

SpecClause SpecClause::rel_noise(std::string var, const Rational& factor) {
  SpecClause c;
  c.kind = ClauseKind::rel_uncertainty;
  c.var = std::move(var);
  c.magnitude = ex::constant(factor);
  return c;
}

SpecClause SpecClause::constraint_of(FormulaPtr f) {
  SpecClause c;
  c.kind = ClauseKind::constraint;
  c.formula = std::move(f);
  return c;
}

std::optional<Interval> FunctionDef::range_of(const std::string& var, bool in_post) const {
  for (const auto& c : in_post ? post : pre) {
    if (c.kind == ClauseKind::range_bound && c.var == var && c.lo && c.hi) return Interval(*c.lo, *c.hi);
  }
  return std::nullopt;
}

const SpecClause* FunctionDef::uncertainty_of(const std::string& var) const {
  for (const auto& c : pre) {
    if ((c.kind == ClauseKind::abs_uncertainty || c.kind == ClauseKind::rel_uncertainty) && c.var == var) return &c;
  }
  return nullptr;
}

std::vector<FormulaPtr> FunctionDef::pre_constraints() const {
  std::vector<FormulaPtr> out;
  for (const auto& c : pre) {
    if (c.kind == ClauseKind::constraint) out.push_back(c.formula);
  }
  return out;
}

std::set<std::string> FunctionDef::callees() const {
  std::set<std::string> out;
  std::vector<const Expr*> stack{body.get()};
  std::set<const Expr*> seen;
  while (!stack.empty()) {
    const Expr* e = stack.back();
    stack.pop_back();
    if (!seen.insert(e).second) continue;
    if (e->kind == ExprKind::call) out.insert(e->name);
    for (const auto& a : e->args) stack.push_back(a.get());
  }
  return out;
}

const FunctionDef* Program::find(const std::string& name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::map<std::string, std::set<std::string>> Program::call_graph() const {
  std::map<std::string, std::set<std::string>> g;
  for (const auto& f : functions) g[f.name] = f.callees();
  return g;
}

SourceError::SourceError(const std::string& what, int line, int col)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + what), line(line), col(col) {}

Program order_functions(const Program& p) {
  const std::size_t n = p.functions.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[p.functions[i].name] = i;

  // Kahn's algorithm; among ready functions pick the earliest in source order.
  std::vector<std::size_t> pending(n, 0);
  std::vector<std::vector<std::size_t>> callers(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& c : p.functions[i].callees()) {
      auto it = index.find(c);
      if (it == index.end()) continue;  // unknown callee; the parser reports those
      if (it->second == i) {
        throw CycleError("recursive call to '" + c + "'", p.functions[i].line, 1);
      }
      ++pending[i];
      callers[it->second].push_back(i);
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i] == 0) ready.push(i);
  }
  Program out;
  while (!ready.empty()) {
    std::size_t i = ready.top();
    ready.pop();
    out.functions.push_back(p.functions[i]);
    for (std::size_t c : callers[i]) {
      if (--pending[c] == 0) ready.push(c);
    }
  }
  if (out.functions.size() != n) {
    std::string names;
    int line = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pending[i] == 0) continue;
      if (!names.empty()) names += ", ";
      names += p.functions[i].name;
      if (!line) line = p.functions[i].line;
    }
    throw CycleError("recursive calls among " + names, line, 1);
  }
  return out;
}

FunctionDef add_default_roundoff(const FunctionDef& f, const PrecisionSpec& prec) {
  FunctionDef out = f;
  for (const auto& p : f.params) {
    if (f.uncertainty_of(p)) continue;
    auto r = f.range_of(p);
    if (!r) continue;
    Rational m = prec.epsilon * max(abs(r->lo()), abs(r->hi()));
    out.pre.push_back(SpecClause::abs_noise(p, ex::constant(m)));
  }
  return out;
}

namespace {

std::string num(const Rational& q) { return to_source(ex::constant(q)); }

bool same_clause(const SpecClause& a, const SpecClause& b) {
  if (a.kind != b.kind || a.var != b.var) return false;
  switch (a.kind) {
    case ClauseKind::range_bound:
      return a.lo == b.lo && a.hi == b.hi && (!a.lo || a.lo_strict == b.lo_strict) &&
             (!a.hi || a.hi_strict == b.hi_strict);
    case ClauseKind::abs_uncertainty:
    case ClauseKind::rel_uncertainty: return structurally_equal(a.magnitude, b.magnitude);
    case ClauseKind::constraint: return structurally_equal(a.formula, b.formula);
  }
  return false;
}

bool same_spec(const Spec& a, const Spec& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_clause(a[i], b[i])) return false;
  }
  return true;
}

}  // namespace

std::string to_source(const SpecClause& c) {
  switch (c.kind) {
    case ClauseKind::range_bound: {
      if (c.lo && c.hi && c.lo_strict && c.hi_strict) return c.var + ".in(" + num(*c.lo) + ", " + num(*c.hi) + ")";
      std::string s;
      if (c.lo) s = num(*c.lo) + (c.lo_strict ? " < " : " <= ") + c.var;
      if (c.hi) s += (s.empty() ? "" : " && ") + c.var + (c.hi_strict ? " < " : " <= ") + num(*c.hi);
      return s.empty() ? "true" : s;
    }
    case ClauseKind::abs_uncertainty: return c.var + " +/- " + to_source(c.magnitude);
    case ClauseKind::rel_uncertainty: return c.var + " +/- " + to_source(c.magnitude) + " * " + c.var;
    case ClauseKind::constraint: {
      std::string s = to_source(c.formula);
      return c.formula->kind == FormulaKind::disj ? "(" + s + ")" : s;
    }
  }
  return "?";
}

std::string to_source(const Spec& s) {
  std::string out;
  for (const auto& c : s) {
    if (!out.empty()) out += " && ";
    out += to_source(c);
  }
  return out;
}

std::string to_source(const FunctionDef& f) {
  std::string s = "def " + f.name + "(";
  for (std::size_t i = 0; i < f.params.size(); ++i) s += (i ? ", " : "") + f.params[i] + ": Real";
  s += "): Real = {\n";
  if (!f.pre.empty()) s += "  require(" + to_source(f.pre) + ")\n";
  ExprPtr cur = f.body;
  while (cur->kind == ExprKind::let) {
    s += "  val " + cur->name + " = " + to_source(cur->args[0]) + ";\n";
    cur = cur->args[1];
  }
  s += "  " + to_source(cur) + "\n}";
  if (f.has_post) s += " ensuring(res => " + (f.post.empty() ? std::string("true") : to_source(f.post)) + ")";
  return s + "\n";
}

std::string to_source(const Program& p) {
  std::string s;
  for (std::size_t i = 0; i < p.functions.size(); ++i) s += (i ? "\n" : "") + to_source(p.functions[i]);
  return s;
}

bool same_ast(const Program& a, const Program& b) {
  if (a.functions.size() != b.functions.size()) return false;
  for (std::size_t i = 0; i < a.functions.size(); ++i) {
    const auto& f = a.functions[i];
    const auto& g = b.functions[i];
    if (f.name != g.name || f.params != g.params || f.has_post != g.has_post) return false;
    if (!same_spec(f.pre, g.pre) || !same_spec(f.post, g.post)) return false;
    if (!structurally_equal(f.body, g.body)) return false;
  }
  return true;
}

}  // namespace realc
