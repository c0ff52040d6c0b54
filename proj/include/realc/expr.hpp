#pragma once

// Immutable expression trees over the reals, shared as DAGs, plus the
// boolean formulas built from comparisons of them.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "realc/rational.hpp"

namespace realc {

enum class ExprKind {
  constant,
  variable,
  actual,         // ~x in postconditions
  initial_error,  // !x in postconditions
  add,
  sub,
  mul,
  div,
  neg,
  sqrt,
  let,   // name = args[0] in args[1]
  ite,   // if (args[0] cmp args[1]) args[2] else args[3]
  call,  // name(args...)
};

enum class CmpOp { lt, le, gt, ge };

std::string to_string(CmpOp op);
CmpOp negate(CmpOp op);
/// Same relation with operands swapped: a < b  <=>  b > a.
CmpOp flip(CmpOp op);
bool is_strict(CmpOp op);
/// Exact truth of `a op b`.
bool compare(const Rational& a, CmpOp op, const Rational& b);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind;
  CmpOp cmp = CmpOp::lt;   // ite only
  Rational value{0};       // constant only
  std::string name;        // variable / actual / initial_error / let / call
  std::string literal;     // source spelling of a constant, when it came from text
  std::vector<ExprPtr> args;
  std::size_t hash = 0;

  bool is_constant() const { return kind == ExprKind::constant; }
  bool is_leaf() const { return args.empty(); }
};

/// Builders. All return shared immutable nodes with the hash filled in.
namespace ex {
ExprPtr constant(const Rational& v, std::string literal = {});
ExprPtr var(const std::string& name);
ExprPtr actual(const std::string& name);
ExprPtr initial_error(const std::string& name);
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr div(ExprPtr a, ExprPtr b);
ExprPtr neg(ExprPtr a);
ExprPtr sqrt(ExprPtr a);
ExprPtr let(const std::string& name, ExprPtr bound, ExprPtr body);
ExprPtr ite(ExprPtr lhs, CmpOp op, ExprPtr rhs, ExprPtr then_e, ExprPtr else_e);
ExprPtr call(const std::string& fn, std::vector<ExprPtr> args);
ExprPtr make(ExprKind kind, std::vector<ExprPtr> args, const Expr& like);
}  // namespace ex

bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

struct ExprHash {
  std::size_t operator()(const ExprPtr& e) const { return e->hash; }
};
struct ExprEqual {
  bool operator()(const ExprPtr& a, const ExprPtr& b) const { return structurally_equal(a, b); }
};

/// Total order used to canonicalise commutative operands.
bool expr_less(const ExprPtr& a, const ExprPtr& b);

using Substitution = std::map<std::string, ExprPtr>;

/// Replaces free variables (kind `variable`) by the mapped expressions.
/// Shared subterms stay shared in the result.
ExprPtr substitute(const ExprPtr& e, const Substitution& s);

/// Replaces the let-bound names by their definitions; a definition used
/// several times becomes one shared node.
ExprPtr inline_lets(const ExprPtr& e);

/// Rewrites with exact real identities: constant folding, neutral elements,
/// structurally equal differences, canonical order for + and *.
ExprPtr simplify(const ExprPtr& e);

std::set<std::string> free_vars(const ExprPtr& e);
bool contains_kind(const ExprPtr& e, ExprKind kind);
std::size_t dag_size(const ExprPtr& e);

/// Parseable source text.
std::string to_source(const ExprPtr& e);

/// Boolean formula over comparisons.
enum class FormulaKind { truth, falsity, cmp, conj, disj, negation };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  FormulaKind kind;
  CmpOp op = CmpOp::lt;
  ExprPtr lhs, rhs;
  std::vector<FormulaPtr> children;
};

namespace fm {
FormulaPtr truth();
FormulaPtr falsity();
FormulaPtr cmp(ExprPtr lhs, CmpOp op, ExprPtr rhs);
FormulaPtr conj(std::vector<FormulaPtr> parts);
FormulaPtr disj(std::vector<FormulaPtr> parts);
FormulaPtr negation(FormulaPtr f);
/// lo <= e <= hi as two comparisons.
FormulaPtr within(ExprPtr e, const Rational& lo, const Rational& hi);
}  // namespace fm

FormulaPtr substitute(const FormulaPtr& f, const Substitution& s);
FormulaPtr map_exprs(const FormulaPtr& f, const std::function<ExprPtr(const ExprPtr&)>& fn);
std::set<std::string> free_vars(const FormulaPtr& f);
/// Pushes negations down to the comparisons (negated comparison flips op).
FormulaPtr to_nnf(const FormulaPtr& f, bool negated = false);
/// Flattens nested conjunctions into a list.
std::vector<FormulaPtr> conjuncts(const FormulaPtr& f);
std::string to_source(const FormulaPtr& f);
bool structurally_equal(const FormulaPtr& a, const FormulaPtr& b);

}  // namespace realc
