#pragma once

// Programs of the Real-typed source language: functions with a require
// clause, a body expression and an optional ensuring clause.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "realc/expr.hpp"
#include "realc/interval.hpp"
#include "realc/precision.hpp"

namespace realc {

enum class ClauseKind {
  range_bound,      // lo (<|<=) var (<|<=) hi, either side may be missing in postconditions
  abs_uncertainty,  // var +/- magnitude
  rel_uncertainty,  // var +/- factor * var
  constraint,       // any other predicate
};

struct SpecClause {
  ClauseKind kind = ClauseKind::constraint;
  std::string var;
  std::optional<Rational> lo, hi;
  bool lo_strict = false, hi_strict = false;
  // abs: the bound on |err| (a constant in preconditions; an expression that
  // may use !x in postconditions). rel: the constant factor m.
  ExprPtr magnitude;
  FormulaPtr formula;  // constraint only

  static SpecClause range(std::string var, std::optional<Rational> lo, std::optional<Rational> hi,
                          bool lo_strict = true, bool hi_strict = true);
  static SpecClause abs_noise(std::string var, ExprPtr magnitude);
  static SpecClause rel_noise(std::string var, const Rational& factor);
  static SpecClause constraint_of(FormulaPtr f);
};

using Spec = std::vector<SpecClause>;

struct FunctionDef {
  std::string name;
  std::vector<std::string> params;
  Spec pre;
  ExprPtr body;
  Spec post;
  bool has_post = false;
  int line = 0;

  /// Declared [lo, hi] of a variable (params in pre, "res" in post).
  std::optional<Interval> range_of(const std::string& var, bool in_post = false) const;
  /// The abs/rel uncertainty clause on a parameter, if any.
  const SpecClause* uncertainty_of(const std::string& var) const;
  /// Precondition constraints that are not plain bounds or noise.
  std::vector<FormulaPtr> pre_constraints() const;
  std::set<std::string> callees() const;
};

struct Program {
  std::vector<FunctionDef> functions;

  const FunctionDef* find(const std::string& name) const;
  /// name -> names it calls directly.
  std::map<std::string, std::set<std::string>> call_graph() const;
};

class SourceError : public std::runtime_error {
 public:
  SourceError(const std::string& what, int line, int col);
  int line, col;
};

class SyntaxError : public SourceError {
 public:
  using SourceError::SourceError;
};

class SemanticError : public SourceError {
 public:
  using SourceError::SourceError;
};

class CycleError : public SemanticError {
 public:
  using SemanticError::SemanticError;
};

/// Parses and validates a whole program (source order is kept).
Program parse(std::string_view source);
/// Parses one standalone expression (no spec sugar); used by tests and tools.
ExprPtr parse_expr(std::string_view source);

/// Callees before callers; ties broken by source order.
Program order_functions(const Program& p);

/// Adds `x +/- eps * max(|lo|, |hi|)` for every parameter without noise.
FunctionDef add_default_roundoff(const FunctionDef& f, const PrecisionSpec& prec);

std::string to_source(const SpecClause& c);
std::string to_source(const Spec& s);
std::string to_source(const FunctionDef& f);
std::string to_source(const Program& p);

/// Structural AST equality (literal spellings ignored, source lines ignored).
bool same_ast(const Program& a, const Program& b);

}  // namespace realc
