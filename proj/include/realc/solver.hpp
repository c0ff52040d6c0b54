#pragma once

// Satisfiability of quantifier-free nonlinear real constraints. The builtin
// backend is branch-and-bound over boxes with interval propagation; the
// external backend talks SMT-LIB2 to a solver process over pipes.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "realc/expr.hpp"
#include "realc/interval.hpp"

namespace realc {

struct VarDecl {
  std::string name;
  std::optional<Interval> bounds;
  // Small-magnitude quantities (roundoff factors, input noise). The builtin
  // backend never bisects them first and linearises in them around zero.
  bool perturbation = false;
};

struct Constraint {
  std::vector<VarDecl> vars;
  FormulaPtr formula = fm::truth();

  Constraint& declare(const std::string& name, const Interval& bounds, bool perturbation = false);
  Constraint& declare_unbounded(const std::string& name);
  Constraint& assert_that(const FormulaPtr& f);
  const VarDecl* find(const std::string& name) const;
};

/// Conjunction of both; shared variables get the intersection of their bounds.
/// Disjoint bounds leave an explicit `false` in the formula.
Constraint conjoin(const Constraint& a, const Constraint& b);

enum class UnknownReason { timeout, incomplete };

struct SolverVerdict {
  enum class Kind { sat, unsat, unknown };
  Kind kind = Kind::unknown;
  std::map<std::string, Rational> model;
  UnknownReason reason = UnknownReason::incomplete;

  static SolverVerdict sat(std::map<std::string, Rational> m) { return {Kind::sat, std::move(m), {}}; }
  static SolverVerdict unsat() { return {Kind::unsat, {}, {}}; }
  static SolverVerdict unknown(UnknownReason r) { return {Kind::unknown, {}, r}; }
  bool is_sat() const { return kind == Kind::sat; }
  bool is_unsat() const { return kind == Kind::unsat; }
  bool is_unknown() const { return kind == Kind::unknown; }
};

std::string to_string(const SolverVerdict& v);

struct BackendConfig {
  enum class Backend { builtin, external };
  double timeout_seconds = 1.0;
  Backend backend = Backend::builtin;
  std::string external_command;
  long boxes_per_second = 20000;

  long box_budget() const;
};

class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact three-valued truth of the formula at a point: true, false, or
/// nullopt when a sqrt enclosure cannot decide or an operation faults.
std::optional<bool> evaluate_at(const FormulaPtr& f, const std::map<std::string, Rational>& point);

/// True when the model lies within the declared bounds and satisfies the
/// formula under exact rational evaluation.
bool model_satisfies(const Constraint& c, const std::map<std::string, Rational>& model);

SolverVerdict builtin_icp_check(const Constraint& c, const BackendConfig& cfg);

/// Deterministic SMT-LIB2 (QF_NRA) script: declarations, bounds, the
/// formula, and (check-sat).
std::string emit_smtlib(const Constraint& c);

/// One-shot check. Throws BackendUnavailable when the external process
/// cannot be started; Session catches it and falls back to builtin.
SolverVerdict check_sat(const Constraint& c, const BackendConfig& cfg);

class ExternalProcess;

/// Scoped assertions: every check inside a scope is conjoined with the
/// scope's base constraints.
class Session {
 public:
  explicit Session(BackendConfig cfg);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  void push(const Constraint& base);
  void pop();
  SolverVerdict check(const Constraint& query);
  const BackendConfig& config() const { return cfg_; }
  std::size_t depth() const { return scopes_.size(); }
  /// Number of check() calls answered so far.
  std::size_t queries() const { return queries_; }

 private:
  BackendConfig cfg_;
  std::vector<Constraint> scopes_;
  Constraint merged_;
  std::unique_ptr<ExternalProcess> proc_;
  std::size_t queries_ = 0;
};

/// Runs `body` with `base` pushed on the session; pops afterwards.
template <class F>
auto with_assertions(Session& s, const Constraint& base, F&& body) {
  struct Guard {
    Session& s;
    ~Guard() { s.pop(); }
  };
  s.push(base);
  Guard g{s};
  return body(s);
}

}  // namespace realc
