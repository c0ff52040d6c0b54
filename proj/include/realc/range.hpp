#pragma once

// Sound real ranges of expressions under a precondition: interval
// arithmetic for the first enclosure, then a binary search on each bound
// whose steps are only adopted when the solver refutes a violation.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "realc/expr.hpp"
#include "realc/interval.hpp"
#include "realc/solver.hpp"

namespace realc {

struct RangeConfig {
  Rational precision{"1/10000000000"};
  int max_iterations = 50;
  BackendConfig solver;
};

enum class BoundSide { lower, upper };

enum class FaultKind { division_by_zero, negative_sqrt };
std::string to_string(FaultKind k);

struct RangeIssue {
  FaultKind kind;
  ExprPtr at;                      // the division or sqrt node
  std::optional<Interval> operand;  // divisor / radicand enclosure that admits the fault
};

struct RangeResult {
  std::optional<Interval> range;  // nullopt: no finite sound enclosure
  std::vector<RangeIssue> issues;
  bool ok() const { return range && issues.empty(); }
};

/// Box of every declared variable. Throws std::invalid_argument if one is unbounded.
std::map<std::string, Interval> box_of(const Constraint& pre);

/// Plain interval arithmetic. Throws DivisionByZeroRange / NegativeSqrtRange.
Interval eval_interval(const ExprPtr& e, const std::map<std::string, Interval>& env);

/// Interval arithmetic that reports faults instead of throwing. When `refine`
/// is given it is asked for a tighter enclosure of a faulting operand before
/// the fault is recorded.
using OperandRefiner = std::function<Interval(const ExprPtr& operand, const Interval& enclosure)>;
RangeResult eval_interval_checked(const ExprPtr& e, const std::map<std::string, Interval>& env,
                                  const OperandRefiner& refine = {});

/// Answers "is pre && query satisfiable"; pre is understood.
using RangeOracle = std::function<SolverVerdict(const FormulaPtr& query)>;

Rational tighten_bound(BoundSide side, const Interval& init, const ExprPtr& e, const RangeConfig& cfg,
                       const RangeOracle& oracle);

/// Both sides of tighten_bound on an existing sound enclosure.
Interval tighten(const Interval& init, const ExprPtr& e, const RangeConfig& cfg, const RangeOracle& oracle);

/// Oracle over a session whose top scope already holds pre.
RangeOracle session_oracle(Session& s);

/// The range of e under pre. Pushes pre on `s` for the duration.
RangeResult get_range(const Constraint& pre, const ExprPtr& e, const RangeConfig& cfg, Session& s);
RangeResult get_range(const Constraint& pre, const ExprPtr& e, const RangeConfig& cfg);

}  // namespace realc
