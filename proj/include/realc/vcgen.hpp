#pragma once

// Verification conditions pairing every variable with its actual twin, and
// the fixed stream of weaker-but-sound constraints tried until one proves.
//
// Naming inside constraints: `d!N` (and `d!x` for an input) is a roundoff
// factor with |d| <= eps, `e!x` the declared noise on input x, `call!N` and
// `call!N~` the ideal and actual results of an abstracted call, `e!~v` a
// summarised error. None of these can clash with source identifiers.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "realc/ast.hpp"
#include "realc/error.hpp"
#include "realc/solver.hpp"

namespace realc {

enum class VcKind { postcondition, call_precondition };
enum class VcStatus { proven, disproven, unknown };
std::string to_string(VcKind k);
std::string to_string(VcStatus s);

enum class CallHandling { uninterpreted, postcondition_inline, body_inline };
enum class ArithHandling { exact, error_actual, error_both };
enum class PathHandling { merged, path_by_path };

struct ApproximationStep {
  CallHandling calls = CallHandling::uninterpreted;
  ArithHandling arith = ArithHandling::exact;
  PathHandling paths = PathHandling::merged;
  std::string str() const;  // "body-inline/error-approx-actual/merged"
  bool operator==(const ApproximationStep&) const = default;
};

enum class CexClass { valid, inconclusive };
std::string to_string(CexClass c);

struct Counterexample {
  std::map<std::string, Rational> model;
  CexClass classification = CexClass::inconclusive;
  std::string clause;  // source text of the clause it violates
  ApproximationStep step;
};

/// One clause to establish, over named results ("res", or the callee's
/// parameters for a call precondition).
struct Goal {
  SpecClause clause;
  std::string text;
};

struct VerificationCondition {
  VcKind kind = VcKind::postcondition;
  std::string function;  // the function whose body is analysed
  std::string callee;    // call preconditions only
  int site = 0;          // call preconditions: index of the call in `function`

  // What is being constrained.
  std::vector<std::pair<std::string, ExprPtr>> results;
  FormulaPtr path = fm::truth();  // ideal branch condition reaching a call site
  std::vector<Goal> goals;

  // Step (1) constraint: satisfiable iff the VC may fail. Only the bounds of
  // the d! variables depend on the precision.
  Constraint constraint;
  PrecisionSpec precision;

  VcStatus status = VcStatus::unknown;
  std::optional<ApproximationStep> used;  // the step that proved it
  std::optional<Counterexample> counterexample;
  std::vector<std::string> notes;

  std::string label() const;
};

struct VcConfig {
  BackendConfig solver;
  ErrorConfig error;  // cache is filled per function when empty
};

/// Ideal twin of `e` with every call replaced by the callee body.
ExprPtr inline_calls(const ExprPtr& e, const Program& p);

/// One postcondition VC per function with an ensuring clause and one
/// call-precondition VC per call site. `p` must be ordered.
std::vector<VerificationCondition> generate_vcs(const Program& p, const PrecisionSpec& prec);

/// Names of the roundoff factors of a constraint.
bool is_roundoff_var(const std::string& name);

/// Same formula and variables; bounds differ at most on roundoff factors.
bool same_template(const Constraint& a, const Constraint& b);

/// A constraint to check per goal at one step. A goal with no query was
/// decided without the solver (`holds`).
struct Obligation {
  std::size_t goal = 0;
  std::optional<Constraint> query;
  bool holds = false;
};

struct StepConstraint {
  ApproximationStep step;
  bool applicable = true;  // false: skipped, the reason is in notes
  std::vector<Obligation> obligations;
  std::vector<std::string> notes;
};

/// The approximations of one VC in their fixed order. Steps that do not
/// apply (no calls, no branches, an engine fault) are skipped.
class ApproximationStream {
 public:
  ApproximationStream(const Program& p, const VerificationCondition& vc, const PrecisionSpec& prec,
                      const VcConfig& cfg);
  ~ApproximationStream();
  ApproximationStream(ApproximationStream&&) noexcept;
  /// nullopt when exhausted.
  std::optional<StepConstraint> next();
  const std::vector<ApproximationStep>& plan() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Valid iff the model's ideal inputs satisfy the precondition and violate
/// some goal with every error set to zero, under exact evaluation.
CexClass classify_counterexample(const Program& p, const VerificationCondition& vc,
                                 const std::map<std::string, Rational>& model);

/// Runs the stream until every goal is proven, a valid counterexample is
/// found, or the stream ends. Updates status, used and counterexample.
void discharge(const Program& p, VerificationCondition& vc, const PrecisionSpec& prec, const VcConfig& cfg,
               Session& s);

/// Postcondition from forward analysis: res in [a, b] and res +/- u, the
/// bounds rounded outward to 53 bits. Unknown parts stay empty on a fault.
struct GeneratedSpec {
  std::string function;
  PrecisionSpec precision;
  std::optional<Interval> range;
  std::optional<Rational> error;
  Rational path_error{0};
  ProvenanceSplit split;
  std::vector<AnalysisIssue> issues;
  std::vector<std::string> notes;
  bool complete() const { return range && error; }
  Spec clauses() const;
};

GeneratedSpec generate_spec(const Program& p, const FunctionDef& f, const PrecisionSpec& prec,
                            const ErrorConfig& cfg = {});

}  // namespace realc
