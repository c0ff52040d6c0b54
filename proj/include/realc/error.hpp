#pragma once

// Forward error analysis: every subexpression carries its ideal range and an
// affine form bounding (actual - ideal), where the actual run applies
// fl(x op y) = (x op y)(1 + d) at each operation.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "realc/affine.hpp"
#include "realc/ast.hpp"
#include "realc/precision.hpp"
#include "realc/range.hpp"
#include "realc/solver.hpp"

namespace realc {

enum class IssueKind { overflow, division_by_zero, negative_sqrt };
std::string to_string(IssueKind k);

struct AnalysisIssue {
  IssueKind kind;
  std::string location;  // source text of the offending subexpression
  Interval total;        // range + error enclosure that admits the fault
  bool ideal = false;    // the fault is possible in the ideal computation itself
};

struct UncertainValue {
  Interval range;  // ideal
  AffineForm err;  // actual - ideal
  Interval total() const { return range + to_interval(err); }
};

/// Inputs of one analysis: the ideal precondition and, per input, the bound
/// on |actual - ideal| split into declared noise and representation roundoff.
struct InputNoise {
  Rational noise{0};     // declared uncertainty (0 if none)
  Rational roundoff{0};  // rounding the (noisy) input to the target format
  Rational total() const { return noise + roundoff; }
};

struct ErrorInputs {
  Constraint pre;
  std::map<std::string, InputNoise> inputs;
};

/// Precondition and input noise of a function at a precision. Parameters
/// without a declared uncertainty get the default roundoff eps * max|range|;
/// declared ones additionally get eps * max|range widened by the noise|.
ErrorInputs error_inputs(const FunctionDef& f, const PrecisionSpec& prec);
/// Ideal precondition only (bounds and constraints), perturbation-free.
Constraint ideal_precondition(const FunctionDef& f);
/// The strict sides of the declared bounds as atoms (x > lo, x < hi). The
/// precondition box is closed; VCs that must exclude the endpoints add these.
FormulaPtr strict_bounds(const FunctionDef& f);

/// Tightened ideal ranges keyed by subexpression and branch context. Ranges
/// do not depend on the precision, so one cache can serve every precision of
/// one function (same precondition).
class RangeCache;
std::shared_ptr<RangeCache> make_range_cache();

enum class PathMode { merged, explicit_paths };

struct ErrorConfig {
  RangeConfig range;
  bool tighten_ranges = true;  // false: plain interval ranges per node
  std::shared_ptr<RangeCache> cache;
  PathMode paths = PathMode::merged;
  bool path_error = true;  // bound divergence at branches (off: per-path errors only)
  std::string context;     // extra constraints already on the session; keys the cache
};

struct ErrorResult {
  Interval range;
  AffineForm err;
  Rational error_bound{0};  // max |err|
  ProvenanceSplit split;
  Rational path_error{0};  // largest divergence bound met at a branch
  std::vector<AnalysisIssue> issues;
  std::vector<std::string> notes;
  bool fatal = false;  // a division/sqrt fault aborted the analysis: no sound bound
  bool ok() const { return !fatal && issues.empty(); }
};

/// Roundoff of one operation whose result lies in `total`: eps * max|total|.
Rational fresh_roundoff(const Interval& total, const PrecisionSpec& prec);

/// Product and quotient rules on (range, error) pairs; `range` is the ideal
/// range of the result (from the range engine), used for the roundoff.
UncertainValue propagate_mul(const UncertainValue& x, const UncertainValue& y, const Interval& range,
                             const PrecisionSpec& prec, NoiseSource& ns);
/// Throws DivisionByZeroRange when y's total range contains zero.
UncertainValue propagate_div(const UncertainValue& x, const UncertainValue& y, const Interval& range,
                             const PrecisionSpec& prec, NoiseSource& ns);
/// Throws NegativeSqrtRange when x's total range reaches below zero.
UncertainValue propagate_sqrt(const UncertainValue& x, const Interval& range, const PrecisionSpec& prec,
                              NoiseSource& ns);
/// Hull of the ranges and one path term covering both errors.
UncertainValue merge_paths(const UncertainValue& a, const UncertainValue& b, NoiseSource& ns);

/// Interval times affine form: mid(k) * a plus one fresh term for the rest.
AffineForm scale(const Interval& k, const AffineForm& a, NoiseSource& ns, Provenance p = Provenance::propagation);

/// max |actual - ideal| of lhs - rhs when both sides are computed with
/// error (the comparison itself is exact). nullopt on a fault.
std::optional<Rational> guard_error(const ErrorInputs& in, const ExprPtr& lhs, const ExprPtr& rhs,
                                    const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s);

/// Analyses `e` (lets allowed, calls must be inlined) under the inputs.
ErrorResult eval_with_error(const ErrorInputs& in, const ExprPtr& e, const PrecisionSpec& prec,
                            const ErrorConfig& cfg, Session& s);
ErrorResult eval_with_error(const ErrorInputs& in, const ExprPtr& e, const PrecisionSpec& prec,
                            const ErrorConfig& cfg = {});

}  // namespace realc
