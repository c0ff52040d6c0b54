#pragma once

// Finite-precision code for the chosen format, with the generated
// postconditions in an annotation block, and the JSON analysis report.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "realc/pipeline.hpp"

namespace realc {

struct EmittedFunction {
  std::string name;
  std::string source;  // annotation block and definition
  Spec post;           // the generated spec, unrounded
  bool proven = false;
};

struct EmittedUnit {
  PrecisionSpec precision;
  bool verified = false;
  std::vector<EmittedFunction> functions;
  std::vector<std::pair<std::string, AnalysisIssue>> warnings;  // function, issue
  std::string failure_report;                                   // empty when verified
  std::string text;                                             // whole file
};

/// Emitted at verdict.reported whether or not verification succeeded.
/// Deterministic: no timestamps, no machine-dependent text.
EmittedUnit emit_code(const Program& p, const Verdict& v);

/// Expression in the target syntax (lets inlined where not at statement level).
std::string c_expr(const ExprPtr& e, const PrecisionSpec& prec);

/// Outward 17-digit renderings used in the code and the report.
std::string render_lower(const Rational& q);
std::string render_upper(const Rational& q);

/// Plain interval-arithmetic columns: the body range over the input box and
/// the error bound with untightened node ranges. Empty on a fault.
struct Baseline {
  std::optional<Interval> range;
  std::optional<Rational> error;
};
Baseline interval_baseline(const Program& p, const FunctionDef& f, const PrecisionSpec& prec);

struct ReportOptions {
  bool timings = false;
  std::map<std::string, Baseline> baselines;  // by function name, optional
};

/// One document, keys sorted. Fields: precision, reported_precision, tried,
/// verified, functions[{name, verdict, precision, range, error, path_error,
/// split, issues, vcs[{label, kind, status, approximation_used,
/// counterexample}], attempts[{precision, proven, vcs, range, error}],
/// interval_range, interval_error, seconds}].
std::string emit_report(const Verdict& v, const ReportOptions& opt = {});

}  // namespace realc
