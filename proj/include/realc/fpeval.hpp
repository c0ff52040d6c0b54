#pragma once

// Evaluation of expressions in hardware binary32 / binary64, one rounding
// per operation, as the generated code would run.

#include <map>
#include <string>

#include "realc/expr.hpp"
#include "realc/interval.hpp"

namespace realc {

/// Lets are honoured (each bound value computed once); calls must be
/// inlined. Conditionals compare the computed operands.
double eval_double(const ExprPtr& e, const std::map<std::string, double>& env);
float eval_float(const ExprPtr& e, const std::map<std::string, float>& env);

/// Exact evaluation at a rational point; sqrt is enclosed, so the result is
/// a tight interval. Throws RangeFault on division by zero / negative sqrt.
Interval eval_exact_point(const ExprPtr& e, const std::map<std::string, Rational>& point);

}  // namespace realc
