#pragma once

// Exact symbolic zero test for program expressions.

#include <cstddef>

#include "realc/expr.hpp"

namespace realc {

/// True only if e is 0 wherever it is defined. Each distinct sqrt argument
/// becomes a symbol s with s*s = argument; e is brought to one fraction and
/// its numerator reduced by those relations. False for anything it cannot
/// decide (conditionals, or more than max_terms terms on the way).
bool identically_zero(const ExprPtr& e, std::size_t max_terms = 20000);

}  // namespace realc
