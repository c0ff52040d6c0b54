#pragma once

// Affine-linear views of expressions: sum of coefficient * variable plus a
// constant, with each variable appearing once.

#include <map>
#include <optional>
#include <string>

#include "realc/expr.hpp"

namespace realc {

struct LinearForm {
  std::map<std::string, Rational> coeffs;  // no zero entries
  Rational constant{0};
};

/// The linear form of e when e is affine in its variables (constants may
/// multiply or divide; no products of variables).
std::optional<LinearForm> as_linear(const ExprPtr& e);

/// Canonical expression for a linear form: terms in variable-name order,
/// constant last.
ExprPtr from_linear(const LinearForm& f);

/// Rewrites every maximal linear subterm into canonical form, so repeated
/// occurrences of one variable inside it collapse into one.
ExprPtr normalize_linear(const ExprPtr& e);

}  // namespace realc
