#pragma once

// Target floating-point formats and their rounding model
// fl(x op y) = (x op y)(1 + d), |d| <= epsilon.

#include <string>
#include <string_view>
#include <vector>

#include "realc/rational.hpp"

namespace realc {

enum class PrecisionName { float32, float64, doubledouble, quaddouble };

struct PrecisionSpec {
  PrecisionName name = PrecisionName::float64;
  Rational epsilon;
  Rational overflow;        // largest finite magnitude
  unsigned mantissa_bits;   // significand bits incl. the hidden one

  std::string str() const;
  /// C-like type spelled in generated code.
  std::string c_type() const;

  static PrecisionSpec of(PrecisionName n);
  /// Least precise first.
  static std::vector<PrecisionSpec> all();
  /// Accepts float32/single/Float, float64/double/Double, dd/doubledouble,
  /// qd/quaddouble (case-insensitive). Throws std::invalid_argument.
  static PrecisionSpec parse(std::string_view text);
};

inline bool operator==(const PrecisionSpec& a, const PrecisionSpec& b) {
  return a.name == b.name && a.epsilon == b.epsilon;
}

}  // namespace realc
