#include "realc/precision.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace realc {

namespace {

Rational largest_finite(long mantissa_bits, long max_exp) {
  // (2 - 2^(1-p)) * 2^max_exp
  return (Rational(2) - pow2(1 - mantissa_bits)) * pow2(max_exp);
}

}  // namespace

PrecisionSpec PrecisionSpec::of(PrecisionName n) {
  switch (n) {
    case PrecisionName::float32: return {n, pow2(-24), largest_finite(24, 127), 24};
    case PrecisionName::float64: return {n, pow2(-53), largest_finite(53, 1023), 53};
    // Extended formats are pairs/quads of doubles: the exponent range is float64's.
    case PrecisionName::doubledouble: return {n, pow2(-105), largest_finite(53, 1023), 106};
    case PrecisionName::quaddouble: return {n, pow2(-211), largest_finite(53, 1023), 212};
  }
  throw std::logic_error("bad precision");
}

std::vector<PrecisionSpec> PrecisionSpec::all() {
  return {of(PrecisionName::float32), of(PrecisionName::float64), of(PrecisionName::doubledouble),
          of(PrecisionName::quaddouble)};
}

std::string PrecisionSpec::str() const {
  switch (name) {
    case PrecisionName::float32: return "float32";
    case PrecisionName::float64: return "float64";
    case PrecisionName::doubledouble: return "doubledouble";
    case PrecisionName::quaddouble: return "quaddouble";
  }
  return "?";
}

std::string PrecisionSpec::c_type() const {
  switch (name) {
    case PrecisionName::float32: return "float";
    case PrecisionName::float64: return "double";
    case PrecisionName::doubledouble: return "dd_real";
    case PrecisionName::quaddouble: return "qd_real";
  }
  return "?";
}

PrecisionSpec PrecisionSpec::parse(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "float32" || t == "single" || t == "float" || t == "f32") return of(PrecisionName::float32);
  if (t == "float64" || t == "double" || t == "f64") return of(PrecisionName::float64);
  if (t == "doubledouble" || t == "dd" || t == "double-double") return of(PrecisionName::doubledouble);
  if (t == "quaddouble" || t == "qd" || t == "quad-double") return of(PrecisionName::quaddouble);
  throw std::invalid_argument("unknown precision '" + std::string(text) + "'");
}

}  // namespace realc
