#pragma once

// Exact rational numbers and the handful of outward-rounded helpers the
// analysis needs (square-root enclosures, dyadic rounding, decimal rendering).

#include <gmpxx.h>

#include <optional>
#include <string>
#include <string_view>

namespace realc {

using Rational = mpq_class;

enum class Rounding { down, up, nearest };

/// Parses a decimal literal such as "1.5", "-3", "1e-11" or "2.5E+3" into the
/// exact rational it denotes. Throws std::invalid_argument on malformed text.
Rational parse_decimal(std::string_view text);

Rational abs(const Rational& q);
const Rational& min(const Rational& a, const Rational& b);
const Rational& max(const Rational& a, const Rational& b);

/// 2^e for any integer e.
Rational pow2(long e);

/// Rounds q to a dyadic rational with at most `bits` significant bits,
/// in the given direction. Exact values are returned unchanged.
Rational round_dyadic(const Rational& q, unsigned bits, Rounding dir);

/// Lower / upper rational bounds on sqrt(q) for q >= 0, computed with
/// `bits` bits of directed-rounding precision.
Rational sqrt_down(const Rational& q, unsigned bits = 160);
Rational sqrt_up(const Rational& q, unsigned bits = 160);

/// Nearest IEEE double / float to q (round-to-nearest-even, no double rounding).
double to_double(const Rational& q);
float to_float(const Rational& q);
Rational from_double(double d);

/// True when q = m * 2^e with |m| < 2^mantissa_bits (i.e. q is exactly
/// representable in a binary format with that many significand bits,
/// ignoring exponent range).
bool fits_mantissa(const Rational& q, unsigned mantissa_bits);

/// Scientific-notation rendering with `digits` significant digits, rounded
/// in the given direction so that the printed value brackets q as requested.
std::string to_decimal(const Rational& q, int digits = 17, Rounding dir = Rounding::nearest);

/// Exact rendering "n" or "n/d".
std::string to_string(const Rational& q);

/// Exact decimal text ("-0.125", "3.0") when q has a finite decimal expansion.
std::optional<std::string> exact_decimal(const Rational& q);

/// Bit length of numerator plus denominator; used to watch coefficient growth.
std::size_t bit_size(const Rational& q);

}  // namespace realc
