#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "realc/rational.hpp"

namespace realc {

/// Raised when an operation may fault at run time over the given ranges.
class RangeFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivisionByZeroRange : public RangeFault {
 public:
  DivisionByZeroRange() : RangeFault("divisor range contains zero") {}
};

class NegativeSqrtRange : public RangeFault {
 public:
  NegativeSqrtRange() : RangeFault("square root argument range reaches below zero") {}
};

/// Closed interval [lo, hi] with exact rational endpoints.
class Interval {
 public:
  Interval() : lo_(0), hi_(0) {}
  explicit Interval(const Rational& point) : lo_(point), hi_(point) {}
  Interval(Rational lo, Rational hi);

  const Rational& lo() const { return lo_; }
  const Rational& hi() const { return hi_; }

  Rational width() const { return hi_ - lo_; }
  Rational mid() const { return (lo_ + hi_) / 2; }
  Rational radius() const { return (hi_ - lo_) / 2; }
  Rational max_abs() const { return max(abs(lo_), abs(hi_)); }
  bool is_point() const { return lo_ == hi_; }

  bool contains(const Rational& q) const { return lo_ <= q && q <= hi_; }
  bool contains(const Interval& other) const { return lo_ <= other.lo_ && other.hi_ <= hi_; }
  bool contains_zero() const { return sgn(lo_) <= 0 && sgn(hi_) >= 0; }

  friend bool operator==(const Interval& a, const Interval& b) { return a.lo_ == b.lo_ && a.hi_ == b.hi_; }
  friend bool operator!=(const Interval& a, const Interval& b) { return !(a == b); }

  std::string str() const;
  /// Outward decimal rendering with the given significant digits.
  std::string decimal_str(int digits = 17) const;

 private:
  Rational lo_;
  Rational hi_;
};

Interval operator+(const Interval& a, const Interval& b);
Interval operator-(const Interval& a, const Interval& b);
Interval operator-(const Interval& a);
Interval operator*(const Interval& a, const Interval& b);
/// Throws DivisionByZeroRange when 0 is in b.
Interval operator/(const Interval& a, const Interval& b);

/// Throws NegativeSqrtRange when a.lo() < 0.
Interval sqrt(const Interval& a);
/// Reciprocal; throws DivisionByZeroRange when 0 is in a.
Interval inverse(const Interval& a);

Interval hull(const Interval& a, const Interval& b);
/// Empty optional when the intervals are disjoint.
std::optional<Interval> intersect(const Interval& a, const Interval& b);

/// Widens the endpoints outward to dyadic rationals of at most `bits`
/// significant bits; keeps rational sizes bounded in long computations.
Interval round_outward(const Interval& a, unsigned bits);

enum class ArithOp { add, sub, mul, div, sqrt };

/// Dispatching form used by tests and the CLI; `b` is ignored for sqrt.
Interval interval_arith(ArithOp op, const Interval& a, const std::optional<Interval>& b = std::nullopt);

/// Bits of precision for square-root endpoint enclosures.
inline constexpr unsigned kSqrtBits = 160;

}  // namespace realc
