#include "realc/interval.hpp"

#include <array>
#include <utility>

namespace realc {

Interval::Interval(Rational lo, Rational hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (hi_ < lo_) throw std::invalid_argument("interval with lo > hi: [" + to_string(lo_) + ", " + to_string(hi_) + "]");
}

std::string Interval::str() const { return "[" + to_string(lo_) + ", " + to_string(hi_) + "]"; }

std::string Interval::decimal_str(int digits) const {
  return "[" + to_decimal(lo_, digits, Rounding::down) + ", " + to_decimal(hi_, digits, Rounding::up) + "]";
}

Interval operator+(const Interval& a, const Interval& b) { return {a.lo() + b.lo(), a.hi() + b.hi()}; }

Interval operator-(const Interval& a, const Interval& b) { return {a.lo() - b.hi(), a.hi() - b.lo()}; }

Interval operator-(const Interval& a) { return {-a.hi(), -a.lo()}; }

Interval operator*(const Interval& a, const Interval& b) {
  if (a.is_point() && b.is_point()) return Interval(a.lo() * b.lo());
  std::array<Rational, 4> p = {a.lo() * b.lo(), a.lo() * b.hi(), a.hi() * b.lo(), a.hi() * b.hi()};
  Rational lo = p[0], hi = p[0];
  for (const auto& v : p) {
    if (v < lo) lo = v;
    if (hi < v) hi = v;
  }
  return {lo, hi};
}

Interval inverse(const Interval& a) {
  if (a.contains_zero()) throw DivisionByZeroRange();
  return {Rational(1) / a.hi(), Rational(1) / a.lo()};
}

Interval operator/(const Interval& a, const Interval& b) {
  if (b.contains_zero()) throw DivisionByZeroRange();
  if (b.is_point()) {
    Rational lo = a.lo() / b.lo(), hi = a.hi() / b.lo();
    if (hi < lo) std::swap(lo, hi);
    return {lo, hi};
  }
  return a * inverse(b);
}

Interval sqrt(const Interval& a) {
  if (sgn(a.lo()) < 0) throw NegativeSqrtRange();
  if (a.is_point()) {
    Rational lo = sqrt_down(a.lo(), kSqrtBits);
    Rational hi = lo * lo == a.lo() ? lo : sqrt_up(a.lo(), kSqrtBits);
    return {lo, hi};
  }
  return {sqrt_down(a.lo(), kSqrtBits), sqrt_up(a.hi(), kSqrtBits)};
}

Interval hull(const Interval& a, const Interval& b) { return {min(a.lo(), b.lo()), max(a.hi(), b.hi())}; }

std::optional<Interval> intersect(const Interval& a, const Interval& b) {
  const Rational& lo = max(a.lo(), b.lo());
  const Rational& hi = min(a.hi(), b.hi());
  if (hi < lo) return std::nullopt;
  return Interval(lo, hi);
}

Interval round_outward(const Interval& a, unsigned bits) {
  return {round_dyadic(a.lo(), bits, Rounding::down), round_dyadic(a.hi(), bits, Rounding::up)};
}

Interval interval_arith(ArithOp op, const Interval& a, const std::optional<Interval>& b) {
  if (op == ArithOp::sqrt) return sqrt(a);
  if (!b) throw std::invalid_argument("binary interval operation needs two operands");
  switch (op) {
    case ArithOp::add: return a + *b;
    case ArithOp::sub: return a - *b;
    case ArithOp::mul: return a * *b;
    case ArithOp::div: return a / *b;
    case ArithOp::sqrt: break;
  }
  return sqrt(a);
}

}  // namespace realc
