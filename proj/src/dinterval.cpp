#include "realc/dinterval.hpp"

#include <algorithm>

namespace realc {

double round_down(double v) {
  if (std::isnan(v)) return v;
  return std::nextafter(v, -DInterval::inf);
}

double round_up(double v) {
  if (std::isnan(v)) return v;
  return std::nextafter(v, DInterval::inf);
}

double DInterval::mid() const {
  if (std::isinf(lo) && std::isinf(hi)) return 0;
  if (std::isinf(lo)) return hi > 0 ? 0 : hi * 2 - 1;
  if (std::isinf(hi)) return lo < 0 ? 0 : lo * 2 + 1;
  return lo / 2 + hi / 2;
}

DInterval enclose(const Rational& q) {
  double d = to_double(q);
  if (std::isinf(d)) return d > 0 ? DInterval{std::numeric_limits<double>::max(), DInterval::inf}
                                  : DInterval{-DInterval::inf, -std::numeric_limits<double>::max()};
  Rational back = from_double(d);
  if (back == q) return {d, d};
  return back < q ? DInterval{d, round_up(d)} : DInterval{round_down(d), d};
}

DInterval enclose(const Interval& iv) {
  if (iv.is_point()) return enclose(iv.lo());
  return {enclose(iv.lo()).lo, enclose(iv.hi()).hi};
}

namespace {

// Exact zeros stay exact so that 0 * unbounded does not become NaN.
double mul_down(double a, double b) {
  if (a == 0 || b == 0) return 0;
  return round_down(a * b);
}

double mul_up(double a, double b) {
  if (a == 0 || b == 0) return 0;
  return round_up(a * b);
}

}  // namespace

DInterval operator+(const DInterval& a, const DInterval& b) {
  if (a.is_undefined() || b.is_undefined()) return DInterval::undefined();
  double lo = a.lo + b.lo, hi = a.hi + b.hi;
  if (std::isnan(lo)) lo = -DInterval::inf;
  if (std::isnan(hi)) hi = DInterval::inf;
  return {round_down(lo), round_up(hi)};
}

DInterval operator-(const DInterval& a) { return {-a.hi, -a.lo}; }

DInterval operator-(const DInterval& a, const DInterval& b) { return a + (-b); }

DInterval operator*(const DInterval& a, const DInterval& b) {
  if (a.is_undefined() || b.is_undefined()) return DInterval::undefined();
  double lo = std::min({mul_down(a.lo, b.lo), mul_down(a.lo, b.hi), mul_down(a.hi, b.lo), mul_down(a.hi, b.hi)});
  double hi = std::max({mul_up(a.lo, b.lo), mul_up(a.lo, b.hi), mul_up(a.hi, b.lo), mul_up(a.hi, b.hi)});
  return {lo, hi};
}

DInterval operator/(const DInterval& a, const DInterval& b) {
  if (a.is_undefined() || b.is_undefined() || b.contains_zero()) return DInterval::undefined();
  // 1/b outward, then multiply.
  DInterval inv{round_down(1.0 / b.hi), round_up(1.0 / b.lo)};
  return a * inv;
}

namespace {

// sqrt rounded in the given direction; exact squares stay exact.
double sqrt_dir(double v, bool up) {
  double r = std::sqrt(v);
  if (std::isinf(r) || std::fma(r, r, -v) == 0) return r;
  return up ? round_up(r) : std::max(0.0, round_down(r));
}

}  // namespace

DInterval dsqrt(const DInterval& a) {
  if (a.is_undefined() || a.lo < 0) return DInterval::undefined();
  return {sqrt_dir(a.lo, false), sqrt_dir(a.hi, true)};
}

DInterval dhull(const DInterval& a, const DInterval& b) {
  if (a.is_undefined() || b.is_undefined()) return DInterval::undefined();
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

std::optional<DInterval> dintersect(const DInterval& a, const DInterval& b) {
  if (a.is_undefined()) return b;
  if (b.is_undefined()) return a;
  double lo = std::max(a.lo, b.lo), hi = std::min(a.hi, b.hi);
  if (hi < lo) return std::nullopt;
  return DInterval{lo, hi};
}

}  // namespace realc
