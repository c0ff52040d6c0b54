#pragma once

// Binary64 intervals with every endpoint pushed outward by one ulp after each
// operation. Only used to prune solver boxes quickly; anything the solver
// reports (models, adopted bounds) is re-checked or computed in rationals.

#include <cmath>
#include <limits>
#include <optional>

#include "realc/interval.hpp"

namespace realc {

struct DInterval {
  double lo = 0;
  double hi = 0;

  static constexpr double inf = std::numeric_limits<double>::infinity();

  static DInterval entire() { return {-inf, inf}; }
  static DInterval undefined() { return {std::nan(""), std::nan("")}; }
  bool is_undefined() const { return std::isnan(lo) || std::isnan(hi); }
  bool contains_zero() const { return lo <= 0 && hi >= 0; }
  double width() const { return hi - lo; }
  double mid() const;

  friend bool operator==(const DInterval& a, const DInterval& b) { return a.lo == b.lo && a.hi == b.hi; }
};

double round_down(double v);
double round_up(double v);

/// Outward enclosure of an exact rational / interval.
DInterval enclose(const Rational& q);
DInterval enclose(const Interval& iv);

DInterval operator+(const DInterval& a, const DInterval& b);
DInterval operator-(const DInterval& a, const DInterval& b);
DInterval operator-(const DInterval& a);
DInterval operator*(const DInterval& a, const DInterval& b);
/// Undefined when b contains zero.
DInterval operator/(const DInterval& a, const DInterval& b);
/// Undefined when a reaches below zero.
DInterval dsqrt(const DInterval& a);
DInterval dhull(const DInterval& a, const DInterval& b);
/// An undefined operand carries no information; empty intersection is nullopt.
std::optional<DInterval> dintersect(const DInterval& a, const DInterval& b);

}  // namespace realc
