#include "realc/algebra.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace realc {

namespace {

struct TooBig : std::exception {};
struct Undecidable : std::exception {};

using Monomial = std::map<int, unsigned>;  // symbol -> exponent

class Poly {
 public:
  std::map<Monomial, Rational> terms;

  static Poly constant(const Rational& c) {
    Poly p;
    if (sgn(c) != 0) p.terms[{}] = c;
    return p;
  }
  static Poly symbol(int s) {
    Poly p;
    p.terms[{{s, 1u}}] = Rational(1);
    return p;
  }
  bool zero() const { return terms.empty(); }

  Poly operator+(const Poly& o) const {
    Poly r = *this;
    for (const auto& [m, c] : o.terms) r.accumulate(m, c);
    return r;
  }
  Poly operator-() const {
    Poly r = *this;
    for (auto& [m, c] : r.terms) c = -c;
    return r;
  }
  Poly operator-(const Poly& o) const { return *this + -o; }
  Poly mul(const Poly& o, std::size_t limit) const {
    Poly r;
    for (const auto& [ma, ca] : terms) {
      for (const auto& [mb, cb] : o.terms) {
        Monomial m = ma;
        for (const auto& [s, k] : mb) m[s] += k;
        r.accumulate(m, ca * cb);
        if (r.terms.size() > limit) throw TooBig();
      }
    }
    return r;
  }

  void accumulate(const Monomial& m, const Rational& c) {
    auto [it, fresh] = terms.try_emplace(m, c);
    if (!fresh) {
      it->second += c;
      if (sgn(it->second) == 0) terms.erase(it);
    }
  }
};

struct Fraction {
  Poly num, den;
};

class Normaliser {
 public:
  explicit Normaliser(std::size_t limit) : limit_(limit) {}

  Fraction of(const ExprPtr& e) {
    switch (e->kind) {
      case ExprKind::constant: return {Poly::constant(e->value), Poly::constant(Rational(1))};
      case ExprKind::variable: return {Poly::symbol(symbol_for("v:" + e->name)), Poly::constant(Rational(1))};
      case ExprKind::neg: {
        Fraction a = of(e->args[0]);
        return {-a.num, a.den};
      }
      case ExprKind::add:
      case ExprKind::sub: {
        Fraction a = of(e->args[0]), b = of(e->args[1]);
        Poly l = a.num.mul(b.den, limit_), r = b.num.mul(a.den, limit_);
        return {e->kind == ExprKind::add ? l + r : l - r, a.den.mul(b.den, limit_)};
      }
      case ExprKind::mul: {
        Fraction a = of(e->args[0]), b = of(e->args[1]);
        return {a.num.mul(b.num, limit_), a.den.mul(b.den, limit_)};
      }
      case ExprKind::div: {
        Fraction a = of(e->args[0]), b = of(e->args[1]);
        return {a.num.mul(b.den, limit_), a.den.mul(b.num, limit_)};
      }
      case ExprKind::sqrt: {
        std::string key = "s:" + to_source(e->args[0]);
        auto it = index_.find(key);
        if (it == index_.end()) {
          Fraction rad = of(e->args[0]);
          int s = symbol_for(key);
          radicands_[s] = std::move(rad);
          return {Poly::symbol(s), Poly::constant(Rational(1))};
        }
        return {Poly::symbol(it->second), Poly::constant(Rational(1))};
      }
      default: throw Undecidable();
    }
  }

  // Zero once every sqrt symbol is eliminated: p = A + s*B with s*s = N/D
  // gives p*D^K = A' + s*B', and A' = B' = 0 is enough.
  bool reduces_to_zero(const Poly& p) {
    if (p.zero()) return true;
    int top = -1;
    for (const auto& [m, c] : p.terms)
      for (const auto& [s, k] : m)
        if (radicands_.count(s)) top = std::max(top, s);
    if (top < 0) return false;

    std::map<unsigned, Poly> by_power;
    unsigned max_half = 0;
    for (const auto& [m, c] : p.terms) {
      Monomial rest = m;
      unsigned j = 0;
      if (auto it = rest.find(top); it != rest.end()) j = it->second, rest.erase(it);
      by_power[j].accumulate(rest, c);
      max_half = std::max(max_half, j / 2);
    }
    const Fraction& rad = radicands_.at(top);
    Poly even, odd;
    for (const auto& [j, q] : by_power) {
      Poly t = q;
      for (unsigned i = 0; i < j / 2; ++i) t = t.mul(rad.num, limit_);
      for (unsigned i = j / 2; i < max_half; ++i) t = t.mul(rad.den, limit_);
      (j % 2 ? odd : even) = (j % 2 ? odd : even) + t;
    }
    return reduces_to_zero(even) && reduces_to_zero(odd);
  }

 private:
  int symbol_for(const std::string& key) {
    auto [it, fresh] = index_.try_emplace(key, static_cast<int>(index_.size()));
    return it->second;
  }

  std::size_t limit_;
  std::map<std::string, int> index_;
  std::map<int, Fraction> radicands_;
};

}  // namespace

bool identically_zero(const ExprPtr& e, std::size_t max_terms) {
  try {
    Normaliser n(max_terms);
    Fraction f = n.of(inline_lets(e));
    return n.reduces_to_zero(f.num);
  } catch (const TooBig&) {
    return false;
  } catch (const Undecidable&) {
    return false;
  }
}

}  // namespace realc
