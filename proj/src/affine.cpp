#include "realc/affine.hpp"

#include <algorithm>
#include <stdexcept>

namespace realc {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::input: return "input";
    case Provenance::roundoff: return "roundoff";
    case Provenance::propagation: return "propagation";
    case Provenance::path: return "path";
  }
  return "unknown";
}

NoiseId NoiseSource::fresh(Provenance p) {
  labels_.push_back(p);
  return static_cast<NoiseId>(labels_.size() - 1);
}

Provenance NoiseSource::provenance(NoiseId id) const {
  auto idx = static_cast<std::size_t>(id);
  if (idx >= labels_.size()) throw std::out_of_range("noise id not issued by this source");
  return labels_[idx];
}

AffineForm::AffineForm(Rational center, std::vector<Term> terms) : center_(std::move(center)) {
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.first < b.first; });
  for (auto& t : terms) add_term(t.first, t.second);
}

AffineForm AffineForm::from_interval(const Interval& iv, NoiseSource& ns, Provenance p) {
  AffineForm f(iv.mid());
  if (!iv.is_point()) f.add_term(ns.fresh(p), iv.radius());
  return f;
}

AffineForm AffineForm::fresh_term(const Rational& magnitude, NoiseSource& ns, Provenance p) {
  AffineForm f;
  if (sgn(magnitude) != 0) f.add_term(ns.fresh(p), abs(magnitude));
  return f;
}

Rational AffineForm::radius() const {
  Rational r(0);
  for (const auto& t : terms_) r += abs(t.second);
  return r;
}

void AffineForm::add_term(NoiseId id, const Rational& c) {
  if (sgn(c) == 0) return;
  auto it = std::lower_bound(terms_.begin(), terms_.end(), id,
                             [](const Term& t, NoiseId key) { return t.first < key; });
  if (it != terms_.end() && it->first == id) {
    it->second += c;
    if (sgn(it->second) == 0) terms_.erase(it);
  } else {
    terms_.insert(it, Term{id, c});
  }
}

std::string AffineForm::str() const {
  std::string s = to_string(center_);
  for (const auto& [id, c] : terms_) {
    s += " + " + to_string(c) + "*e" + std::to_string(static_cast<std::uint64_t>(id));
  }
  return s;
}

AffineForm affine_linear(const Rational& alpha, const AffineForm& x, const Rational& beta, const AffineForm& y,
                         const Rational& zeta) {
  AffineForm out(alpha * x.center() + beta * y.center() + zeta);
  std::vector<AffineForm::Term> merged;
  merged.reserve(x.terms().size() + y.terms().size());
  auto xi = x.terms().begin(), xe = x.terms().end();
  auto yi = y.terms().begin(), ye = y.terms().end();
  while (xi != xe || yi != ye) {
    if (yi == ye || (xi != xe && xi->first < yi->first)) {
      merged.emplace_back(xi->first, alpha * xi->second);
      ++xi;
    } else if (xi == xe || yi->first < xi->first) {
      merged.emplace_back(yi->first, beta * yi->second);
      ++yi;
    } else {
      merged.emplace_back(xi->first, alpha * xi->second + beta * yi->second);
      ++xi;
      ++yi;
    }
  }
  // Already sorted; drop cancelled terms.
  std::erase_if(merged, [](const AffineForm::Term& t) { return sgn(t.second) == 0; });
  return AffineForm(out.center(), std::move(merged));
}

AffineForm operator+(const AffineForm& x, const AffineForm& y) { return affine_linear(1, x, 1, y, 0); }
AffineForm operator-(const AffineForm& x, const AffineForm& y) { return affine_linear(1, x, -1, y, 0); }
AffineForm operator-(const AffineForm& x) { return affine_linear(-1, x, 0, AffineForm(), 0); }
AffineForm operator*(const Rational& k, const AffineForm& x) { return affine_linear(k, x, 0, AffineForm(), 0); }

AffineForm affine_mul(const AffineForm& x, const AffineForm& y, NoiseSource& ns) {
  AffineForm out = affine_linear(y.center(), x, x.center(), y, -x.center() * y.center());
  Rational residue = x.radius() * y.radius();
  if (sgn(residue) != 0) out.add_term(ns.fresh(Provenance::propagation), residue);
  return out;
}

namespace {

// f(t) ~ alpha*t + zeta with |residual| <= theta over the input range.
AffineForm apply_linear_approx(const AffineForm& x, const Rational& alpha, const Rational& g_lo,
                               const Rational& g_hi, NoiseSource& ns) {
  Rational zeta = (g_lo + g_hi) / 2;
  Rational theta = (g_hi - g_lo) / 2;
  AffineForm out = affine_linear(alpha, x, 0, AffineForm(), zeta);
  if (sgn(theta) != 0) out.add_term(ns.fresh(Provenance::propagation), theta);
  return out;
}

}  // namespace

AffineForm affine_sqrt(const AffineForm& x, NoiseSource& ns) {
  Interval range = to_interval(x);
  if (sgn(range.lo()) < 0) throw NegativeSqrtRange();
  if (range.is_point()) {
    Interval s = sqrt(range);
    return AffineForm::from_interval(s, ns, Provenance::propagation);
  }
  const Rational& a = range.lo();
  const Rational& b = range.hi();
  // Slope no larger than the derivative at b keeps sqrt(t) - alpha*t increasing on [a, b].
  Rational alpha = Rational(1) / (2 * sqrt_up(b, kSqrtBits));
  alpha = round_dyadic(alpha, 64, Rounding::down);
  Rational g_lo = sqrt_down(a, kSqrtBits) - alpha * a;
  Rational g_hi = sqrt_up(b, kSqrtBits) - alpha * b;
  return apply_linear_approx(x, alpha, g_lo, g_hi, ns);
}

AffineForm affine_inverse(const AffineForm& x, NoiseSource& ns) {
  Interval range = to_interval(x);
  if (range.contains_zero()) throw DivisionByZeroRange();
  if (sgn(range.hi()) < 0) return -affine_inverse(-x, ns);
  if (range.is_point()) return AffineForm(Rational(1) / range.lo());
  const Rational& a = range.lo();
  const Rational& b = range.hi();
  // alpha = f'(b) = -1/b^2; 1/t - alpha*t is decreasing on [a, b].
  Rational alpha = Rational(-1) / (b * b);
  Rational g_lo = Rational(1) / b - alpha * b;
  Rational g_hi = Rational(1) / a - alpha * a;
  return apply_linear_approx(x, alpha, g_lo, g_hi, ns);
}

AffineForm affine_div(const AffineForm& x, const AffineForm& y, NoiseSource& ns) {
  return affine_mul(x, affine_inverse(y, ns), ns);
}

Interval to_interval(const AffineForm& x) {
  Rational r = x.radius();
  return {x.center() - r, x.center() + r};
}

AffineForm condense(const AffineForm& x, NoiseSource& ns, const Rational& relative) {
  Rational threshold = sgn(x.center()) == 0 ? relative : relative * abs(x.center());
  AffineForm out(x.center());
  Rational folded(0);
  for (const auto& [id, c] : x.terms()) {
    if (abs(c) < threshold) {
      folded += abs(c);
    } else {
      out.add_term(id, c);
    }
  }
  if (sgn(folded) != 0) out.add_term(ns.fresh(Provenance::propagation), folded);
  return out;
}

ProvenanceSplit split_by_provenance(const AffineForm& x, const NoiseSource& ns) {
  ProvenanceSplit s;
  for (const auto& [id, c] : x.terms()) {
    switch (ns.provenance(id)) {
      case Provenance::input: s.input += abs(c); break;
      case Provenance::roundoff: s.roundoff += abs(c); break;
      case Provenance::propagation: s.propagation += abs(c); break;
      case Provenance::path: s.path += abs(c); break;
    }
  }
  return s;
}

}  // namespace realc
