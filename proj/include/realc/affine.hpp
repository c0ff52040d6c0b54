#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "realc/interval.hpp"
#include "realc/rational.hpp"

namespace realc {

enum class NoiseId : std::uint64_t {};

/// Where a noise term came from; used to split an error bound by cause.
enum class Provenance { input, roundoff, propagation, path };

std::string to_string(Provenance p);

/// Issues noise-term identifiers, unique for the lifetime of one source.
/// Not thread-safe: one source per analysis thread.
class NoiseSource {
 public:
  NoiseId fresh(Provenance p = Provenance::propagation);
  Provenance provenance(NoiseId id) const;
  std::size_t issued() const { return labels_.size(); }

 private:
  std::vector<Provenance> labels_;
};

/// x0 + sum_i x_i * eps_i with every eps_i ranging over [-1, 1].
class AffineForm {
 public:
  using Term = std::pair<NoiseId, Rational>;

  AffineForm() = default;
  explicit AffineForm(Rational center) : center_(std::move(center)) {}
  AffineForm(Rational center, std::vector<Term> terms);

  /// Fresh-term form covering exactly the given interval.
  static AffineForm from_interval(const Interval& iv, NoiseSource& ns, Provenance p = Provenance::propagation);
  /// Zero-centred form with a single fresh term of the given magnitude.
  static AffineForm fresh_term(const Rational& magnitude, NoiseSource& ns, Provenance p);

  const Rational& center() const { return center_; }
  const std::vector<Term>& terms() const { return terms_; }

  Rational radius() const;
  /// max |v| over the represented set, i.e. |x0| + radius.
  Rational max_abs() const { return abs(center_) + radius(); }
  bool is_zero() const { return sgn(center_) == 0 && terms_.empty(); }

  /// Adds c * eps_id (merging with an existing coefficient).
  void add_term(NoiseId id, const Rational& c);

  friend bool operator==(const AffineForm& a, const AffineForm& b) {
    return a.center_ == b.center_ && a.terms_ == b.terms_;
  }

  std::string str() const;

 private:
  Rational center_{0};
  std::vector<Term> terms_;  // sorted by id, no zero coefficients
};

/// alpha*x + beta*y + zeta, combined term-wise.
AffineForm affine_linear(const Rational& alpha, const AffineForm& x, const Rational& beta, const AffineForm& y,
                         const Rational& zeta);

AffineForm operator+(const AffineForm& x, const AffineForm& y);
AffineForm operator-(const AffineForm& x, const AffineForm& y);
AffineForm operator-(const AffineForm& x);
AffineForm operator*(const Rational& k, const AffineForm& x);

/// Exact bilinear part plus one fresh residue term of magnitude rad(x)*rad(y).
AffineForm affine_mul(const AffineForm& x, const AffineForm& y, NoiseSource& ns);

/// Min-range linear approximation of sqrt over to_interval(x).
/// Throws NegativeSqrtRange when the range reaches below zero.
AffineForm affine_sqrt(const AffineForm& x, NoiseSource& ns);

/// Min-range linear approximation of 1/x over to_interval(x).
/// Throws DivisionByZeroRange when the range contains zero.
AffineForm affine_inverse(const AffineForm& x, NoiseSource& ns);

AffineForm affine_div(const AffineForm& x, const AffineForm& y, NoiseSource& ns);

Interval to_interval(const AffineForm& x);

/// Folds every term whose magnitude is below `relative * |x0|` (or whose
/// combined magnitude is, when x0 = 0, below `relative`) into one fresh term.
/// The represented set only grows.
AffineForm condense(const AffineForm& x, NoiseSource& ns, const Rational& relative);

/// Per-provenance split of the radius; the entries sum to x.radius().
struct ProvenanceSplit {
  Rational input{0};
  Rational roundoff{0};
  Rational propagation{0};
  Rational path{0};
  Rational total() const { return input + roundoff + propagation + path; }
};
ProvenanceSplit split_by_provenance(const AffineForm& x, const NoiseSource& ns);

}  // namespace realc
