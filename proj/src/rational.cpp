#include "realc/rational.hpp"

#include <mpfr.h>

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace realc {

namespace {

// RAII holder for an mpfr_t.
class Mpfr {
 public:
  explicit Mpfr(mpfr_prec_t prec) { mpfr_init2(v_, prec); }
  ~Mpfr() { mpfr_clear(v_); }
  Mpfr(const Mpfr&) = delete;
  Mpfr& operator=(const Mpfr&) = delete;
  mpfr_ptr get() { return v_; }

  Rational to_rational() {
    if (mpfr_zero_p(v_)) return Rational(0);
    mpz_class m;
    mpfr_exp_t e = mpfr_get_z_2exp(m.get_mpz_t(), v_);
    Rational r(m);
    if (e >= 0) {
      mpq_mul_2exp(r.get_mpq_t(), r.get_mpq_t(), static_cast<mp_bitcnt_t>(e));
    } else {
      mpq_div_2exp(r.get_mpq_t(), r.get_mpq_t(), static_cast<mp_bitcnt_t>(-e));
    }
    r.canonicalize();
    return r;
  }

 private:
  mpfr_t v_;
};

mpfr_rnd_t to_mpfr(Rounding dir) {
  switch (dir) {
    case Rounding::down: return MPFR_RNDD;
    case Rounding::up: return MPFR_RNDU;
    case Rounding::nearest: return MPFR_RNDN;
  }
  return MPFR_RNDN;
}

mpz_class pow10(unsigned long n) {
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, n);
  return r;
}

}  // namespace

Rational parse_decimal(std::string_view text) {
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
    negative = text[i] == '-';
    ++i;
  }
  std::string digits;
  long frac_digits = 0;
  bool seen_dot = false;
  bool any_digit = false;
  for (; i < text.size(); ++i) {
    char ch = text[i];
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      digits.push_back(ch);
      any_digit = true;
      if (seen_dot) ++frac_digits;
    } else if (ch == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      break;
    }
  }
  if (!any_digit) throw std::invalid_argument("malformed decimal literal: " + std::string(text));
  long exponent = 0;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool exp_negative = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
      exp_negative = text[i] == '-';
      ++i;
    }
    bool any_exp = false;
    for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
      exponent = exponent * 10 + (text[i] - '0');
      any_exp = true;
      if (exponent > 100000) throw std::invalid_argument("decimal exponent out of range");
    }
    if (!any_exp) throw std::invalid_argument("malformed decimal exponent: " + std::string(text));
    if (exp_negative) exponent = -exponent;
  }
  if (i != text.size()) throw std::invalid_argument("malformed decimal literal: " + std::string(text));

  mpz_class mantissa(digits, 10);
  long scale = exponent - frac_digits;
  Rational r(mantissa);
  if (scale >= 0) {
    r *= Rational(pow10(static_cast<unsigned long>(scale)));
  } else {
    r /= Rational(pow10(static_cast<unsigned long>(-scale)));
  }
  r.canonicalize();
  return negative ? Rational(-r) : r;
}

Rational abs(const Rational& q) { return sgn(q) < 0 ? Rational(-q) : q; }

const Rational& min(const Rational& a, const Rational& b) { return b < a ? b : a; }

const Rational& max(const Rational& a, const Rational& b) { return a < b ? b : a; }

Rational pow2(long e) {
  Rational r(1);
  if (e >= 0) {
    mpq_mul_2exp(r.get_mpq_t(), r.get_mpq_t(), static_cast<mp_bitcnt_t>(e));
  } else {
    mpq_div_2exp(r.get_mpq_t(), r.get_mpq_t(), static_cast<mp_bitcnt_t>(-e));
  }
  return r;
}

Rational round_dyadic(const Rational& q, unsigned bits, Rounding dir) {
  Mpfr f(static_cast<mpfr_prec_t>(bits));
  mpfr_set_q(f.get(), q.get_mpq_t(), to_mpfr(dir));
  return f.to_rational();
}

Rational sqrt_down(const Rational& q, unsigned bits) {
  if (sgn(q) < 0) throw std::domain_error("sqrt of negative rational");
  Mpfr f(static_cast<mpfr_prec_t>(bits));
  mpfr_set_q(f.get(), q.get_mpq_t(), MPFR_RNDD);
  mpfr_sqrt(f.get(), f.get(), MPFR_RNDD);
  return f.to_rational();
}

Rational sqrt_up(const Rational& q, unsigned bits) {
  if (sgn(q) < 0) throw std::domain_error("sqrt of negative rational");
  Mpfr f(static_cast<mpfr_prec_t>(bits));
  mpfr_set_q(f.get(), q.get_mpq_t(), MPFR_RNDU);
  mpfr_sqrt(f.get(), f.get(), MPFR_RNDU);
  return f.to_rational();
}

double to_double(const Rational& q) {
  Mpfr f(53);
  mpfr_set_q(f.get(), q.get_mpq_t(), MPFR_RNDN);
  return mpfr_get_d(f.get(), MPFR_RNDN);
}

float to_float(const Rational& q) {
  // Normal range only; subnormal results are outside the rounding model.
  Mpfr f(24);
  mpfr_set_q(f.get(), q.get_mpq_t(), MPFR_RNDN);
  return mpfr_get_flt(f.get(), MPFR_RNDN);
}

Rational from_double(double d) {
  if (!std::isfinite(d)) throw std::domain_error("non-finite double");
  Rational r(d);  // mpq_set_d is exact
  return r;
}

bool fits_mantissa(const Rational& q, unsigned mantissa_bits) {
  if (sgn(q) == 0) return true;
  const mpz_class& den = q.get_den();
  // Denominator must be a power of two.
  if (mpz_popcount(den.get_mpz_t()) != 1) return false;
  mpz_class num = abs(q.get_num());
  // Strip trailing zero bits of the numerator; what remains is the significand.
  mp_bitcnt_t tz = mpz_scan1(num.get_mpz_t(), 0);
  mpz_fdiv_q_2exp(num.get_mpz_t(), num.get_mpz_t(), tz);
  return mpz_sizeinbase(num.get_mpz_t(), 2) <= mantissa_bits;
}

std::string to_decimal(const Rational& q, int digits, Rounding dir) {
  if (sgn(q) == 0) return "0";
  if (digits < 1) digits = 1;
  bool negative = sgn(q) < 0;
  Rational a = abs(q);

  // Decimal exponent e with 10^e <= a < 10^(e+1).
  long bits = static_cast<long>(mpz_sizeinbase(a.get_num_mpz_t(), 2)) -
              static_cast<long>(mpz_sizeinbase(a.get_den_mpz_t(), 2));
  long e = static_cast<long>(std::floor(static_cast<double>(bits) * 0.30102999566398120));
  auto ten_pow = [](long k) {
    return k >= 0 ? Rational(pow10(static_cast<unsigned long>(k)))
                  : Rational(1) / Rational(pow10(static_cast<unsigned long>(-k)));
  };
  while (ten_pow(e) > a) --e;
  while (ten_pow(e + 1) <= a) ++e;

  // Magnitude rounding direction.
  Rounding mag = dir;
  if (negative && dir == Rounding::down) mag = Rounding::up;
  else if (negative && dir == Rounding::up) mag = Rounding::down;

  Rational scaled = a * ten_pow(digits - 1 - e);
  mpz_class m;
  switch (mag) {
    case Rounding::down: mpz_fdiv_q(m.get_mpz_t(), scaled.get_num_mpz_t(), scaled.get_den_mpz_t()); break;
    case Rounding::up: mpz_cdiv_q(m.get_mpz_t(), scaled.get_num_mpz_t(), scaled.get_den_mpz_t()); break;
    case Rounding::nearest: {
      Rational shifted = scaled + Rational(1, 2);
      mpz_fdiv_q(m.get_mpz_t(), shifted.get_num_mpz_t(), shifted.get_den_mpz_t());
      break;
    }
  }
  if (m >= pow10(static_cast<unsigned long>(digits))) {
    m /= 10;  // only happens for exact carries (e.g. 9.99.. rounded up), division is exact
    ++e;
  }
  std::string ds = m.get_str(10);
  std::string out = negative ? "-" : "";
  out += ds.substr(0, 1);
  if (ds.size() > 1) {
    out += ".";
    out += ds.substr(1);
  }
  out += "e";
  out += e < 0 ? "-" : "+";
  long ae = e < 0 ? -e : e;
  if (ae < 10) out += "0";
  out += std::to_string(ae);
  return out;
}

std::string to_string(const Rational& q) { return q.get_str(10); }

std::optional<std::string> exact_decimal(const Rational& q) {
  if (q.get_den() == 1) return q.get_num().get_str() + ".0";
  // Finite only when the denominator has no prime factors besides 2 and 5.
  mpz_class den = q.get_den();
  unsigned twos = 0, fives = 0;
  while (mpz_divisible_ui_p(den.get_mpz_t(), 2)) {
    den /= 2;
    ++twos;
  }
  while (mpz_divisible_ui_p(den.get_mpz_t(), 5)) {
    den /= 5;
    ++fives;
  }
  if (den != 1) return std::nullopt;
  unsigned k = std::max(twos, fives);
  mpz_class scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, k);
  mpz_class n = abs(q.get_num()) * (scale / q.get_den());
  std::string digits = n.get_str();
  if (digits.size() <= k) digits = std::string(k - digits.size() + 1, '0') + digits;
  std::string s = digits.substr(0, digits.size() - k) + "." + digits.substr(digits.size() - k);
  return sgn(q) < 0 ? "-" + s : s;
}

std::size_t bit_size(const Rational& q) {
  return mpz_sizeinbase(q.get_num_mpz_t(), 2) + mpz_sizeinbase(q.get_den_mpz_t(), 2);
}

}  // namespace realc
