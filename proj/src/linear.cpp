#include "realc/linear.hpp"

#include <unordered_map>

namespace realc {

namespace {

using Memo = std::unordered_map<const Expr*, std::optional<LinearForm>>;

LinearForm scaled(LinearForm f, const Rational& k) {
  if (sgn(k) == 0) return {};
  for (auto& [name, c] : f.coeffs) c *= k;
  f.constant *= k;
  return f;
}

LinearForm combined(const LinearForm& a, const LinearForm& b, int sign) {
  LinearForm out = a;
  for (const auto& [name, c] : b.coeffs) {
    Rational& slot = out.coeffs[name];
    slot += sign * c;
    if (sgn(slot) == 0) out.coeffs.erase(name);
  }
  out.constant += sign * b.constant;
  return out;
}

bool is_const(const LinearForm& f) { return f.coeffs.empty(); }

const std::optional<LinearForm>& linear_rec(const ExprPtr& e, Memo& memo) {
  if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
  std::optional<LinearForm> out;
  auto arg = [&](int i) -> const std::optional<LinearForm>& { return linear_rec(e->args[i], memo); };
  switch (e->kind) {
    case ExprKind::constant: out = LinearForm{{}, e->value}; break;
    case ExprKind::variable: out = LinearForm{{{e->name, Rational(1)}}, Rational(0)}; break;
    case ExprKind::add:
    case ExprKind::sub: {
      const auto& a = arg(0);
      const auto& b = arg(1);
      if (a && b) out = combined(*a, *b, e->kind == ExprKind::add ? 1 : -1);
      break;
    }
    case ExprKind::neg:
      if (const auto& a = arg(0)) out = scaled(*a, Rational(-1));
      break;
    case ExprKind::mul: {
      const auto& a = arg(0);
      const auto& b = arg(1);
      if (a && b) {
        if (is_const(*a)) out = scaled(*b, a->constant);
        else if (is_const(*b)) out = scaled(*a, b->constant);
      }
      break;
    }
    case ExprKind::div: {
      const auto& a = arg(0);
      const auto& b = arg(1);
      if (a && b && is_const(*b) && sgn(b->constant) != 0) out = scaled(*a, 1 / b->constant);
      break;
    }
    default: break;
  }
  return memo.emplace(e.get(), std::move(out)).first->second;
}

ExprPtr normalize_rec(const ExprPtr& e, Memo& lin, std::unordered_map<const Expr*, ExprPtr>& memo) {
  if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
  ExprPtr out;
  const auto& f = linear_rec(e, lin);
  if (f && !e->is_leaf()) {
    out = from_linear(*f);
  } else {
    std::vector<ExprPtr> args;
    bool same = true;
    for (const auto& a : e->args) {
      args.push_back(normalize_rec(a, lin, memo));
      same = same && args.back() == a;
    }
    out = same ? e : ex::make(e->kind, std::move(args), *e);
  }
  memo.emplace(e.get(), out);
  return out;
}

}  // namespace

std::optional<LinearForm> as_linear(const ExprPtr& e) {
  Memo memo;
  return linear_rec(e, memo);
}

ExprPtr from_linear(const LinearForm& f) {
  ExprPtr sum;
  for (const auto& [name, c] : f.coeffs) {
    ExprPtr term = c == 1 ? ex::var(name) : ex::mul(ex::constant(c), ex::var(name));
    sum = sum ? ex::add(sum, term) : term;
  }
  if (!sum) return ex::constant(f.constant);
  if (sgn(f.constant) != 0) sum = ex::add(sum, ex::constant(f.constant));
  return sum;
}

ExprPtr normalize_linear(const ExprPtr& e) {
  Memo lin;
  std::unordered_map<const Expr*, ExprPtr> memo;
  return normalize_rec(e, lin, memo);
}

}  // namespace realc
