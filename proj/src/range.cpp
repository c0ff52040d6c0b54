#include "realc/range.hpp"

#include <stdexcept>
#include <unordered_map>

namespace realc {

std::string to_string(FaultKind k) { return k == FaultKind::division_by_zero ? "division-by-zero" : "negative-sqrt"; }

std::map<std::string, Interval> box_of(const Constraint& pre) {
  std::map<std::string, Interval> env;
  for (const auto& v : pre.vars) {
    if (!v.bounds) throw std::invalid_argument("variable '" + v.name + "' has no bounds");
    env.emplace(v.name, *v.bounds);
  }
  return env;
}

namespace {

// Keeps endpoint sizes bounded in deep expressions.
Interval tame(const Interval& x) {
  if (bit_size(x.lo()) + bit_size(x.hi()) > 2048) return round_outward(x, 512);
  return x;
}

bool definitely(const Interval& l, CmpOp op, const Interval& r) {
  switch (op) {
    case CmpOp::lt: return l.hi() < r.lo();
    case CmpOp::le: return l.hi() <= r.lo();
    case CmpOp::gt: return l.lo() > r.hi();
    case CmpOp::ge: return l.lo() >= r.hi();
  }
  return false;
}

class Evaluator {
 public:
  Evaluator(const std::map<std::string, Interval>& env, const OperandRefiner& refine, std::vector<RangeIssue>& issues)
      : env_(env), refine_(refine), issues_(issues) {}

  std::optional<Interval> eval(const ExprPtr& e) {
    if (auto it = memo_.find(e.get()); it != memo_.end()) return it->second;
    std::optional<Interval> out = compute(e);
    if (out) out = tame(*out);
    memo_.emplace(e.get(), out);
    return out;
  }

 private:
  const std::map<std::string, Interval>& env_;
  const OperandRefiner& refine_;
  std::vector<RangeIssue>& issues_;
  std::unordered_map<const Expr*, std::optional<Interval>> memo_;

  Interval refined(const ExprPtr& operand, const Interval& enclosure) {
    if (!refine_) return enclosure;
    auto t = intersect(enclosure, refine_(operand, enclosure));
    return t ? *t : enclosure;
  }

  std::optional<Interval> compute(const ExprPtr& e) {
    switch (e->kind) {
      case ExprKind::constant: return Interval(e->value);
      case ExprKind::variable: {
        auto it = env_.find(e->name);
        if (it == env_.end()) throw std::invalid_argument("unbound variable '" + e->name + "'");
        return it->second;
      }
      case ExprKind::neg: {
        auto a = eval(e->args[0]);
        if (!a) return std::nullopt;
        return -*a;
      }
      case ExprKind::add:
      case ExprKind::sub:
      case ExprKind::mul: {
        auto a = eval(e->args[0]);
        auto b = eval(e->args[1]);
        if (!a || !b) return std::nullopt;
        if (e->kind == ExprKind::add) return *a + *b;
        if (e->kind == ExprKind::sub) return *a - *b;
        return *a * *b;
      }
      case ExprKind::div: {
        auto a = eval(e->args[0]);
        auto b = eval(e->args[1]);
        if (b && b->contains_zero()) b = refined(e->args[1], *b);
        if (b && b->contains_zero()) {
          issues_.push_back({FaultKind::division_by_zero, e, b});
          return std::nullopt;
        }
        if (!a || !b) return std::nullopt;
        return *a / *b;
      }
      case ExprKind::sqrt: {
        auto a = eval(e->args[0]);
        if (!a) return std::nullopt;
        if (sgn(a->lo()) < 0) a = refined(e->args[0], *a);
        if (sgn(a->lo()) < 0) {
          issues_.push_back({FaultKind::negative_sqrt, e, a});
          if (sgn(a->hi()) < 0) return std::nullopt;
          // enclose the values where the root is defined
          return sqrt(Interval(Rational(0), a->hi()));
        }
        return sqrt(*a);
      }
      case ExprKind::ite: {
        auto l = eval(e->args[0]);
        auto r = eval(e->args[1]);
        if (l && r) {
          if (definitely(*l, e->cmp, *r)) return eval(e->args[2]);
          if (definitely(*l, negate(e->cmp), *r)) return eval(e->args[3]);
        }
        auto t = eval(e->args[2]);
        auto f = eval(e->args[3]);
        if (!t || !f) return std::nullopt;
        return hull(*t, *f);
      }
      case ExprKind::let: return eval(inline_lets(e));
      case ExprKind::call:
      case ExprKind::actual:
      case ExprKind::initial_error:
        throw std::invalid_argument("range evaluation needs calls and ~x/!x replaced first");
    }
    return std::nullopt;
  }
};

// A dyadic point strictly inside (a, b) near the midpoint; keeps solver
// constants short.
Rational split_point(const Rational& a, const Rational& b) {
  Rational mid = a + (b - a) / 2;
  Rational m = round_dyadic(mid, 64, Rounding::nearest);
  return (a < m && m < b) ? m : mid;
}

}  // namespace

Interval eval_interval(const ExprPtr& e, const std::map<std::string, Interval>& env) {
  std::vector<RangeIssue> issues;
  OperandRefiner none;
  Evaluator ev(env, none, issues);
  auto r = ev.eval(inline_lets(e));
  if (!issues.empty()) {
    if (issues.front().kind == FaultKind::division_by_zero) throw DivisionByZeroRange();
    throw NegativeSqrtRange();
  }
  return *r;
}

RangeResult eval_interval_checked(const ExprPtr& e, const std::map<std::string, Interval>& env,
                                  const OperandRefiner& refine) {
  RangeResult out;
  Evaluator ev(env, refine, out.issues);
  out.range = ev.eval(inline_lets(e));
  return out;
}

Rational tighten_bound(BoundSide side, const Interval& init, const ExprPtr& e, const RangeConfig& cfg,
                       const RangeOracle& oracle) {
  const bool lower = side == BoundSide::lower;
  // violation of a candidate bound m: e < m (lower) or e > m (upper)
  auto violated = [&](const Rational& m) {
    return oracle(fm::cmp(e, lower ? CmpOp::lt : CmpOp::gt, ex::constant(m)));
  };
  if (init.is_point()) return lower ? init.lo() : init.hi();
  Rational sound = lower ? init.lo() : init.hi();
  Rational first = lower ? Rational(init.lo() + cfg.precision) : Rational(init.hi() - cfg.precision);
  if (lower ? first >= init.hi() : first <= init.lo()) return sound;
  if (!violated(first).is_unsat()) return sound;  // already tight, or unknown

  // proven side `a`, refuted side `b`, in the direction of the bound
  Rational a = first, b = lower ? init.hi() : init.lo();
  for (int it = 0; it < cfg.max_iterations && abs(b - a) > cfg.precision; ++it) {
    Rational mid = lower ? split_point(a, b) : split_point(b, a);
    SolverVerdict v = violated(mid);
    if (v.is_unsat()) {
      a = mid;
    } else if (v.is_sat()) {
      b = mid;
    } else {
      break;
    }
  }
  return a;
}

Interval tighten(const Interval& init, const ExprPtr& e, const RangeConfig& cfg, const RangeOracle& oracle) {
  Rational lo = tighten_bound(BoundSide::lower, init, e, cfg, oracle);
  Rational hi = tighten_bound(BoundSide::upper, init, e, cfg, oracle);
  if (lo > hi) {
    // Only possible when pre itself is infeasible; every bound is then vacuous.
    return init;
  }
  return Interval(lo, hi);
}

RangeOracle session_oracle(Session& s) {
  return [&s](const FormulaPtr& q) {
    Constraint c;
    c.assert_that(q);
    return s.check(c);
  };
}

RangeResult get_range(const Constraint& pre, const ExprPtr& e, const RangeConfig& cfg, Session& s) {
  ExprPtr body = inline_lets(e);
  auto env = box_of(pre);
  return with_assertions(s, pre, [&](Session& scoped) {
    RangeOracle oracle = session_oracle(scoped);
    OperandRefiner refine = [&](const ExprPtr& operand, const Interval& enclosure) {
      return tighten(enclosure, operand, cfg, oracle);
    };
    RangeResult r = eval_interval_checked(body, env, refine);
    if (r.range) r.range = tighten(*r.range, body, cfg, oracle);
    return r;
  });
}

RangeResult get_range(const Constraint& pre, const ExprPtr& e, const RangeConfig& cfg) {
  Session s(cfg.solver);
  return get_range(pre, e, cfg, s);
}

}  // namespace realc
