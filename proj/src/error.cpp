#include "realc/error.hpp"

#include "realc/path.hpp"

#include <stdexcept>
#include <unordered_map>

namespace realc {

std::string to_string(IssueKind k) {
  switch (k) {
    case IssueKind::overflow: return "overflow";
    case IssueKind::division_by_zero: return "division-by-zero";
    case IssueKind::negative_sqrt: return "negative-sqrt";
  }
  return "?";
}

Constraint ideal_precondition(const FunctionDef& f) {
  Constraint c;
  for (const auto& p : f.params) {
    auto r = f.range_of(p);
    if (!r) throw std::invalid_argument("parameter '" + p + "' has no range");
    c.declare(p, *r);
  }
  for (const auto& g : f.pre_constraints()) c.assert_that(g);
  return c;
}

FormulaPtr strict_bounds(const FunctionDef& f) {
  std::vector<FormulaPtr> atoms;
  for (const auto& c : f.pre) {
    if (c.kind != ClauseKind::range_bound) continue;
    if (c.lo && c.lo_strict) atoms.push_back(fm::cmp(ex::var(c.var), CmpOp::gt, ex::constant(*c.lo)));
    if (c.hi && c.hi_strict) atoms.push_back(fm::cmp(ex::var(c.var), CmpOp::lt, ex::constant(*c.hi)));
  }
  return fm::conj(std::move(atoms));
}

ErrorInputs error_inputs(const FunctionDef& f, const PrecisionSpec& prec) {
  ErrorInputs in;
  in.pre = ideal_precondition(f);
  for (const auto& p : f.params) {
    Interval r = *f.range_of(p);
    InputNoise n;
    if (const SpecClause* u = f.uncertainty_of(p)) {
      n.noise = u->kind == ClauseKind::abs_uncertainty ? u->magnitude->value : abs(u->magnitude->value) * r.max_abs();
      n.roundoff = prec.epsilon * (r.max_abs() + n.noise);
    } else {
      n.roundoff = prec.epsilon * r.max_abs();
    }
    in.inputs[p] = n;
  }
  return in;
}

Rational fresh_roundoff(const Interval& total, const PrecisionSpec& prec) { return prec.epsilon * total.max_abs(); }

namespace {

Rational up(const Rational& q) { return round_dyadic(q, 64, Rounding::up); }

Interval tame(const Interval& x) {
  if (bit_size(x.lo()) + bit_size(x.hi()) > 400) return round_outward(x, 128);
  return x;
}

// Coefficients with huge numerators/denominators are rounded to 64 bits and
// the rounding slack moves into one fresh term per provenance.
AffineForm tidy(const AffineForm& a, NoiseSource& ns) {
  bool big = bit_size(a.center()) > 300;
  for (const auto& [id, c] : a.terms()) big = big || bit_size(c) > 300;
  if (!big) return a;
  std::map<Provenance, Rational> slack;
  Rational center = a.center();
  if (bit_size(center) > 300) {
    Rational r = round_dyadic(center, 64, Rounding::nearest);
    slack[Provenance::propagation] += abs(center - r);
    center = r;
  }
  std::vector<AffineForm::Term> terms;
  for (const auto& [id, c] : a.terms()) {
    if (bit_size(c) > 300) {
      Rational r = round_dyadic(c, 64, Rounding::nearest);
      slack[ns.provenance(id)] += abs(c - r);
      terms.push_back({id, r});
    } else {
      terms.push_back({id, c});
    }
  }
  AffineForm out(center, std::move(terms));
  for (const auto& [p, s] : slack) out = out + AffineForm::fresh_term(up(s), ns, p);
  return out;
}

AffineForm with_roundoff(const AffineForm& err, const Interval& range, const PrecisionSpec& prec, NoiseSource& ns) {
  Interval tot = range + to_interval(err);
  return tidy(err + AffineForm::fresh_term(up(fresh_roundoff(tot, prec)), ns, Provenance::roundoff), ns);
}

}  // namespace

AffineForm scale(const Interval& k, const AffineForm& a, NoiseSource& ns, Provenance p) {
  if (a.is_zero()) return a;
  AffineForm out = k.is_point() ? k.lo() * a : k.mid() * a;
  if (!k.is_point()) out = out + AffineForm::fresh_term(up(k.radius() * a.max_abs()), ns, p);
  return tidy(out, ns);
}

UncertainValue propagate_mul(const UncertainValue& x, const UncertainValue& y, const Interval& range,
                             const PrecisionSpec& prec, NoiseSource& ns) {
  AffineForm err = scale(x.range, y.err, ns) + scale(y.range, x.err, ns) + affine_mul(x.err, y.err, ns);
  return {range, with_roundoff(err, range, prec, ns)};
}

UncertainValue propagate_div(const UncertainValue& x, const UncertainValue& y, const Interval& range,
                             const PrecisionSpec& prec, NoiseSource& ns) {
  Interval ty = y.total();
  if (ty.contains_zero() || y.range.contains_zero()) throw DivisionByZeroRange();
  // 1/y~ - 1/y = -(y~ - y) / (y * y~)
  Interval k = tame(-inverse(y.range * ty));
  AffineForm inv_err = scale(k, y.err, ns);
  Interval inv = tame(inverse(y.range));
  AffineForm err = scale(x.range, inv_err, ns) + scale(inv, x.err, ns) + affine_mul(x.err, inv_err, ns);
  return {range, with_roundoff(err, range, prec, ns)};
}

UncertainValue propagate_sqrt(const UncertainValue& x, const Interval& range, const PrecisionSpec& prec,
                              NoiseSource& ns) {
  Interval tx = x.total();
  if (sgn(tx.lo()) < 0 || sgn(x.range.lo()) < 0) throw NegativeSqrtRange();
  AffineForm err;
  if (!x.err.is_zero()) {
    // sqrt(x~) - sqrt(x) = (x~ - x) / (sqrt(x~) + sqrt(x))
    Interval denom = sqrt(tx) + sqrt(x.range);
    if (sgn(denom.lo()) > 0) {
      err = scale(tame(inverse(denom)), x.err, ns);
    } else {
      // both may touch 0: |sqrt(a) - sqrt(b)| <= sqrt(|a - b|)
      err = AffineForm::fresh_term(up(sqrt_up(x.err.max_abs())), ns, Provenance::propagation);
    }
  }
  return {range, with_roundoff(err, range, prec, ns)};
}

UncertainValue merge_paths(const UncertainValue& a, const UncertainValue& b, NoiseSource& ns) {
  Interval range = hull(a.range, b.range);
  if (a.err == b.err) return {range, a.err};
  Interval e = hull(to_interval(a.err), to_interval(b.err));
  return {range, AffineForm(e.mid(), {}) + AffineForm::fresh_term(e.radius(), ns, Provenance::path)};
}

struct RangeKey {
  std::string ctx;
  ExprPtr e;
  Interval init;
};
struct RangeKeyHash {
  std::size_t operator()(const RangeKey& k) const { return std::hash<std::string>()(k.ctx) ^ (k.e->hash * 31); }
};
struct RangeKeyEq {
  bool operator()(const RangeKey& a, const RangeKey& b) const {
    return a.ctx == b.ctx && a.init == b.init && structurally_equal(a.e, b.e);
  }
};

class RangeCache {
 public:
  std::unordered_map<RangeKey, Interval, RangeKeyHash, RangeKeyEq> map;
};

std::shared_ptr<RangeCache> make_range_cache() { return std::make_shared<RangeCache>(); }

namespace {

struct Abort {};

bool representable(const Rational& c, const PrecisionSpec& prec) {
  if (sgn(c) == 0) return true;
  unsigned bits = prec.name == PrecisionName::float32 ? 24 : 53;
  Rational min_normal = prec.name == PrecisionName::float32 ? pow2(-126) : pow2(-1022);
  return fits_mantissa(c, bits) && abs(c) <= prec.overflow && abs(c) >= min_normal;
}

class Analyzer {
 public:
  Analyzer(const ErrorInputs& in, const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s)
      : in_(in), prec_(prec), cfg_(cfg), s_(s), ctx_key_(cfg.context) {}

  NoiseSource ns;
  std::vector<AnalysisIssue> issues;
  Rational max_path{0};

  struct Ctx {
    std::unordered_map<const Expr*, UncertainValue> memo;
    const Ctx* parent = nullptr;
  };

  UncertainValue eval(const ExprPtr& e, Ctx& ctx) {
    for (const Ctx* c = &ctx; c; c = c->parent) {
      if (auto it = c->memo.find(e.get()); it != c->memo.end()) return it->second;
    }
    UncertainValue v = compute(e, ctx);
    v.range = tame(v.range);
    Interval tot = v.total();
    if (tot.max_abs() > prec_.overflow) issues.push_back({IssueKind::overflow, to_source(e), tot, false});
    ctx.memo.emplace(e.get(), v);
    return v;
  }

 private:
  const ErrorInputs& in_;
  const PrecisionSpec& prec_;
  const ErrorConfig& cfg_;
  Session& s_;

  std::string ctx_key_;
  std::unordered_map<std::string, AffineForm> input_err_;

  Interval range_of(const ExprPtr& e, const Interval& init) {
    if (!cfg_.tighten_ranges || init.is_point()) return init;
    if (!cfg_.cache) return tighten(init, e, cfg_.range, session_oracle(s_));
    RangeKey key{ctx_key_, e, init};
    auto it = cfg_.cache->map.find(key);
    if (it != cfg_.cache->map.end()) return it->second;
    Interval r = tighten(init, e, cfg_.range, session_oracle(s_));
    cfg_.cache->map.emplace(std::move(key), r);
    return r;
  }

  [[noreturn]] void fault(IssueKind k, const ExprPtr& at, const Interval& total, bool ideal) {
    issues.push_back({k, to_source(at), total, ideal});
    throw Abort{};
  }

  UncertainValue compute(const ExprPtr& e, Ctx& ctx) {
    switch (e->kind) {
      case ExprKind::constant: {
        AffineForm err;
        if (!representable(e->value, prec_)) {
          err = AffineForm::fresh_term(up(prec_.epsilon * abs(e->value)), ns, Provenance::roundoff);
        }
        return {Interval(e->value), err};
      }
      case ExprKind::variable: {
        auto it = in_.inputs.find(e->name);
        const VarDecl* d = in_.pre.find(e->name);
        if (!d || !d->bounds) throw std::invalid_argument("unbounded input '" + e->name + "'");
        // one set of noise terms per input, however many nodes name it
        auto [slot, fresh] = input_err_.try_emplace(e->name);
        if (fresh && it != in_.inputs.end()) {
          slot->second = AffineForm::fresh_term(up(it->second.noise), ns, Provenance::input) +
                         AffineForm::fresh_term(up(it->second.roundoff), ns, Provenance::roundoff);
        }
        return {range_of(e, *d->bounds), slot->second};
      }
      case ExprKind::neg: {
        UncertainValue x = eval(e->args[0], ctx);
        return {-x.range, -x.err};
      }
      case ExprKind::add:
      case ExprKind::sub: {
        UncertainValue x = eval(e->args[0], ctx), y = eval(e->args[1], ctx);
        bool add = e->kind == ExprKind::add;
        Interval r = range_of(e, add ? x.range + y.range : x.range - y.range);
        return {r, with_roundoff(add ? x.err + y.err : x.err - y.err, r, prec_, ns)};
      }
      case ExprKind::mul: {
        UncertainValue x = eval(e->args[0], ctx), y = eval(e->args[1], ctx);
        return propagate_mul(x, y, range_of(e, x.range * y.range), prec_, ns);
      }
      case ExprKind::div: {
        UncertainValue x = eval(e->args[0], ctx), y = eval(e->args[1], ctx);
        if (y.range.contains_zero()) fault(IssueKind::division_by_zero, e, y.range, true);
        if (y.total().contains_zero()) fault(IssueKind::division_by_zero, e, y.total(), false);
        return propagate_div(x, y, range_of(e, x.range / y.range), prec_, ns);
      }
      case ExprKind::sqrt: {
        UncertainValue x = eval(e->args[0], ctx);
        if (sgn(x.range.lo()) < 0) fault(IssueKind::negative_sqrt, e, x.range, true);
        if (sgn(x.total().lo()) < 0) fault(IssueKind::negative_sqrt, e, x.total(), false);
        return propagate_sqrt(x, range_of(e, sqrt(x.range)), prec_, ns);
      }
      case ExprKind::ite: return branch(e, ctx);
      default: throw std::invalid_argument("error analysis needs lets, calls and ~x/!x removed first");
    }
  }

  UncertainValue under(const FormulaPtr& cond, const ExprPtr& e, Ctx& ctx) {
    Constraint c;
    c.assert_that(cond);
    std::string saved = ctx_key_;
    ctx_key_ += "&" + to_source(cond);
    struct Restore {
      std::string& key;
      std::string value;
      ~Restore() { key = value; }
    } restore{ctx_key_, saved};
    return with_assertions(s_, c, [&](Session&) {
      Ctx sub;
      sub.parent = &ctx;
      return eval(e, sub);
    });
  }

  UncertainValue branch(const ExprPtr& e, Ctx& ctx) {
    if (e->args[2] == e->args[3] || structurally_equal(e->args[2], e->args[3])) return eval(e->args[2], ctx);
    Guard g = Guard::of_ite(e);
    auto feasible = [&](const FormulaPtr& f) {
      Constraint q;
      q.assert_that(f);
      return !s_.check(q).is_unsat();
    };
    bool t = feasible(g.holds()), f = feasible(g.fails());
    UncertainValue v;
    if (t && !f) {
      v = eval(e->args[2], ctx);
    } else if (f && !t) {
      v = eval(e->args[3], ctx);
    } else {
      v = merge_paths(under(g.holds(), e->args[2], ctx), under(g.fails(), e->args[3], ctx), ns);
    }
    if (!cfg_.path_error) return v;
    return with_divergence(v, g, e, ctx, t || !f, f || !t);
  }

  // Widens v's error to cover runs whose actual guard differs from the ideal one.
  UncertainValue with_divergence(const UncertainValue& v, const Guard& g, const ExprPtr& e, Ctx& ctx,
                                 bool then_ideal, bool else_ideal) {
    UncertainValue l = eval(g.lhs, ctx), r = eval(g.rhs, ctx);
    Rational err_c = up((l.err - r.err).max_abs());
    ErrorConfig sub = cfg_;
    sub.context = ctx_key_;
    Rational worst{0};
    auto side = [&](bool taken, const ExprPtr& f_ideal, const ExprPtr& f_actual) {
      FormulaPtr region = fm::conj({taken ? g.holds() : g.fails(), g.reachable(!taken, err_c)});
      PathError pe = divergence_bound(in_, region, f_ideal, f_actual, prec_, sub, s_, Boundary{g, err_c});
      issues.insert(issues.end(), pe.issues.begin(), pe.issues.end());
      if (!pe.bound) throw Abort{};
      if (*pe.bound > worst) worst = *pe.bound;
    };
    if (then_ideal) side(true, e->args[2], e->args[3]);
    if (else_ideal) side(false, e->args[3], e->args[2]);
    if (worst > max_path) max_path = worst;
    Interval cur = to_interval(v.err);
    if (cur.lo() <= -worst && cur.hi() >= worst) return v;
    Interval wide = hull(cur, Interval(-worst, worst));
    return {v.range, AffineForm(wide.mid(), {}) + AffineForm::fresh_term(wide.radius(), ns, Provenance::path)};
  }
};

}  // namespace

std::optional<Rational> guard_error(const ErrorInputs& in, const ExprPtr& lhs, const ExprPtr& rhs,
                                    const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s) {
  return with_assertions(s, in.pre, [&](Session&) -> std::optional<Rational> {
    Analyzer an(in, prec, cfg, s);
    try {
      Analyzer::Ctx root;
      UncertainValue l = an.eval(inline_lets(lhs), root), r = an.eval(inline_lets(rhs), root);
      return up((l.err - r.err).max_abs());
    } catch (const Abort&) {
      return std::nullopt;
    }
  });
}

ErrorResult eval_with_error(const ErrorInputs& in, const ExprPtr& e, const PrecisionSpec& prec,
                            const ErrorConfig& cfg, Session& s) {
  ExprPtr body = inline_lets(e);
  if (cfg.paths == PathMode::explicit_paths && contains_kind(body, ExprKind::ite)) {
    return eval_paths_explicit(in, body, prec, cfg, s);
  }
  return with_assertions(s, in.pre, [&](Session&) {
    Analyzer an(in, prec, cfg, s);
    ErrorResult out;
    try {
      Analyzer::Ctx root;
      UncertainValue v = an.eval(body, root);
      out.range = v.range;
      out.err = v.err;
      out.error_bound = up(v.err.max_abs());
      out.split = split_by_provenance(v.err, an.ns);
      out.path_error = an.max_path;
    } catch (const Abort&) {
      out.fatal = true;
      RangeResult r = get_range(in.pre, body, cfg.range, s);
      if (r.range) out.range = *r.range;
    }
    out.issues = std::move(an.issues);
    return out;
  });
}

ErrorResult eval_with_error(const ErrorInputs& in, const ExprPtr& e, const PrecisionSpec& prec,
                            const ErrorConfig& cfg) {
  Session s(cfg.range.solver);
  return eval_with_error(in, e, prec, cfg, s);
}

}  // namespace realc
