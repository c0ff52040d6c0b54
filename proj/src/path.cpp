#include "realc/path.hpp"

#include <algorithm>

#include "realc/algebra.hpp"
#include "realc/linear.hpp"

namespace realc {

namespace {

Rational up(const Rational& q) { return round_dyadic(q, 64, Rounding::up); }

const Rational kPathPrecision("1/1000000000000");
constexpr int kBandIterations = 25;

// For a linear guard value c = k*v + rest: v := v - c/k moves a point onto
// c = 0 and changes v by |c|/|k|. Picks the variable with the largest |k|.
struct Projection {
  std::string var;
  ExprPtr onto;     // v on the surface, in the other variables
  Rational scale;   // 1/|k|
};

std::optional<Projection> projection(const ExprPtr& c) {
  auto lin = as_linear(c);
  if (!lin || lin->coeffs.empty()) return std::nullopt;
  auto best = lin->coeffs.begin();
  for (auto it = lin->coeffs.begin(); it != lin->coeffs.end(); ++it) {
    if (abs(it->second) > abs(best->second)) best = it;
  }
  const Rational k = best->second;
  LinearForm rest;
  for (const auto& [u, cu] : lin->coeffs) {
    if (u != best->first) rest.coeffs[u] = -cu / k;
  }
  rest.constant = -lin->constant / k;
  return Projection{best->first, from_linear(rest), 1 / abs(k)};
}

// |f(x0) - f(x)| where x0 differs from x in one input by at most w: error
// propagation of that input noise alone, with exact arithmetic.
std::optional<Rational> sensitivity(const Constraint& band, const std::string& var, const Rational& w,
                                    const ExprPtr& f, const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s) {
  ErrorInputs in;
  in.pre = band;
  in.inputs[var].noise = w;
  PrecisionSpec exact = prec;
  exact.epsilon = 0;
  ErrorResult r = eval_with_error(in, f, exact, cfg, s);
  if (r.fatal) return std::nullopt;
  return r.error_bound;
}

// With h = f1 - f2 and x0 the projection of x onto the guard surface,
// |h(x)| <= |h(x) - h(x0)| + |h(x0)|. The first part is error propagation of
// the shift, where matching slopes of the branches cancel; the second is 0
// when the branches agree on the boundary. A range of h over the thin band
// rarely shows either.
std::optional<Rational> through_boundary(const Constraint& band, const Boundary& near, const ExprPtr& h,
                                         const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s) {
  auto p = projection(near.guard.value());
  if (!p) return std::nullopt;
  ExprPtr on = simplify(substitute(h, {{p->var, p->onto}}));
  Rational gap{0};
  if (!(on->is_constant() && sgn(on->value) == 0)) {
    Constraint rest;
    for (const VarDecl& v : band.vars) {
      if (v.name != p->var && v.bounds) rest.declare(v.name, *v.bounds);
    }
    RangeResult r = get_range(rest, on, path_range_config(cfg.range));
    if (!r.ok()) return std::nullopt;
    gap = r.range->max_abs();
  }
  auto shift = sensitivity(band, p->var, near.slack * p->scale, h, prec, cfg, s);
  if (!shift) return std::nullopt;
  return *shift + gap;
}

}  // namespace

Guard Guard::of_ite(const ExprPtr& ite) { return {ite->args[0], ite->cmp, ite->args[1]}; }

ExprPtr Guard::value() const { return ex::sub(lhs, rhs); }

FormulaPtr Guard::holds() const { return fm::cmp(lhs, op, rhs); }

FormulaPtr Guard::fails() const { return fm::cmp(lhs, negate(op), rhs); }

FormulaPtr Guard::reachable(bool taken, const Rational& slack) const {
  // actual c~ op 0 with |c~ - c| <= slack: c < slack for <, c > -slack for >
  CmpOp side = taken ? op : negate(op);
  bool below = side == CmpOp::lt || side == CmpOp::le;
  return fm::cmp(value(), side, ex::constant(below ? slack : Rational(-slack)));
}

RangeConfig path_range_config(const RangeConfig& base) {
  RangeConfig rc = base;
  rc.precision = std::min(base.precision, kPathPrecision);
  rc.max_iterations = 2 * base.max_iterations;
  return rc;
}

PathError divergence_bound(const ErrorInputs& in, const FormulaPtr& region, const ExprPtr& f_ideal,
                           const ExprPtr& f_actual, const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s,
                           const std::optional<Boundary>& near) {
  Constraint band = in.pre;
  band.assert_that(region);
  RangeConfig rc = path_range_config(cfg.range);
  return with_assertions(s, band, [&](Session&) {
    PathError out;
    if (s.check(Constraint{}).is_unsat()) {
      out.bound = Rational(0);
      return out;
    }
    // error analyses on the band share one cache; their node ranges only
    // scale error terms, so a short search is enough
    ErrorConfig ec = cfg;
    ec.context = cfg.context + "|band:" + to_source(region);
    ec.range.max_iterations = std::min(cfg.range.max_iterations, kBandIterations);
    if (!ec.cache) ec.cache = make_range_cache();
    ErrorInputs sub = in;
    sub.pre = band;
    ErrorResult act = eval_with_error(sub, f_actual, prec, ec, s);
    out.issues = act.issues;
    if (act.fatal) return out;
    ExprPtr fi = inline_lets(f_ideal), fa = inline_lets(f_actual);
    RangeResult ideal = get_range(band, fi, rc, s);
    if (!ideal.range) return out;

    const Interval& a = *ideal.range;
    Interval b(act.range.lo() - act.error_bound, act.range.hi() + act.error_bound);
    Rational best = max(abs(a.hi() - b.lo()), abs(b.hi() - a.lo()));
    ExprPtr h = simplify(ex::sub(fi, fa));
    if ((h->is_constant() && sgn(h->value) == 0) || identically_zero(h)) {
      // the branches compute the same real function
      best = act.error_bound;
    } else if (auto via = near ? through_boundary(band, *near, h, prec, ec, s) : std::nullopt) {
      best = std::min(best, Rational(*via + act.error_bound));
    } else {
      // same-input difference keeps the correlation the endpoints lose
      RangeResult d = get_range(band, h, rc, s);
      if (d.range) best = std::min(best, Rational(d.range->max_abs() + act.error_bound));
    }
    out.bound = up(best);
    return out;
  });
}

PathError compute_path_error(const ErrorInputs& in, const PathPair& p, const Rational& err_c,
                             const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s) {
  bool then_ideal = p.direction == Direction::then_else;
  FormulaPtr region = fm::conj({then_ideal ? p.guard.holds() : p.guard.fails(), p.guard.reachable(!then_ideal, err_c)});
  return divergence_bound(in, region, p.taken_ideal, p.taken_actual, prec, cfg, s, Boundary{p.guard, err_c});
}

PathError get_path_error(const ErrorInputs& in, const Guard& g, const ExprPtr& f1, const ExprPtr& f2,
                         const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s) {
  PathError out;
  auto err_c = guard_error(in, g.lhs, g.rhs, prec, cfg, s);
  if (!err_c) return out;
  Rational worst{0};
  for (const PathPair& p : {PathPair{g, f1, f2, Direction::then_else}, PathPair{g, f2, f1, Direction::else_then}}) {
    PathError one = compute_path_error(in, p, *err_c, prec, cfg, s);
    out.issues.insert(out.issues.end(), one.issues.begin(), one.issues.end());
    if (!one.bound) return out;
    worst = std::max(worst, *one.bound);
  }
  out.bound = worst;
  return out;
}

PathError get_path_error(const ErrorInputs& in, const Guard& g, const ExprPtr& f1, const ExprPtr& f2,
                         const PrecisionSpec& prec, const ErrorConfig& cfg) {
  Session s(cfg.range.solver);
  return get_path_error(in, g, f1, f2, prec, cfg, s);
}

FormulaPtr Path::condition() const {
  std::vector<FormulaPtr> parts;
  for (const auto& [g, taken] : decisions) parts.push_back(taken ? g.holds() : g.fails());
  return parts.empty() ? fm::truth() : fm::conj(std::move(parts));
}

namespace {

bool same_guard(const Guard& a, const Guard& b) {
  return a.op == b.op && structurally_equal(a.lhs, b.lhs) && structurally_equal(a.rhs, b.rhs);
}

// Decisions of both; nullopt when they contradict on one guard.
std::optional<std::vector<std::pair<Guard, bool>>> join(const std::vector<std::pair<Guard, bool>>& a,
                                                        const std::vector<std::pair<Guard, bool>>& b) {
  auto out = a;
  for (const auto& d : b) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& o) { return same_guard(o.first, d.first); });
    if (it == out.end()) out.push_back(d);
    else if (it->second != d.second) return std::nullopt;
  }
  return out;
}

struct TooMany {};

class Enumerator {
 public:
  explicit Enumerator(std::size_t limit) : limit_(limit) {}

  const std::vector<Path>& paths(const ExprPtr& e) {
    if (auto it = memo_.find(e.get()); it != memo_.end()) return it->second;
    std::vector<Path> out;
    if (!contains_kind(e, ExprKind::ite)) {
      out.push_back({{}, e});
    } else if (e->kind == ExprKind::ite) {
      for (const Path& combo : product({e->args[0], e->args[1]})) {
        Guard g{combo.body->args[0], e->cmp, combo.body->args[1]};
        for (bool taken : {true, false}) {
          auto pre = join(combo.decisions, {{g, taken}});
          if (!pre) continue;
          for (const Path& arm : paths(e->args[taken ? 2 : 3])) {
            if (auto all = join(*pre, arm.decisions)) add(out, {std::move(*all), arm.body});
          }
        }
      }
    } else {
      for (Path& p : product(e->args)) {
        p.body = ex::make(e->kind, std::vector<ExprPtr>(p.body->args), *e);
        add(out, std::move(p));
      }
    }
    return memo_.emplace(e.get(), std::move(out)).first->second;
  }

 private:
  std::size_t limit_;
  std::unordered_map<const Expr*, std::vector<Path>> memo_;

  void add(std::vector<Path>& v, Path p) {
    v.push_back(std::move(p));
    if (v.size() > limit_) throw TooMany{};
  }

  // Combinations of the argument paths; each body is a placeholder call node
  // whose args are the argument bodies.
  std::vector<Path> product(const std::vector<ExprPtr>& args) {
    std::vector<Path> acc{{{}, ex::call("", {})}};
    for (const ExprPtr& a : args) {
      std::vector<Path> next;
      for (const Path& prefix : acc) {
        for (const Path& p : paths(a)) {
          auto d = join(prefix.decisions, p.decisions);
          if (!d) continue;
          std::vector<ExprPtr> bodies = prefix.body->args;
          bodies.push_back(p.body);
          add(next, {std::move(*d), ex::call("", std::move(bodies))});
        }
      }
      acc = std::move(next);
    }
    return acc;
  }
};

}  // namespace

std::optional<std::vector<Path>> enumerate_paths(const ExprPtr& e, std::size_t limit) {
  Enumerator en(limit);
  try {
    return en.paths(inline_lets(e));
  } catch (const TooMany&) {
    return std::nullopt;
  }
}

std::vector<Path> prune_infeasible(const std::vector<Path>& paths, Session& s) {
  std::vector<Path> out;
  for (const Path& p : paths) {
    Constraint q;
    q.assert_that(p.condition());
    if (!s.check(q).is_unsat()) out.push_back(p);
  }
  return out;
}

ErrorResult eval_paths_explicit(const ErrorInputs& in, const ExprPtr& e, const PrecisionSpec& prec,
                                const ErrorConfig& cfg, Session& s) {
  ErrorConfig merged = cfg;
  merged.paths = PathMode::merged;
  auto all = enumerate_paths(e);
  if (!all) {
    ErrorResult r = eval_with_error(in, e, prec, merged, s);
    r.notes.push_back("too many paths for explicit mode; merged instead");
    return r;
  }
  return with_assertions(s, in.pre, [&](Session&) {
    std::vector<Path> live = prune_infeasible(*all, s);
    ErrorResult out;
    out.notes.push_back("explicit paths: " + std::to_string(live.size()) + " of " + std::to_string(all->size()) +
                        " feasible");
    if (live.empty()) return out;

    auto config_for = [&](const Path& p) {
      ErrorConfig c = merged;
      c.context = cfg.context + "|path:" + to_source(p.condition());
      return c;
    };
    auto inputs_for = [&](const Path& p) {
      ErrorInputs pin = in;
      pin.pre.assert_that(p.condition());
      return pin;
    };

    std::optional<Interval> range, err;
    ProvenanceSplit split;
    for (const Path& p : live) {
      ErrorResult r = eval_with_error(inputs_for(p), p.body, prec, config_for(p), s);
      out.issues.insert(out.issues.end(), r.issues.begin(), r.issues.end());
      if (r.fatal) {
        out.fatal = true;
        continue;
      }
      range = range ? hull(*range, r.range) : r.range;
      Interval ri = to_interval(r.err);
      err = err ? hull(*err, ri) : ri;
      split.input = std::max(split.input, r.split.input);
      split.roundoff = std::max(split.roundoff, r.split.roundoff);
      split.propagation = std::max(split.propagation, r.split.propagation);
      split.path = std::max(split.path, r.split.path);
    }

    for (std::size_t i = 0; cfg.path_error && !out.fatal && i < live.size(); ++i) {
      ErrorInputs iin = inputs_for(live[i]);
      ErrorConfig ic = config_for(live[i]);
      for (std::size_t j = 0; j < live.size() && !out.fatal; ++j) {
        if (i == j) continue;
        std::vector<FormulaPtr> region{live[i].condition()};
        std::optional<Boundary> split_at;
        for (const auto& [g, taken] : live[j].decisions) {
          bool shared = std::any_of(live[i].decisions.begin(), live[i].decisions.end(),
                                    [&](const auto& d) { return d.second == taken && same_guard(d.first, g); });
          if (shared) continue;
          auto eg = guard_error(iin, g.lhs, g.rhs, prec, ic, s);
          if (!eg) {
            out.fatal = true;
            break;
          }
          region.push_back(g.reachable(taken, *eg));
          bool flipped = std::any_of(live[i].decisions.begin(), live[i].decisions.end(),
                                     [&](const auto& d) { return same_guard(d.first, g); });
          if (flipped && !split_at) split_at = Boundary{g, *eg};
        }
        if (out.fatal) break;
        PathError pe = divergence_bound(in, fm::conj(region), live[i].body, live[j].body, prec, merged, s, split_at);
        out.issues.insert(out.issues.end(), pe.issues.begin(), pe.issues.end());
        if (!pe.bound) {
          out.fatal = true;
          break;
        }
        out.path_error = std::max(out.path_error, *pe.bound);
      }
    }

    if (out.fatal) {
      RangeResult r = get_range(in.pre, e, cfg.range, s);
      if (r.range) out.range = *r.range;
      return out;
    }
    Interval wide = hull(*err, Interval(-out.path_error, out.path_error));
    NoiseSource ns;
    out.range = *range;
    out.err = AffineForm(wide.mid(), {}) + AffineForm::fresh_term(wide.radius(), ns, Provenance::path);
    out.error_bound = up(out.err.max_abs());
    split.path = std::max(split.path, out.path_error);
    out.split = split;
    return out;
  });
}

}  // namespace realc
