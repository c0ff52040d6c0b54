#include "realc/vcgen.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>
#include <utility>

#include "realc/path.hpp"

namespace realc {

using namespace ex;
using namespace fm;

std::string to_string(VcKind k) { return k == VcKind::postcondition ? "postcondition" : "call-precondition"; }

std::string to_string(VcStatus s) {
  switch (s) {
    case VcStatus::proven: return "proven";
    case VcStatus::disproven: return "disproven";
    case VcStatus::unknown: return "unknown";
  }
  return "?";
}

std::string to_string(CexClass c) { return c == CexClass::valid ? "valid" : "inconclusive"; }

std::string ApproximationStep::str() const {
  static const char* calls_s[] = {"uninterpreted", "postcondition-inline", "body-inline"};
  static const char* arith_s[] = {"exact", "error-approx-actual", "error-approx-both"};
  static const char* paths_s[] = {"merged", "path-by-path"};
  return std::string(calls_s[int(calls)]) + "/" + arith_s[int(arith)] + "/" + paths_s[int(paths)];
}

std::string VerificationCondition::label() const {
  if (kind == VcKind::postcondition) return function + ": postcondition";
  return function + ": precondition of call " + std::to_string(site) + " to " + callee;
}

bool is_roundoff_var(const std::string& name) { return name.rfind("d!", 0) == 0; }

bool same_template(const Constraint& a, const Constraint& b) {
  if (!structurally_equal(a.formula, b.formula) || a.vars.size() != b.vars.size()) return false;
  for (std::size_t i = 0; i < a.vars.size(); ++i) {
    const auto &x = a.vars[i], &y = b.vars[i];
    if (x.name != y.name || x.perturbation != y.perturbation) return false;
    if (is_roundoff_var(x.name)) continue;
    if (x.bounds.has_value() != y.bounds.has_value()) return false;
    if (x.bounds && *x.bounds != *y.bounds) return false;
  }
  return true;
}

namespace {

const FunctionDef& callee_of(const Program& p, const std::string& name) {
  const FunctionDef* f = p.find(name);
  if (!f) throw std::invalid_argument("call to unknown function '" + name + "'");
  return *f;
}

// Constants exact in every target format need no roundoff factor. The
// check is against float32, the coarsest one, so the constraint shape does
// not depend on the precision.
bool exact_everywhere(const Rational& c) { return fits_mantissa(c, 24); }

ExprPtr one() { return constant(Rational(1)); }

// Replaces variables, ~x and !x in a spec expression.
struct SpecMaps {
  std::map<std::string, ExprPtr> ideal, actual, initial;
};

ExprPtr spec_subst(const ExprPtr& e, const SpecMaps& m) {
  std::unordered_map<const Expr*, ExprPtr> memo;
  std::function<ExprPtr(const ExprPtr&)> go = [&](const ExprPtr& n) -> ExprPtr {
    if (auto it = memo.find(n.get()); it != memo.end()) return it->second;
    ExprPtr r;
    const std::map<std::string, ExprPtr>* table = nullptr;
    if (n->kind == ExprKind::variable) table = &m.ideal;
    if (n->kind == ExprKind::actual) table = &m.actual;
    if (n->kind == ExprKind::initial_error) table = &m.initial;
    if (table) {
      auto it = table->find(n->name);
      if (it == table->end()) throw std::invalid_argument("unbound name '" + n->name + "' in a require or ensuring clause");
      r = it->second;
    } else if (n->is_leaf()) {
      r = n;
    } else {
      std::vector<ExprPtr> args;
      for (const auto& a : n->args) args.push_back(go(a));
      r = make(n->kind, std::move(args), *n);
    }
    memo.emplace(n.get(), r);
    return r;
  };
  return go(e);
}

FormulaPtr spec_subst(const FormulaPtr& f, const SpecMaps& m) {
  return map_exprs(f, [&](const ExprPtr& e) { return spec_subst(e, m); });
}

// The clause fails: a disjunction of simple comparisons (or the negated
// constraint). `E` and `A` are the ideal and actual values of the clause's
// variable; `k` the evaluated magnitude.
std::vector<FormulaPtr> violations(const SpecClause& c, const SpecMaps& m) {
  std::vector<FormulaPtr> out;
  switch (c.kind) {
    case ClauseKind::range_bound: {
      ExprPtr E = m.ideal.at(c.var);
      if (c.lo) out.push_back(cmp(E, c.lo_strict ? CmpOp::le : CmpOp::lt, constant(*c.lo)));
      if (c.hi) out.push_back(cmp(E, c.hi_strict ? CmpOp::ge : CmpOp::gt, constant(*c.hi)));
      break;
    }
    case ClauseKind::abs_uncertainty: {
      ExprPtr E = m.ideal.at(c.var), A = m.actual.at(c.var);
      ExprPtr k = spec_subst(c.magnitude, m);
      out.push_back(cmp(sub(A, E), CmpOp::gt, k));
      out.push_back(cmp(sub(E, A), CmpOp::gt, k));
      break;
    }
    case ClauseKind::rel_uncertainty: {
      ExprPtr E = m.ideal.at(c.var), A = m.actual.at(c.var);
      ExprPtr d = sub(A, E);
      ExprPtr mE = mul(constant(c.magnitude->value), E);
      out.push_back(cmp(mul(d, d), CmpOp::gt, mul(mE, mE)));
      break;
    }
    case ClauseKind::constraint:
      out.push_back(to_nnf(spec_subst(c.formula, m), true));
      break;
  }
  return out;
}

// Keeps only the variables a formula mentions.
Constraint pruned(const Constraint& c) {
  auto used = free_vars(c.formula);
  Constraint out;
  out.formula = c.formula;
  for (const auto& v : c.vars)
    if (used.count(v.name)) out.vars.push_back(v);
  return out;
}

}  // namespace

ExprPtr inline_calls(const ExprPtr& e, const Program& p) {
  std::unordered_map<const Expr*, ExprPtr> memo;
  std::function<ExprPtr(const ExprPtr&)> go = [&](const ExprPtr& n) -> ExprPtr {
    if (auto it = memo.find(n.get()); it != memo.end()) return it->second;
    ExprPtr r;
    if (n->is_leaf()) {
      r = n;
    } else {
      std::vector<ExprPtr> args;
      for (const auto& a : n->args) args.push_back(go(a));
      if (n->kind == ExprKind::call) {
        const FunctionDef& g = callee_of(p, n->name);
        Substitution s;
        for (std::size_t i = 0; i < g.params.size(); ++i) s[g.params[i]] = args.at(i);
        r = substitute(inline_calls(inline_lets(g.body), p), s);
      } else {
        r = make(n->kind, std::move(args), *n);
      }
    }
    memo.emplace(n.get(), r);
    return r;
  };
  return go(inline_lets(e));
}

namespace {

// Builds ideal and actual twins of expressions (Table-1 style): one fresh
// roundoff factor per operation, inputs perturbed by their noise and
// representation roundoff, calls handled per `calls`.
class TwinBuilder {
 public:
  using PostOf = std::function<const Spec*(const FunctionDef&)>;

  struct Requirement {  // postcondition inlining is sound only if the argument is this accurate
    ExprPtr arg;
    const FunctionDef* callee;
    std::string param;
  };

  TwinBuilder(const Program& p, CallHandling calls, const PrecisionSpec& prec, PostOf post_of = {})
      : p_(p), calls_(calls), prec_(prec), post_of_(std::move(post_of)) {}

  Constraint hyp;
  std::vector<Requirement> requirements;
  std::string failure;  // non-empty: this call handling does not apply

  // Declares the inputs of f and makes them the current frame.
  void bind_inputs(const FunctionDef& f) {
    hyp = conjoin(hyp, ideal_precondition(f));
    hyp.assert_that(strict_bounds(f));
    Frame fr;
    for (const auto& x : f.params) {
      Interval r = *f.range_of(x);
      Rational noise = 0;
      if (const SpecClause* u = f.uncertainty_of(x))
        noise = u->kind == ClauseKind::abs_uncertainty ? u->magnitude->value : abs(u->magnitude->value) * r.max_abs();
      ExprPtr a = var(x);
      if (sgn(noise) > 0) {
        hyp.declare("e!" + x, Interval(-noise, noise), true);
        a = add(a, var("e!" + x));
      }
      Rational m = r.max_abs() + noise;
      if (sgn(m) > 0) {
        hyp.declare("d!" + x, Interval(-prec_.epsilon, prec_.epsilon), true);
        a = add(a, mul(constant(m), var("d!" + x)));
      }
      fr.ideal[x] = var(x);
      fr.actual[x] = a;
    }
    frames_.clear();
    frames_.push_back(std::move(fr));
  }

  const Substitution& actual_inputs() const { return frames_.front().actual; }

  std::pair<ExprPtr, ExprPtr> twin(const ExprPtr& e) { return go(inline_lets(e)); }

  ExprPtr ideal(const ExprPtr& e) { return twin(e).first; }

 private:
  struct Frame {
    Substitution ideal, actual;
    std::unordered_map<const Expr*, std::pair<ExprPtr, ExprPtr>> memo;
  };

  ExprPtr delta() {
    std::string n = "d!" + std::to_string(++deltas_);
    hyp.declare(n, Interval(-prec_.epsilon, prec_.epsilon), true);
    return var(n);
  }

  ExprPtr rounded(ExprPtr v) { return mul(std::move(v), add(one(), delta())); }

  std::pair<ExprPtr, ExprPtr> go(const ExprPtr& e) {
    Frame& fr = frames_.back();
    if (auto it = fr.memo.find(e.get()); it != fr.memo.end()) return it->second;
    std::pair<ExprPtr, ExprPtr> r;
    switch (e->kind) {
      case ExprKind::constant:
        r = {e, exact_everywhere(e->value) ? e : rounded(e)};
        break;
      case ExprKind::variable: {
        auto i = fr.ideal.find(e->name);
        if (i == fr.ideal.end()) throw std::invalid_argument("unbound variable '" + e->name + "'");
        r = {i->second, fr.actual.at(e->name)};
        break;
      }
      case ExprKind::add:
      case ExprKind::sub:
      case ExprKind::mul:
      case ExprKind::div: {
        auto a = go(e->args[0]);
        auto b = go(e->args[1]);
        r = {make(e->kind, {a.first, b.first}, *e), rounded(make(e->kind, {a.second, b.second}, *e))};
        break;
      }
      case ExprKind::neg: {
        auto a = go(e->args[0]);
        r = {neg(a.first), neg(a.second)};
        break;
      }
      case ExprKind::sqrt: {
        auto a = go(e->args[0]);
        r = {sqrt(a.first), rounded(sqrt(a.second))};
        break;
      }
      case ExprKind::ite: {
        std::vector<std::pair<ExprPtr, ExprPtr>> t;
        for (const auto& a : e->args) t.push_back(go(a));
        r = {ite(t[0].first, e->cmp, t[1].first, t[2].first, t[3].first),
             ite(t[0].second, e->cmp, t[1].second, t[2].second, t[3].second)};
        break;
      }
      case ExprKind::call:
        r = call_twin(e);
        break;
      default:
        throw std::invalid_argument("unexpected '" + to_source(e) + "' in a function body");
    }
    frames_.back().memo.emplace(e.get(), r);
    return r;
  }

  std::pair<ExprPtr, ExprPtr> call_twin(const ExprPtr& e) {
    const FunctionDef& g = callee_of(p_, e->name);
    std::vector<std::pair<ExprPtr, ExprPtr>> args;
    for (const auto& a : e->args) args.push_back(go(a));

    if (calls_ == CallHandling::body_inline) {
      Frame inner;
      for (std::size_t i = 0; i < g.params.size(); ++i) {
        inner.ideal[g.params[i]] = args[i].first;
        inner.actual[g.params[i]] = args[i].second;
      }
      frames_.push_back(std::move(inner));
      auto r = go(inline_lets(g.body));
      frames_.pop_back();
      return r;
    }

    std::string n = "call!" + std::to_string(++calls_made_);
    ExprPtr r = var(n), ra = var(n + "~");
    if (calls_ == CallHandling::uninterpreted) {
      hyp.declare_unbounded(n);
      hyp.declare_unbounded(n + "~");
      return {r, ra};
    }

    const Spec* post = post_of_ ? post_of_(g) : nullptr;
    if (!post) {
      failure = "no usable postcondition for " + g.name;
      hyp.declare_unbounded(n);
      hyp.declare_unbounded(n + "~");
      return {r, ra};
    }
    SpecMaps m;
    ErrorInputs gin = error_inputs(g, prec_);
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      m.ideal[g.params[i]] = args[i].first;
      m.actual[g.params[i]] = args[i].second;
      m.initial[g.params[i]] = constant(gin.inputs.at(g.params[i]).total());
      requirements.push_back({e->args[i], &g, g.params[i]});
    }
    m.ideal["res"] = r;
    m.actual["res"] = ra;
    Rational lo, hi;
    bool have_lo = false, have_hi = false;
    for (const auto& c : *post) {
      if (c.kind == ClauseKind::range_bound && c.var == "res") {
        if (c.lo && (!have_lo || *c.lo > lo)) lo = *c.lo, have_lo = true;
        if (c.hi && (!have_hi || *c.hi < hi)) hi = *c.hi, have_hi = true;
      }
    }
    if (have_lo && have_hi && lo <= hi)
      hyp.declare(n, Interval(lo, hi));
    else
      hyp.declare_unbounded(n);
    hyp.declare_unbounded(n + "~");
    for (const auto& c : *post) hyp.assert_that(to_nnf(disj(violations(c, m)), true));
    return {r, ra};
  }

  const Program& p_;
  CallHandling calls_;
  PrecisionSpec prec_;
  PostOf post_of_;
  std::vector<Frame> frames_;
  int deltas_ = 0;
  int calls_made_ = 0;
};

}  // namespace

namespace {

struct CallSite {
  ExprPtr node;
  std::vector<FormulaPtr> paths;  // any of them reaches the call
};

// Calls of a let-free body in first-visit order, with the ideal branch
// conditions under which each is evaluated.
std::vector<CallSite> call_sites(const ExprPtr& body) {
  std::vector<CallSite> out;
  std::unordered_map<const Expr*, std::size_t> index;
  std::function<void(const ExprPtr&, const std::vector<FormulaPtr>&)> go = [&](const ExprPtr& e,
                                                                                  const std::vector<FormulaPtr>& path) {
    if (e->kind == ExprKind::ite) {
      go(e->args[0], path);
      go(e->args[1], path);
      Guard g = Guard::of_ite(e);
      auto t = path, f = path;
      t.push_back(g.holds());
      f.push_back(g.fails());
      go(e->args[2], t);
      go(e->args[3], f);
      return;
    }
    for (const auto& a : e->args) go(a, path);
    if (e->kind == ExprKind::call) {
      auto [it, fresh] = index.emplace(e.get(), out.size());
      if (fresh) out.push_back({e, {}});
      out[it->second].paths.push_back(conj(path));
    }
  };
  go(body, {});
  return out;
}

// Spec names for the goals of a VC: its results plus the function's inputs.
SpecMaps goal_maps(const VerificationCondition& vc, const FunctionDef& f, const std::vector<ExprPtr>& ideal,
                   const std::vector<ExprPtr>& actual, const Substitution& inputs_actual,
                   const PrecisionSpec& prec) {
  SpecMaps m;
  ErrorInputs in = error_inputs(f, prec);
  for (const auto& x : f.params) {
    m.ideal[x] = var(x);
    m.actual[x] = inputs_actual.at(x);
    m.initial[x] = constant(in.inputs.at(x).total());
  }
  for (std::size_t i = 0; i < vc.results.size(); ++i) {
    m.ideal[vc.results[i].first] = ideal[i];
    m.actual[vc.results[i].first] = actual[i];
  }
  return m;
}

// hyp for the exact steps, and the goals' failure formulas.
struct ExactForm {
  Constraint hyp;
  std::vector<std::vector<FormulaPtr>> failures;  // per goal
  std::vector<TwinBuilder::Requirement> requirements;
  std::string failure;
};

ExactForm exact_form(const Program& p, const VerificationCondition& vc, CallHandling calls, const PrecisionSpec& prec,
                     const TwinBuilder::PostOf& post_of = {}) {
  const FunctionDef& f = callee_of(p, vc.function);
  TwinBuilder b(p, calls, prec, post_of);
  b.bind_inputs(f);
  std::vector<ExprPtr> ideal, actual;
  for (const auto& [name, e] : vc.results) {
    auto t = b.twin(e);
    ideal.push_back(t.first);
    actual.push_back(t.second);
  }
  FormulaPtr path = map_exprs(vc.path, [&](const ExprPtr& e) { return b.ideal(e); });
  SpecMaps m = goal_maps(vc, f, ideal, actual, b.actual_inputs(), prec);
  ExactForm out;
  for (const auto& g : vc.goals) out.failures.push_back(violations(g.clause, m));
  b.hyp.assert_that(path);
  out.hyp = b.hyp;
  out.requirements = b.requirements;
  out.failure = b.failure;
  return out;
}

Constraint with(const Constraint& hyp, const FormulaPtr& f) {
  Constraint c = hyp;
  c.assert_that(f);
  return c;
}

}  // namespace

std::vector<VerificationCondition> generate_vcs(const Program& p, const PrecisionSpec& prec) {
  std::vector<VerificationCondition> out;
  for (const auto& f : p.functions) {
    ExprPtr body = inline_lets(f.body);
    if (f.has_post && !f.post.empty()) {
      VerificationCondition vc;
      vc.function = f.name;
      vc.results = {{"res", body}};
      for (const auto& c : f.post) vc.goals.push_back({c, to_source(c)});
      out.push_back(std::move(vc));
    }
    int site = 0;
    for (const auto& cs : call_sites(body)) {
      const FunctionDef& g = callee_of(p, cs.node->name);
      VerificationCondition vc;
      vc.kind = VcKind::call_precondition;
      vc.function = f.name;
      vc.callee = g.name;
      vc.site = ++site;
      for (std::size_t i = 0; i < g.params.size(); ++i) vc.results.emplace_back(g.params[i], cs.node->args.at(i));
      vc.path = disj(cs.paths);
      for (const auto& c : g.pre) vc.goals.push_back({c, to_source(c)});
      if (vc.goals.empty()) continue;
      out.push_back(std::move(vc));
    }
  }
  for (auto& vc : out) {
    vc.precision = prec;
    ExactForm ef = exact_form(p, vc, CallHandling::uninterpreted, prec);
    std::vector<FormulaPtr> all;
    for (const auto& fs : ef.failures) all.insert(all.end(), fs.begin(), fs.end());
    vc.constraint = with(ef.hyp, disj(all));
  }
  return out;
}

namespace {

// A call abstracted by a fresh input constrained by the callee's
// postcondition, for the error-approximation steps.
struct CallVar {
  std::string name;
  Interval range;
  Rational noise;
};

struct Abstracted {
  std::vector<ExprPtr> exprs;
  std::vector<CallVar> vars;
  std::vector<FormulaPtr> ideal_facts;  // post clauses over the ideal result only
  std::string failure;
};

bool mentions_actual(const FormulaPtr& f) {
  bool hit = false;
  map_exprs(f, [&](const ExprPtr& e) {
    hit = hit || contains_kind(e, ExprKind::actual) || contains_kind(e, ExprKind::initial_error);
    return e;
  });
  return hit;
}

Abstracted abstract_calls(const std::vector<ExprPtr>& exprs, const Program& p, const PrecisionSpec& prec,
                          const TwinBuilder::PostOf& post_of) {
  Abstracted out;
  std::unordered_map<const Expr*, ExprPtr> memo;
  std::function<ExprPtr(const ExprPtr&)> go = [&](const ExprPtr& n) -> ExprPtr {
    if (auto it = memo.find(n.get()); it != memo.end()) return it->second;
    ExprPtr r;
    if (n->kind == ExprKind::call) {
      const FunctionDef& g = callee_of(p, n->name);
      const Spec* post = post_of(g);
      std::optional<Rational> lo, hi, noise;
      SpecMaps m;
      ErrorInputs gin = error_inputs(g, prec);
      std::string name = "call!" + std::to_string(out.vars.size() + 1);
      for (const auto& x : g.params) m.initial[x] = constant(gin.inputs.at(x).total());
      m.ideal["res"] = var(name);
      std::vector<FormulaPtr> facts;
      for (const auto& c : post ? *post : Spec{}) {
        if (c.kind == ClauseKind::range_bound && c.var == "res") {
          if (c.lo && (!lo || *c.lo > *lo)) lo = c.lo;
          if (c.hi && (!hi || *c.hi < *hi)) hi = c.hi;
        } else if (c.kind == ClauseKind::abs_uncertainty && c.var == "res") {
          ExprPtr k = simplify(spec_subst(c.magnitude, m));
          if (k->is_constant() && (!noise || k->value < *noise)) noise = k->value;
        } else if (c.kind == ClauseKind::constraint && !mentions_actual(c.formula) &&
                   free_vars(c.formula) == std::set<std::string>{"res"}) {
          facts.push_back(spec_subst(c.formula, m));
        }
      }
      if (post)
        for (const auto& c : *post)
          if (c.kind == ClauseKind::rel_uncertainty && c.var == "res" && lo && hi) {
            Rational k = abs(c.magnitude->value) * Interval(*lo, *hi).max_abs();
            if (!noise || k < *noise) noise = k;
          }
      if (!lo || !hi || !noise || *lo > *hi) {
        out.failure = "postcondition of " + g.name + " lacks a constant range or error bound";
        r = n;
      } else {
        out.vars.push_back({name, Interval(*lo, *hi), *noise});
        for (auto& f : facts) out.ideal_facts.push_back(f);
        r = var(name);
      }
    } else if (n->is_leaf()) {
      r = n;
    } else {
      std::vector<ExprPtr> args;
      for (const auto& a : n->args) args.push_back(go(a));
      r = make(n->kind, std::move(args), *n);
    }
    memo.emplace(n.get(), r);
    return r;
  };
  for (const auto& e : exprs) out.exprs.push_back(go(e));
  return out;
}

bool within_clause(const Interval& r, const SpecClause& c) {
  if (c.lo && (c.lo_strict ? !(*c.lo < r.lo()) : !(*c.lo <= r.lo()))) return false;
  if (c.hi && (c.hi_strict ? !(r.hi() < *c.hi) : !(r.hi() <= *c.hi))) return false;
  return true;
}

}  // namespace

struct ApproximationStream::Impl {
  const Program& p;
  VerificationCondition vc;
  PrecisionSpec prec;
  VcConfig cfg;
  const FunctionDef& f;
  std::vector<ApproximationStep> plan;
  std::size_t at = 0;
  Session session;
  std::map<std::string, std::optional<Spec>> posts;
  std::optional<std::string> requirement_failure;

  Impl(const Program& p_, const VerificationCondition& vc_, const PrecisionSpec& prec_, const VcConfig& cfg_)
      : p(p_), vc(vc_), prec(prec_), cfg(cfg_), f(callee_of(p_, vc_.function)), session(cfg_.solver) {
    if (!cfg.error.cache) cfg.error.cache = make_range_cache();
    // a call site's branch condition joins the precondition: keep its
    // ranges apart from the function's own
    if (vc.kind == VcKind::call_precondition) cfg.error.context += "|call" + std::to_string(vc.site);
    bool calls = contains_kind_any(ExprKind::call);
    bool ites = false;
    for (const auto& [n, e] : vc.results) ites = ites || contains_kind(inline_calls(e, p), ExprKind::ite);
    plan.push_back({CallHandling::uninterpreted, ArithHandling::exact, PathHandling::merged});
    if (calls) {
      plan.push_back({CallHandling::postcondition_inline, ArithHandling::exact, PathHandling::merged});
      plan.push_back({CallHandling::body_inline, ArithHandling::exact, PathHandling::merged});
    }
    std::vector<CallHandling> ch = calls ? std::vector<CallHandling>{CallHandling::postcondition_inline,
                                                                      CallHandling::body_inline}
                                         : std::vector<CallHandling>{CallHandling::uninterpreted};
    std::vector<PathHandling> ph{PathHandling::merged};
    // explicit paths requested: path-by-path steps come first
    if (ites && cfg.error.paths == PathMode::explicit_paths) ph.insert(ph.begin(), PathHandling::path_by_path);
    else if (ites) ph.push_back(PathHandling::path_by_path);
    for (auto path : ph)
      for (auto arith : {ArithHandling::error_actual, ArithHandling::error_both})
        for (auto c : ch) plan.push_back({c, arith, path});
  }

  bool contains_kind_any(ExprKind k) const {
    for (const auto& [n, e] : vc.results)
      if (contains_kind(e, k)) return true;
    bool hit = false;
    map_exprs(vc.path, [&](const ExprPtr& e) {
      hit = hit || contains_kind(e, k);
      return e;
    });
    return hit;
  }

  const Spec* post_of(const FunctionDef& g) {
    auto it = posts.find(g.name);
    if (it == posts.end()) {
      std::optional<Spec> s;
      if (g.has_post && !g.post.empty()) {
        s = g.post;
      } else {
        GeneratedSpec gs = generate_spec(p, g, prec, spec_config());
        if (gs.complete()) s = gs.clauses();
      }
      it = posts.emplace(g.name, std::move(s)).first;
    }
    return it->second ? &*it->second : nullptr;
  }

  ErrorConfig spec_config() const {
    ErrorConfig ec;
    ec.range = cfg.error.range;
    return ec;
  }

  TwinBuilder::PostOf post_fn() {
    return [this](const FunctionDef& g) { return post_of(g); };
  }

  // Postcondition inlining needs every argument at least as accurate as the
  // callee assumed for its inputs.
  std::optional<std::string> check_requirements(const std::vector<TwinBuilder::Requirement>& reqs) {
    if (requirement_failure) return requirement_failure;
    for (const auto& r : reqs) {
      ErrorInputs in = error_inputs(f, prec);
      ErrorResult er = eval_with_error(in, inline_calls(r.arg, p), prec, cfg.error, session);
      Rational need = error_inputs(*r.callee, prec).inputs.at(r.param).total();
      if (er.fatal || er.error_bound > need) {
        requirement_failure = "argument " + to_source(r.arg) + " of " + r.callee->name +
                              " is less accurate than its postcondition assumes";
        return requirement_failure;
      }
    }
    return std::nullopt;
  }

  StepConstraint exact_step(const ApproximationStep& st) {
    StepConstraint sc;
    sc.step = st;
    ExactForm ef = exact_form(p, vc, st.calls, prec, post_fn());
    if (!ef.failure.empty()) {
      sc.applicable = false;
      sc.notes.push_back(ef.failure);
      return sc;
    }
    if (st.calls == CallHandling::postcondition_inline)
      if (auto why = check_requirements(ef.requirements)) {
        sc.applicable = false;
        sc.notes.push_back(*why);
        return sc;
      }
    for (std::size_t i = 0; i < ef.failures.size(); ++i)
      for (const auto& fl : ef.failures[i]) sc.obligations.push_back({i, pruned(with(ef.hyp, fl)), false});
    return sc;
  }

  StepConstraint error_step(const ApproximationStep& st) {
    StepConstraint sc;
    sc.step = st;
    auto skip = [&](const std::string& why) {
      sc.applicable = false;
      sc.notes.push_back(why);
      return sc;
    };

    // Ideal results and path with calls handled, plus the engine inputs.
    std::vector<ExprPtr> exprs;
    for (const auto& [n, e] : vc.results) exprs.push_back(e);
    std::vector<ExprPtr> path_exprs;
    map_exprs(vc.path, [&](const ExprPtr& e) {
      path_exprs.push_back(e);
      return e;
    });
    std::vector<ExprPtr> all = exprs;
    all.insert(all.end(), path_exprs.begin(), path_exprs.end());

    ErrorInputs in = error_inputs(f, prec);
    Constraint hyp = ideal_precondition(f);
    std::vector<ExprPtr> done;
    if (st.calls == CallHandling::postcondition_inline) {
      TwinBuilder probe(p, CallHandling::postcondition_inline, prec, post_fn());
      probe.bind_inputs(f);
      for (const auto& e : exprs) probe.twin(e);
      if (!probe.failure.empty()) return skip(probe.failure);
      if (auto why = check_requirements(probe.requirements)) return skip(*why);
      Abstracted a = abstract_calls(all, p, prec, post_fn());
      if (!a.failure.empty()) return skip(a.failure);
      for (const auto& cv : a.vars) {
        in.pre.declare(cv.name, cv.range);
        in.inputs[cv.name] = InputNoise{cv.noise, Rational(0)};
        hyp.declare(cv.name, cv.range);
      }
      for (const auto& fct : a.ideal_facts) {
        in.pre.assert_that(fct);
        hyp.assert_that(fct);
      }
      done = a.exprs;
    } else {
      for (const auto& e : all) done.push_back(st.calls == CallHandling::body_inline ? inline_calls(e, p) : e);
    }
    std::size_t k = 0;
    FormulaPtr path = map_exprs(vc.path, [&](const ExprPtr&) { return done.at(exprs.size() + k++); });
    in.pre.assert_that(path);
    hyp.assert_that(path);

    ErrorConfig ec = cfg.error;
    ec.paths = st.paths == PathHandling::path_by_path ? PathMode::explicit_paths : PathMode::merged;
    std::vector<ErrorResult> results;
    for (std::size_t i = 0; i < exprs.size(); ++i) {
      ErrorResult r = eval_with_error(in, done[i], prec, ec, session);
      if (!r.ok()) {
        std::string why = "error analysis of " + vc.results[i].first + " is not conclusive";
        for (const auto& is : r.issues) why += "; " + to_string(is.kind) + " at " + is.location;
        return skip(why);
      }
      results.push_back(std::move(r));
    }

    // Summaries: e!~v bounds the actual-minus-ideal of v; r!v is v's range
    // when the ideal part is summarised too.
    bool both = st.arith == ArithHandling::error_both;
    SpecMaps m;
    for (const auto& x : f.params) {
      Rational t = in.inputs.at(x).total();
      m.ideal[x] = var(x);
      m.initial[x] = constant(t);
      if (sgn(t) > 0) {
        hyp.declare("e!~" + x, Interval(-t, t), true);
        m.actual[x] = add(var(x), var("e!~" + x));
      } else {
        m.actual[x] = var(x);
      }
    }
    for (std::size_t i = 0; i < exprs.size(); ++i) {
      const std::string& v = vc.results[i].first;
      ExprPtr E = done[i];
      if (both) {
        hyp.declare("r!" + v, results[i].range);
        E = var("r!" + v);
      }
      m.ideal[v] = E;
      Rational err = results[i].error_bound;
      if (sgn(err) > 0) {
        hyp.declare("e!~" + v, Interval(-err, err), true);
        m.actual[v] = add(E, var("e!~" + v));
      } else {
        m.actual[v] = E;
      }
    }

    auto result_index = [&](const std::string& v) -> std::size_t {
      for (std::size_t i = 0; i < vc.results.size(); ++i)
        if (vc.results[i].first == v) return i;
      throw std::invalid_argument("clause on unknown variable '" + v + "'");
    };

    for (std::size_t gi = 0; gi < vc.goals.size(); ++gi) {
      const SpecClause& c = vc.goals[gi].clause;
      auto query = [&](const FormulaPtr& fl) { sc.obligations.push_back({gi, pruned(with(hyp, fl)), false}); };
      switch (c.kind) {
        case ClauseKind::range_bound:
          if (both)
            sc.obligations.push_back({gi, std::nullopt, within_clause(results[result_index(c.var)].range, c)});
          else
            for (const auto& fl : violations(c, m)) query(fl);
          break;
        case ClauseKind::abs_uncertainty: {
          Rational err = results[result_index(c.var)].error_bound;
          ExprPtr kx = simplify(spec_subst(c.magnitude, m));
          if (kx->is_constant())
            sc.obligations.push_back({gi, std::nullopt, err <= kx->value});
          else
            query(cmp(kx, CmpOp::lt, constant(err)));
          break;
        }
        case ClauseKind::rel_uncertainty: {
          std::size_t i = result_index(c.var);
          Rational err = results[i].error_bound;
          if (sgn(err) == 0) {
            sc.obligations.push_back({gi, std::nullopt, true});
            break;
          }
          ExprPtr mE = mul(constant(c.magnitude->value), m.ideal.at(c.var));
          query(cmp(mul(mE, mE), CmpOp::lt, constant(err * err)));
          break;
        }
        case ClauseKind::constraint:
          for (const auto& fl : violations(c, m)) query(fl);
          break;
      }
    }
    return sc;
  }
};

ApproximationStream::ApproximationStream(const Program& p, const VerificationCondition& vc, const PrecisionSpec& prec,
                                         const VcConfig& cfg)
    : impl_(std::make_unique<Impl>(p, vc, prec, cfg)) {}
ApproximationStream::~ApproximationStream() = default;
ApproximationStream::ApproximationStream(ApproximationStream&&) noexcept = default;

const std::vector<ApproximationStep>& ApproximationStream::plan() const { return impl_->plan; }

std::optional<StepConstraint> ApproximationStream::next() {
  if (impl_->at >= impl_->plan.size()) return std::nullopt;
  const ApproximationStep st = impl_->plan[impl_->at++];
  if (st.arith == ArithHandling::exact) return impl_->exact_step(st);
  return impl_->error_step(st);
}

CexClass classify_counterexample(const Program& p, const VerificationCondition& vc,
                                 const std::map<std::string, Rational>& model) {
  const FunctionDef& f = callee_of(p, vc.function);
  std::map<std::string, Rational> point;
  for (const auto& x : f.params) {
    auto it = model.find(x);
    if (it == model.end()) return CexClass::inconclusive;
    point[x] = it->second;
  }
  Constraint pre = ideal_precondition(f);
  pre.assert_that(strict_bounds(f));
  pre.assert_that(map_exprs(vc.path, [&](const ExprPtr& e) { return inline_calls(e, p); }));
  if (!model_satisfies(pre, point)) return CexClass::inconclusive;

  // Every error is zero: actual values coincide with the ideal ones.
  SpecMaps m;
  for (const auto& x : f.params) {
    m.ideal[x] = m.actual[x] = var(x);
    m.initial[x] = constant(Rational(0));
  }
  for (const auto& [v, e] : vc.results) m.ideal[v] = m.actual[v] = inline_calls(e, p);
  for (const auto& g : vc.goals)
    for (const auto& fl : violations(g.clause, m))
      if (evaluate_at(fl, point) == std::optional<bool>(true)) return CexClass::valid;
  return CexClass::inconclusive;
}

void discharge(const Program& p, VerificationCondition& vc, const PrecisionSpec& prec, const VcConfig& cfg,
               Session& s) {
  ApproximationStream stream(p, vc, prec, cfg);
  std::vector<bool> proven(vc.goals.size(), false);
  vc.status = VcStatus::unknown;
  vc.used.reset();
  vc.counterexample.reset();
  while (auto sc = stream.next()) {
    for (const auto& n : sc->notes) vc.notes.push_back(sc->step.str() + ": " + n);
    if (!sc->applicable) continue;
    std::vector<bool> now(vc.goals.size(), true);
    for (const auto& ob : sc->obligations) {
      // later disjuncts still run after a failed one: they may hold the
      // genuine counterexample
      if (proven[ob.goal]) continue;
      if (!ob.query) {
        now[ob.goal] = now[ob.goal] && ob.holds;
        continue;
      }
      SolverVerdict v = s.check(*ob.query);
      if (v.is_unsat()) continue;
      now[ob.goal] = false;
      if (v.is_sat()) {
        CexClass cls = classify_counterexample(p, vc, v.model);
        if (cls == CexClass::valid || !vc.counterexample)
          vc.counterexample = Counterexample{v.model, cls, vc.goals[ob.goal].text, sc->step};
        if (cls == CexClass::valid) {
          vc.status = VcStatus::disproven;
          return;
        }
      }
    }
    bool all = true;
    for (std::size_t i = 0; i < proven.size(); ++i) {
      proven[i] = proven[i] || now[i];
      all = all && proven[i];
    }
    if (all) {
      vc.status = VcStatus::proven;
      vc.used = sc->step;
      return;
    }
  }
}

Spec GeneratedSpec::clauses() const {
  Spec s;
  if (range) s.push_back(SpecClause::range("res", range->lo(), range->hi(), false, false));
  if (error) s.push_back(SpecClause::abs_noise("res", constant(*error)));
  return s;
}

GeneratedSpec generate_spec(const Program& p, const FunctionDef& f, const PrecisionSpec& prec,
                            const ErrorConfig& cfg) {
  GeneratedSpec g;
  g.function = f.name;
  g.precision = prec;
  ErrorInputs in = error_inputs(f, prec);
  ErrorResult r = eval_with_error(in, inline_calls(f.body, p), prec, cfg);
  g.issues = r.issues;
  g.notes = r.notes;
  g.split = r.split;
  g.path_error = r.path_error;
  if (!r.fatal) {
    g.range = round_outward(r.range, 53);
    g.error = round_dyadic(r.error_bound, 53, Rounding::up);
  } else {
    // the ideal range does not depend on the float fault
    RangeResult rr = get_range(in.pre, inline_calls(f.body, p), cfg.range);
    if (rr.ok()) g.range = round_outward(*rr.range, 53);
  }
  return g;
}

}  // namespace realc
