#include "realc/solver.hpp"

#include <algorithm>
#include <cmath>

#include "realc/linear.hpp"
#include "realc/tape.hpp"

namespace realc {

Constraint& Constraint::declare(const std::string& name, const Interval& bounds, bool perturbation) {
  for (auto& v : vars) {
    if (v.name == name) {
      if (!v.bounds) {
        v.bounds = bounds;
      } else if (auto r = intersect(*v.bounds, bounds)) {
        v.bounds = *r;
      } else {
        formula = fm::falsity();
      }
      v.perturbation = v.perturbation || perturbation;
      return *this;
    }
  }
  vars.push_back({name, bounds, perturbation});
  return *this;
}

Constraint& Constraint::declare_unbounded(const std::string& name) {
  if (!find(name)) vars.push_back({name, std::nullopt, false});
  return *this;
}

Constraint& Constraint::assert_that(const FormulaPtr& f) {
  formula = fm::conj({formula, f});
  return *this;
}

const VarDecl* Constraint::find(const std::string& name) const {
  for (const auto& v : vars) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

Constraint conjoin(const Constraint& a, const Constraint& b) {
  Constraint out = a;
  for (const auto& v : b.vars) {
    if (v.bounds) out.declare(v.name, *v.bounds, v.perturbation);
    else out.declare_unbounded(v.name);
  }
  out.assert_that(b.formula);
  return out;
}

std::string to_string(const SolverVerdict& v) {
  switch (v.kind) {
    case SolverVerdict::Kind::sat: return "sat";
    case SolverVerdict::Kind::unsat: return "unsat";
    case SolverVerdict::Kind::unknown: return v.reason == UnknownReason::timeout ? "unknown(timeout)" : "unknown(incomplete)";
  }
  return "?";
}

long BackendConfig::box_budget() const {
  double b = std::floor(static_cast<double>(boxes_per_second) * timeout_seconds);
  return std::max(1L, static_cast<long>(b));
}

namespace {

// Formula in negation normal form whose leaves index atoms g_i op 0.
struct BoolNode {
  FormulaKind kind;
  int atom = -1;
  std::vector<BoolNode> kids;
};

struct Atom {
  ExprPtr g;
  CmpOp op;
};

ExprPtr canonical(const ExprPtr& e) { return simplify(normalize_linear(simplify(e))); }

BoolNode lower(const FormulaPtr& f, std::vector<Atom>& atoms) {
  switch (f->kind) {
    case FormulaKind::truth:
    case FormulaKind::falsity: return {f->kind, -1, {}};
    case FormulaKind::cmp: {
      ExprPtr g = canonical(ex::sub(f->lhs, f->rhs));
      if (g->is_constant()) {
        bool t = compare(g->value, f->op, Rational(0));
        return {t ? FormulaKind::truth : FormulaKind::falsity, -1, {}};
      }
      atoms.push_back({g, f->op});
      return {FormulaKind::cmp, static_cast<int>(atoms.size()) - 1, {}};
    }
    case FormulaKind::conj:
    case FormulaKind::disj: {
      BoolNode n{f->kind, -1, {}};
      for (const auto& c : f->children) n.kids.push_back(lower(c, atoms));
      return n;
    }
    case FormulaKind::negation: break;
  }
  throw std::logic_error("formula not in negation normal form");
}

// 1 true, 0 false, -1 undecided.
int eval_bool(const BoolNode& n, const std::vector<int>& atom_truth) {
  switch (n.kind) {
    case FormulaKind::truth: return 1;
    case FormulaKind::falsity: return 0;
    case FormulaKind::cmp: return atom_truth[n.atom];
    case FormulaKind::conj: {
      int r = 1;
      for (const auto& k : n.kids) {
        int v = eval_bool(k, atom_truth);
        if (v == 0) return 0;
        if (v < 0) r = -1;
      }
      return r;
    }
    case FormulaKind::disj: {
      int r = 0;
      for (const auto& k : n.kids) {
        int v = eval_bool(k, atom_truth);
        if (v == 1) return 1;
        if (v < 0) r = -1;
      }
      return r;
    }
    default: return -1;
  }
}

int sign_truth_d(const DInterval& g, CmpOp op) {
  if (g.is_undefined()) return -1;
  switch (op) {
    case CmpOp::lt: return g.hi < 0 ? 1 : g.lo >= 0 ? 0 : -1;
    case CmpOp::le: return g.hi <= 0 ? 1 : g.lo > 0 ? 0 : -1;
    case CmpOp::gt: return g.lo > 0 ? 1 : g.hi <= 0 ? 0 : -1;
    case CmpOp::ge: return g.lo >= 0 ? 1 : g.hi < 0 ? 0 : -1;
  }
  return -1;
}

int sign_truth_q(const std::optional<Interval>& g, CmpOp op) {
  if (!g) return -1;
  switch (op) {
    case CmpOp::lt: return sgn(g->hi()) < 0 ? 1 : sgn(g->lo()) >= 0 ? 0 : -1;
    case CmpOp::le: return sgn(g->hi()) <= 0 ? 1 : sgn(g->lo()) > 0 ? 0 : -1;
    case CmpOp::gt: return sgn(g->lo()) > 0 ? 1 : sgn(g->hi()) <= 0 ? 0 : -1;
    case CmpOp::ge: return sgn(g->lo()) >= 0 ? 1 : sgn(g->hi()) < 0 ? 0 : -1;
  }
  return -1;
}

DInterval target_of(CmpOp op) {
  constexpr double inf = DInterval::inf;
  return op == CmpOp::lt || op == CmpOp::le ? DInterval{-inf, 0} : DInterval{0, inf};
}

struct Compiled {
  std::vector<std::string> names;
  std::vector<Atom> atoms;
  BoolNode root;
  std::optional<Tape> tape;
};

Compiled compile(const Constraint& c, const FormulaPtr& f) {
  Compiled out;
  for (const auto& v : c.vars) out.names.push_back(v.name);
  out.root = lower(to_nnf(f), out.atoms);
  std::vector<ExprPtr> roots;
  for (const auto& a : out.atoms) roots.push_back(a.g);
  out.tape.emplace(roots, out.names);
  return out;
}

}  // namespace

std::optional<bool> evaluate_at(const FormulaPtr& f, const std::map<std::string, Rational>& point) {
  Constraint c;
  for (const auto& [name, value] : point) c.declare(name, Interval(value));
  for (const auto& name : free_vars(f)) {
    if (!point.count(name)) return std::nullopt;
  }
  Compiled comp = compile(c, f);
  std::vector<Interval> box;
  for (const auto& name : comp.names) box.emplace_back(point.at(name));
  auto values = comp.tape->eval_exact(box);
  std::vector<int> truth(comp.atoms.size());
  for (std::size_t i = 0; i < comp.atoms.size(); ++i) {
    truth[i] = sign_truth_q(values[comp.tape->root(i)], comp.atoms[i].op);
  }
  int r = eval_bool(comp.root, truth);
  if (r < 0) return std::nullopt;
  return r == 1;
}

bool model_satisfies(const Constraint& c, const std::map<std::string, Rational>& model) {
  for (const auto& v : c.vars) {
    auto it = model.find(v.name);
    if (it == model.end()) return false;
    if (v.bounds && !v.bounds->contains(it->second)) return false;
  }
  auto r = evaluate_at(c.formula, model);
  return r && *r;
}

namespace {

class Icp {
 public:
  Icp(const Constraint& c, const BackendConfig& cfg) : c_(c), cfg_(cfg), comp_(compile(c, c.formula)) {
    n_ = comp_.names.size();
    for (const auto& v : c.vars) {
      is_pert_.push_back(v.perturbation);
      bounds_.push_back(*v.bounds);
    }
    // Linearisation base: each atom with perturbations fixed at zero.
    Substitution zero;
    for (const auto& v : c.vars) {
      if (v.perturbation) zero[v.name] = ex::constant(0);
    }
    std::vector<ExprPtr> bases;
    for (const auto& a : comp_.atoms) bases.push_back(canonical(substitute(a.g, zero)));
    base_.emplace(bases, comp_.names);
    // Conjuncts at the top level can drive contraction.
    if (comp_.root.kind == FormulaKind::cmp) top_atoms_.push_back(comp_.root.atom);
    if (comp_.root.kind == FormulaKind::conj) {
      for (const auto& k : comp_.root.kids) {
        if (k.kind == FormulaKind::cmp) top_atoms_.push_back(k.atom);
      }
    }
  }

  SolverVerdict run() {
    std::vector<DInterval> box;
    for (const auto& b : bounds_) {
      box.push_back(enclose(b));
      init_width_.push_back(box.back().width());
    }
    std::vector<std::vector<DInterval>> stack{box};
    long budget = cfg_.box_budget();
    bool incomplete = false;
    while (!stack.empty()) {
      if (budget-- <= 0) return SolverVerdict::unknown(UnknownReason::timeout);
      std::vector<DInterval> b = std::move(stack.back());
      stack.pop_back();
      int verdict = process(b);
      if (verdict == 0) continue;
      if (auto w = try_witness(b)) return SolverVerdict::sat(std::move(*w));
      int k = choose_split(b);
      if (k < 0) {
        // Too thin for binary64 splitting: continue in exact arithmetic.
        bool open = false;
        if (auto w = exact_search(b, budget, open)) return SolverVerdict::sat(std::move(*w));
        if (open) incomplete = true;
        continue;
      }
      double m = b[k].mid();
      std::vector<DInterval> left = b, right = std::move(b);
      left[k].hi = m;
      right[k].lo = m;
      stack.push_back(std::move(right));
      stack.push_back(std::move(left));
    }
    return incomplete ? SolverVerdict::unknown(UnknownReason::incomplete) : SolverVerdict::unsat();
  }

 private:
  // Contracts the box and evaluates the formula: 1 true, 0 false, -1 undecided.
  int process(std::vector<DInterval>& box) {
    std::vector<DInterval> values;
    comp_.tape->eval(box, values);
    bool changed = false;
    for (int a : top_atoms_) {
      std::vector<DInterval> before = box;
      if (!comp_.tape->contract(comp_.tape->root(a), target_of(comp_.atoms[a].op), values, box)) return 0;
      if (box != before) changed = true;
    }
    if (changed) comp_.tape->eval(box, values);
    truth_.assign(comp_.atoms.size(), -1);
    bool need_mv = false;
    for (std::size_t i = 0; i < comp_.atoms.size(); ++i) {
      truth_[i] = sign_truth_d(values[comp_.tape->root(i)], comp_.atoms[i].op);
      if (truth_[i] < 0) need_mv = true;
    }
    int r = eval_bool(comp_.root, truth_);
    if (r >= 0 || !need_mv) return r;
    refine_mean_value(box, values);
    return eval_bool(comp_.root, truth_);
  }

  void refine_mean_value(const std::vector<DInterval>& box, const std::vector<DInterval>& values) {
    std::vector<DInterval> center(n_), base_values, grad_values;
    for (std::size_t k = 0; k < n_; ++k) {
      if (is_pert_[k]) {
        if (!box[k].contains_zero()) return;
        center[k] = {0, 0};
      } else {
        double m = box[k].mid();
        center[k] = {m, m};
      }
    }
    if (!comp_.tape->eval_grad(box, grad_values, grad_)) return;
    base_->eval(center, base_values);
    // Second form: base over the whole box, slopes in the perturbations
    // only. Keeps cancellations the zero-perturbation base exposes.
    std::vector<DInterval> wide = box, wide_values;
    bool any_pert = false;
    for (std::size_t k = 0; k < n_; ++k)
      if (is_pert_[k]) wide[k] = {0, 0}, any_pert = true;
    if (any_pert) base_->eval(wide, wide_values);
    for (std::size_t i = 0; i < comp_.atoms.size(); ++i) {
      if (truth_[i] >= 0) continue;
      int slot = comp_.tape->root(i);
      DInterval mv = base_values[base_->root(i)];
      DInterval pv = any_pert ? wide_values[base_->root(i)] : DInterval{};
      for (std::size_t k = 0; k < n_ && !mv.is_undefined(); ++k) {
        const DInterval& d = grad_[slot * n_ + k];
        if (d.lo == 0 && d.hi == 0) continue;
        mv = mv + d * (box[k] - center[k]);
        if (any_pert && is_pert_[k]) pv = pv + d * box[k];
      }
      std::optional<DInterval> tight = dintersect(values[slot], mv);
      if (tight && any_pert && !pv.is_undefined()) tight = dintersect(*tight, pv);
      if (!tight) {
        // Disjoint sound enclosures: the atom's domain is empty on this box.
        truth_[i] = 0;
        continue;
      }
      truth_[i] = sign_truth_d(*tight, comp_.atoms[i].op);
    }
  }

  std::optional<std::map<std::string, Rational>> try_witness(const std::vector<DInterval>& box) {
    std::vector<Rational> point(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      point[k] = is_pert_[k] && box[k].contains_zero() ? Rational(0) : clamp(k, box[k].mid());
    }
    std::vector<std::vector<Rational>> candidates{point};
    std::vector<std::size_t> perts;
    for (std::size_t k = 0; k < n_; ++k) {
      if (is_pert_[k]) perts.push_back(k);
    }
    if (!perts.empty()) {
      auto lo = point, hi = point, down = point, up = point;
      std::vector<DInterval> gv;
      bool have_grad = comp_.tape->eval_grad(box, gv, grad_);
      int guide = -1;
      for (std::size_t i = 0; i < comp_.atoms.size() && guide < 0; ++i) {
        if (truth_.size() == comp_.atoms.size() && truth_[i] < 0) guide = static_cast<int>(i);
      }
      for (std::size_t k : perts) {
        lo[k] = clamp(k, box[k].lo);
        hi[k] = clamp(k, box[k].hi);
        if (have_grad && guide >= 0) {
          const DInterval& d = grad_[comp_.tape->root(guide) * n_ + k];
          double dm = d.mid();
          down[k] = dm > 0 ? lo[k] : dm < 0 ? hi[k] : point[k];
          up[k] = dm > 0 ? hi[k] : dm < 0 ? lo[k] : point[k];
        }
      }
      candidates.push_back(std::move(down));
      candidates.push_back(std::move(up));
      candidates.push_back(std::move(lo));
      candidates.push_back(std::move(hi));
    }
    for (const auto& cand : candidates) {
      if (auto m = check_point(cand)) return m;
    }
    return std::nullopt;
  }

  // Rational bisection below binary64 resolution. `open` is set when some
  // sub-box stays undecided once the local allowance runs out.
  std::optional<std::map<std::string, Rational>> exact_search(const std::vector<DInterval>& box, long& budget,
                                                              bool& open) {
    std::vector<Interval> q0;
    for (std::size_t k = 0; k < n_; ++k) q0.emplace_back(clamp(k, box[k].lo), clamp(k, box[k].hi));
    if (auto m = snap(q0, budget)) return m;
    std::vector<std::vector<Interval>> stack{q0};
    int allowance = 32;
    while (!stack.empty()) {
      if (allowance-- <= 0 || budget-- <= 0) {
        open = true;
        return std::nullopt;
      }
      std::vector<Interval> q = std::move(stack.back());
      stack.pop_back();
      int r = decide_exact(q);
      if (r == 0) continue;
      std::vector<Rational> mid(n_);
      for (std::size_t k = 0; k < n_; ++k) {
        mid[k] = is_pert_[k] && q[k].contains_zero() ? Rational(0) : q[k].mid();
      }
      if (auto m = check_point(mid)) return m;
      std::size_t widest = n_;
      Rational best = 0;
      for (std::size_t k = 0; k < n_; ++k) {
        Rational w = q[k].width();
        if (!std::isinf(init_width_[k]) && init_width_[k] > 0) w /= from_double(init_width_[k]);
        if (w > best) {
          best = w;
          widest = k;
        }
      }
      if (widest == n_) {
        open = true;  // a point that is neither true nor false: sqrt enclosure undecided
        continue;
      }
      Rational m = q[widest].mid();
      std::vector<Interval> left = q, right = std::move(q);
      left[widest] = Interval(left[widest].lo(), m);
      right[widest] = Interval(m, right[widest].hi());
      stack.push_back(std::move(right));
      stack.push_back(std::move(left));
    }
    return std::nullopt;
  }

  std::vector<int> atom_truth(const std::vector<Rational>& pt) const {
    std::vector<Interval> qbox;
    for (const auto& q : pt) qbox.emplace_back(q);
    auto exact = comp_.tape->eval_exact(qbox);
    std::vector<int> truth(comp_.atoms.size());
    for (std::size_t i = 0; i < comp_.atoms.size(); ++i) {
      truth[i] = sign_truth_q(exact[comp_.tape->root(i)], comp_.atoms[i].op);
    }
    return truth;
  }

  // Thin solution sets (a < g <= a + 1e-30, say) are missed by midpoints.
  // From the centre, walk along one variable towards a box end where a
  // failing atom holds, bisecting on that atom and testing the formula on
  // the way; the satisfied side hugs the atom's surface.
  std::optional<std::map<std::string, Rational>> snap(const std::vector<Interval>& q, long& budget) {
    std::vector<Rational> centre(n_);
    for (std::size_t k = 0; k < n_; ++k) centre[k] = is_pert_[k] && q[k].contains_zero() ? Rational(0) : q[k].mid();
    std::vector<int> at_centre = atom_truth(centre);
    if (eval_bool(comp_.root, at_centre) == 1) return model_of(centre);
    for (std::size_t i = 0; i < comp_.atoms.size(); ++i) {
      if (at_centre[i] != 0) continue;
      for (std::size_t k = 0; k < n_; ++k) {
        if (q[k].is_point()) continue;
        for (const Rational& end : {q[k].lo(), q[k].hi()}) {
          if (budget-- <= 0) return std::nullopt;
          std::vector<Rational> yes = centre, no = centre;
          yes[k] = end;
          std::vector<int> t = atom_truth(yes);
          if (t[i] != 1) continue;
          if (eval_bool(comp_.root, t) == 1) return model_of(yes);
          for (int step = 0; step < 160; ++step) {
            std::vector<Rational> mid = yes;
            mid[k] = round_dyadic((yes[k] + no[k]) / 2, 200, Rounding::nearest);
            if (mid[k] == yes[k] || mid[k] == no[k]) break;
            std::vector<int> tm = atom_truth(mid);
            if (tm[i] == 1) {
              if (eval_bool(comp_.root, tm) == 1) return model_of(mid);
              yes = std::move(mid);
            } else if (tm[i] == 0) {
              no = std::move(mid);
            } else {
              break;
            }
          }
        }
      }
    }
    return std::nullopt;
  }

  std::map<std::string, Rational> model_of(const std::vector<Rational>& pt) const {
    std::map<std::string, Rational> model;
    for (std::size_t k = 0; k < n_; ++k) model[comp_.names[k]] = pt[k];
    return model;
  }

  int decide_exact(const std::vector<DInterval>& box) const {
    std::vector<Interval> qbox;
    for (std::size_t k = 0; k < n_; ++k) {
      Rational lo = clamp(k, box[k].lo), hi = clamp(k, box[k].hi);
      qbox.emplace_back(lo, hi);
    }
    return decide_exact(qbox);
  }

  int decide_exact(const std::vector<Interval>& qbox) const {
    auto exact = comp_.tape->eval_exact(qbox);
    std::vector<int> truth(comp_.atoms.size());
    for (std::size_t i = 0; i < comp_.atoms.size(); ++i) {
      truth[i] = sign_truth_q(exact[comp_.tape->root(i)], comp_.atoms[i].op);
    }
    return eval_bool(comp_.root, truth);
  }

  Rational clamp(std::size_t k, double v) const {
    Rational q = std::isfinite(v) ? from_double(v) : Rational(0);
    if (q < bounds_[k].lo()) return bounds_[k].lo();
    if (q > bounds_[k].hi()) return bounds_[k].hi();
    return q;
  }

  std::optional<std::map<std::string, Rational>> check_point(const std::vector<Rational>& pt) {
    // Cheap binary64 filter first.
    std::vector<DInterval> dbox;
    for (const auto& q : pt) dbox.push_back(enclose(q));
    std::vector<DInterval> values;
    comp_.tape->eval(dbox, values);
    std::vector<int> truth(comp_.atoms.size());
    for (std::size_t i = 0; i < comp_.atoms.size(); ++i) {
      truth[i] = sign_truth_d(values[comp_.tape->root(i)], comp_.atoms[i].op);
    }
    if (eval_bool(comp_.root, truth) == 0) return std::nullopt;
    std::vector<Interval> qbox;
    for (const auto& q : pt) qbox.emplace_back(q);
    auto exact = comp_.tape->eval_exact(qbox);
    for (std::size_t i = 0; i < comp_.atoms.size(); ++i) {
      truth[i] = sign_truth_q(exact[comp_.tape->root(i)], comp_.atoms[i].op);
    }
    if (eval_bool(comp_.root, truth) != 1) return std::nullopt;
    std::map<std::string, Rational> model;
    for (std::size_t k = 0; k < n_; ++k) model[comp_.names[k]] = pt[k];
    return model;
  }

  int choose_split(const std::vector<DInterval>& box) const {
    int best = -1;
    double best_rel = 0;
    for (int pass = 0; pass < 2 && best < 0; ++pass) {
      for (std::size_t k = 0; k < n_; ++k) {
        if (is_pert_[k] != (pass == 1)) continue;
        double w = box[k].width();
        if (!(init_width_[k] > 0) || !(w > 0)) continue;
        double m = box[k].mid();
        if (!(m > box[k].lo && m < box[k].hi)) continue;
        double rel = std::isinf(init_width_[k]) ? 1 : w / init_width_[k];
        if (rel < 1e-13) continue;
        if (rel > best_rel) {
          best_rel = rel;
          best = static_cast<int>(k);
        }
      }
    }
    return best;
  }

  const Constraint& c_;
  const BackendConfig& cfg_;
  Compiled comp_;
  std::optional<Tape> base_;
  std::size_t n_ = 0;
  std::vector<bool> is_pert_;
  std::vector<Interval> bounds_;
  std::vector<double> init_width_;
  std::vector<int> top_atoms_;
  std::vector<int> truth_;
  std::vector<DInterval> grad_;
};

}  // namespace

namespace {

using Matrix = std::vector<std::vector<Rational>>;

// Inverse by Gauss-Jordan; nullopt when singular.
std::optional<Matrix> inverse(Matrix m) {
  const std::size_t n = m.size();
  Matrix inv(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && sgn(m[piv][col]) == 0) ++piv;
    if (piv == n) return std::nullopt;
    std::swap(m[piv], m[col]);
    std::swap(inv[piv], inv[col]);
    Rational d = m[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      m[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || sgn(m[r][col]) == 0) continue;
      Rational f = m[r][col];
      for (std::size_t j = 0; j < n; ++j) {
        m[r][j] -= f * m[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

std::size_t rank(Matrix m) {
  std::size_t r = 0;
  const std::size_t cols = m.empty() ? 0 : m[0].size();
  for (std::size_t col = 0; col < cols && r < m.size(); ++col) {
    std::size_t piv = r;
    while (piv < m.size() && sgn(m[piv][col]) == 0) ++piv;
    if (piv == m.size()) continue;
    std::swap(m[piv], m[r]);
    for (std::size_t i = r + 1; i < m.size(); ++i) {
      if (sgn(m[i][col]) == 0) continue;
      Rational f = m[i][col] / m[r][col];
      for (std::size_t j = col; j < cols; ++j) m[i][j] -= f * m[r][j];
    }
    ++r;
  }
  return r;
}

// Change of variables t = M x whose rows include the independent linear
// constraints of the top-level conjunction, so their faces become box faces.
struct Reparam {
  Constraint c;
  std::vector<std::string> xs;
  std::vector<std::string> ts;
  Matrix minv;

  std::map<std::string, Rational> to_original(const std::map<std::string, Rational>& model) const {
    std::map<std::string, Rational> out;
    for (const auto& [name, value] : model) {
      if (name.rfind("t!", 0) != 0) out[name] = value;
    }
    for (std::size_t j = 0; j < xs.size(); ++j) {
      Rational v(0);
      for (std::size_t k = 0; k < ts.size(); ++k) v += minv[j][k] * model.at(ts[k]);
      out[xs[j]] = v;
    }
    return out;
  }
};

std::optional<Reparam> reparametrize(const Constraint& c) {
  Reparam r;
  std::map<std::string, std::size_t> col;
  for (const auto& v : c.vars) {
    if (!v.perturbation) {
      col[v.name] = r.xs.size();
      r.xs.push_back(v.name);
    }
  }
  const std::size_t n = r.xs.size();
  if (n < 2) return std::nullopt;
  struct Row {
    std::vector<Rational> a;
    std::optional<Rational> lo, hi;
  };
  // Parallel constraints are merged and thin rows go first: a thin
  // diagonal band becomes a thin box the search can split.
  std::vector<Row> cands;
  for (const auto& f : conjuncts(to_nnf(c.formula))) {
    if (f->kind != FormulaKind::cmp) continue;
    auto lf = as_linear(canonical(ex::sub(f->lhs, f->rhs)));
    if (!lf || lf->coeffs.size() < 2) continue;
    std::vector<Rational> a(n, Rational(0));
    bool ok = true;
    for (const auto& [name, coeff] : lf->coeffs) {
      auto it = col.find(name);
      if (it == col.end()) {
        ok = false;
        break;
      }
      a[it->second] = coeff;
    }
    if (!ok) continue;
    // scale so the first nonzero coefficient is 1
    Rational lead(0);
    for (const auto& x : a)
      if (sgn(x) != 0) {
        lead = x;
        break;
      }
    for (auto& x : a) x /= lead;
    Rational bound = -lf->constant / lead;
    bool upper = f->op == CmpOp::lt || f->op == CmpOp::le;
    if (sgn(lead) < 0) upper = !upper;
    Row* same = nullptr;
    for (auto& r : cands)
      if (r.a == a) same = &r;
    if (!same) {
      cands.push_back({a, {}, {}});
      same = &cands.back();
    }
    if (upper && (!same->hi || bound < *same->hi)) same->hi = bound;
    if (!upper && (!same->lo || bound > *same->lo)) same->lo = bound;
  }
  // thin: narrowed width under 1e-6 of the row's span over the box
  auto thin = [&](const Row& row) {
    Interval range(Rational(0));
    for (std::size_t j = 0; j < n; ++j) {
      if (sgn(row.a[j]) != 0) range = range + Interval(row.a[j]) * *c.find(r.xs[j])->bounds;
    }
    Rational lo = row.lo ? max(*row.lo, range.lo()) : range.lo();
    Rational hi = row.hi ? min(*row.hi, range.hi()) : range.hi();
    return (hi - lo) * 1000000 < range.width();
  };
  std::vector<std::pair<int, std::size_t>> order;
  for (std::size_t i = 0; i < cands.size(); ++i) order.emplace_back(thin(cands[i]) ? 0 : 1, i);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<Row> rows;
  for (const auto& [w, i] : order) {
    Matrix trial;
    for (const auto& row : rows) trial.push_back(row.a);
    trial.push_back(cands[i].a);
    if (rank(trial) < trial.size()) continue;
    rows.push_back(cands[i]);
    if (rows.size() == n) break;
  }
  if (rows.empty()) return std::nullopt;
  std::vector<bool> unit_row(rows.size(), false);
  for (std::size_t j = 0; j < n && rows.size() < n; ++j) {
    std::vector<Rational> e(n, Rational(0));
    e[j] = 1;
    Matrix trial;
    for (const auto& row : rows) trial.push_back(row.a);
    trial.push_back(e);
    if (rank(trial) == trial.size()) {
      rows.push_back({e, {}, {}});
      unit_row.push_back(true);
    }
  }
  Matrix m;
  for (const auto& row : rows) m.push_back(row.a);
  auto minv = inverse(m);
  if (!minv) return std::nullopt;
  r.minv = *minv;

  Substitution sub;
  for (std::size_t k = 0; k < n; ++k) r.ts.push_back("t!" + std::to_string(k));
  std::vector<bool> covered(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    // Range of row k over the original box, narrowed by its own constraint.
    Interval range(Rational(0));
    for (std::size_t j = 0; j < n; ++j) {
      if (sgn(rows[k].a[j]) != 0) range = range + Interval(rows[k].a[j]) * *c.find(r.xs[j])->bounds;
    }
    Rational lo = range.lo(), hi = range.hi();
    if (rows[k].lo && *rows[k].lo > lo) lo = *rows[k].lo;
    if (rows[k].hi && *rows[k].hi < hi) hi = *rows[k].hi;
    if (hi < lo) {
      r.c.formula = fm::falsity();
      return r;
    }
    r.c.declare(r.ts[k], Interval(lo, hi));
    if (unit_row[k]) {
      for (std::size_t j = 0; j < n; ++j) {
        if (sgn(rows[k].a[j]) != 0) covered[j] = true;
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    LinearForm lf;
    for (std::size_t k = 0; k < n; ++k) {
      if (sgn(r.minv[j][k]) != 0) lf.coeffs[r.ts[k]] = r.minv[j][k];
    }
    sub[r.xs[j]] = from_linear(lf);
  }
  for (const auto& v : c.vars) {
    if (v.perturbation) r.c.declare(v.name, *v.bounds, true);
  }
  std::vector<FormulaPtr> parts{substitute(c.formula, sub)};
  for (std::size_t j = 0; j < n; ++j) {
    if (covered[j]) continue;
    const Interval& b = *c.find(r.xs[j])->bounds;
    parts.push_back(fm::within(sub[r.xs[j]], b.lo(), b.hi()));
  }
  r.c.formula = fm::conj(std::move(parts));
  return r;
}

SolverVerdict run_icp(const Constraint& c, const BackendConfig& cfg) {
  if (c.formula->kind == FormulaKind::falsity) return SolverVerdict::unsat();
  Icp icp(c, cfg);
  return icp.run();
}


// Bounds on single variables, open or closed, from the declared box and the
// top-level atoms `x op c`. Nested atoms of the same shape are decided
// against them exactly: interval contraction works on closed boxes
// and cannot refute x > 0 && (x <= 0 || ...).
struct SideBound {
  std::optional<Rational> lo, hi;
  bool lo_open = false, hi_open = false;
};

std::optional<std::pair<std::string, std::pair<CmpOp, Rational>>> var_bound(const Formula& f) {
  if (f.kind != FormulaKind::cmp) return std::nullopt;
  auto flip = [](CmpOp op) {
    switch (op) {
      case CmpOp::lt: return CmpOp::gt;
      case CmpOp::le: return CmpOp::ge;
      case CmpOp::gt: return CmpOp::lt;
      case CmpOp::ge: return CmpOp::le;
    }
    return op;
  };
  if (f.lhs->kind == ExprKind::variable && f.rhs->kind == ExprKind::constant)
    return std::make_pair(f.lhs->name, std::make_pair(f.op, f.rhs->value));
  if (f.rhs->kind == ExprKind::variable && f.lhs->kind == ExprKind::constant)
    return std::make_pair(f.rhs->name, std::make_pair(flip(f.op), f.lhs->value));
  return std::nullopt;
}

void tighten(SideBound& b, CmpOp op, const Rational& c) {
  const bool open = op == CmpOp::lt || op == CmpOp::gt;
  if (op == CmpOp::gt || op == CmpOp::ge) {
    if (!b.lo || c > *b.lo || (c == *b.lo && open)) b.lo = c, b.lo_open = open;
  } else {
    if (!b.hi || c < *b.hi || (c == *b.hi && open)) b.hi = c, b.hi_open = open;
  }
}

// 1 implied, 0 refuted, -1 open.
int decide(const SideBound& b, CmpOp op, const Rational& c) {
  auto above = [&](bool strict) {  // every x satisfies x > c (strict) or x >= c
    return b.lo && (*b.lo > c || (*b.lo == c && (!strict || b.lo_open)));
  };
  auto below = [&](bool strict) {
    return b.hi && (*b.hi < c || (*b.hi == c && (!strict || b.hi_open)));
  };
  switch (op) {
    case CmpOp::lt: return below(true) ? 1 : above(false) ? 0 : -1;
    case CmpOp::le: return below(false) ? 1 : above(true) ? 0 : -1;
    case CmpOp::gt: return above(true) ? 1 : below(false) ? 0 : -1;
    case CmpOp::ge: return above(false) ? 1 : below(true) ? 0 : -1;
  }
  return -1;
}

FormulaPtr decide_nested(const FormulaPtr& f, const std::map<std::string, SideBound>& bounds) {
  switch (f->kind) {
    case FormulaKind::cmp: {
      auto vb = var_bound(*f);
      if (!vb) return f;
      auto it = bounds.find(vb->first);
      if (it == bounds.end()) return f;
      int d = decide(it->second, vb->second.first, vb->second.second);
      return d < 0 ? f : d ? fm::truth() : fm::falsity();
    }
    case FormulaKind::conj:
    case FormulaKind::disj: {
      std::vector<FormulaPtr> kids;
      bool same = true;
      for (const auto& k : f->children) {
        kids.push_back(decide_nested(k, bounds));
        same = same && kids.back() == k;
      }
      if (same) return f;
      return f->kind == FormulaKind::conj ? fm::conj(std::move(kids)) : fm::disj(std::move(kids));
    }
    default: return f;
  }
}

Constraint propagate_bounds(const Constraint& c) {
  std::map<std::string, SideBound> bounds;
  for (const auto& v : c.vars) {
    if (!v.bounds) continue;
    bounds[v.name].lo = v.bounds->lo();
    bounds[v.name].hi = v.bounds->hi();
  }
  std::vector<FormulaPtr> top = conjuncts(c.formula);
  std::vector<bool> is_bound(top.size(), false);
  for (std::size_t i = 0; i < top.size(); ++i) {
    auto vb = var_bound(*top[i]);
    if (!vb || !bounds.count(vb->first)) continue;
    tighten(bounds[vb->first], vb->second.first, vb->second.second);
    is_bound[i] = true;
  }
  std::vector<FormulaPtr> parts;
  bool changed = false;
  for (std::size_t i = 0; i < top.size(); ++i) {
    if (is_bound[i]) {
      parts.push_back(top[i]);
      continue;
    }
    parts.push_back(decide_nested(top[i], bounds));
    changed = changed || parts.back() != top[i];
  }
  // contradictory bounds
  for (const auto& [name, b] : bounds) {
    if (b.lo && b.hi && (*b.lo > *b.hi || (*b.lo == *b.hi && (b.lo_open || b.hi_open)))) {
      parts.assign(1, fm::falsity());
      changed = true;
    }
  }
  if (!changed) return c;
  Constraint out = c;
  out.formula = fm::conj(std::move(parts));
  return out;
}

}  // namespace

SolverVerdict builtin_icp_check(const Constraint& c, const BackendConfig& cfg) {
  for (const auto& v : c.vars) {
    if (!v.bounds) return SolverVerdict::unknown(UnknownReason::incomplete);
  }
  for (const auto& name : free_vars(c.formula)) {
    if (!c.find(name)) throw std::invalid_argument("undeclared variable in constraint: " + name);
  }
  if (c.formula->kind == FormulaKind::falsity) return SolverVerdict::unsat();
  const Constraint d = propagate_bounds(c);
  if (d.formula->kind == FormulaKind::falsity) return SolverVerdict::unsat();
  if (auto r = reparametrize(d)) {
    SolverVerdict v = run_icp(r->c, cfg);
    if (!v.is_sat()) return v;
    auto model = r->to_original(v.model);
    if (model_satisfies(c, model)) return SolverVerdict::sat(std::move(model));
    return SolverVerdict::unknown(UnknownReason::incomplete);
  }
  SolverVerdict v = run_icp(d, cfg);
  if (v.is_sat() && !model_satisfies(c, v.model)) return SolverVerdict::unknown(UnknownReason::incomplete);
  return v;
}

}  // namespace realc
