#include "realc/tape.hpp"

#include <stdexcept>
#include <unordered_map>

namespace realc {

namespace {

struct Compiler {
  const std::unordered_map<std::string, int>& var_index;
  std::vector<TapeOp>& ops;
  std::unordered_map<ExprPtr, int, ExprHash, ExprEqual> memo;

  int emit(const ExprPtr& e) {
    if (auto it = memo.find(e); it != memo.end()) return it->second;
    TapeOp op;
    op.kind = e->kind;
    switch (e->kind) {
      case ExprKind::constant:
        op.value = e->value;
        op.cvalue = enclose(e->value);
        break;
      case ExprKind::variable: {
        auto it = var_index.find(e->name);
        if (it == var_index.end()) throw std::invalid_argument("unbound variable in constraint: " + e->name);
        op.var = it->second;
        break;
      }
      case ExprKind::add:
      case ExprKind::sub:
      case ExprKind::mul:
      case ExprKind::div:
        op.a = emit(e->args[0]);
        op.b = emit(e->args[1]);
        break;
      case ExprKind::neg:
      case ExprKind::sqrt:
        op.a = emit(e->args[0]);
        break;
      case ExprKind::ite:
        op.a = emit(e->args[0]);
        op.b = emit(e->args[1]);
        op.c = emit(e->args[2]);
        op.d = emit(e->args[3]);
        op.cmp = e->cmp;
        break;
      default:
        throw std::invalid_argument("expression kind not supported in constraints: " + to_source(e));
    }
    ops.push_back(std::move(op));
    int slot = static_cast<int>(ops.size()) - 1;
    memo.emplace(e, slot);
    return slot;
  }
};

// Three-valued comparison of two enclosures: 1 true, 0 false, -1 undecided.
template <class Lo, class Hi, class T>
int decide(const T& l, CmpOp op, const T& r, Lo lo, Hi hi) {
  switch (op) {
    case CmpOp::lt:
      if (hi(l) < lo(r)) return 1;
      if (lo(l) >= hi(r)) return 0;
      return -1;
    case CmpOp::le:
      if (hi(l) <= lo(r)) return 1;
      if (lo(l) > hi(r)) return 0;
      return -1;
    case CmpOp::gt:
      if (lo(l) > hi(r)) return 1;
      if (hi(l) <= lo(r)) return 0;
      return -1;
    case CmpOp::ge:
      if (lo(l) >= hi(r)) return 1;
      if (hi(l) < lo(r)) return 0;
      return -1;
  }
  return -1;
}

int decide_d(const DInterval& l, CmpOp op, const DInterval& r) {
  if (l.is_undefined() || r.is_undefined()) return -1;
  return decide(l, op, r, [](const DInterval& x) { return x.lo; }, [](const DInterval& x) { return x.hi; });
}

int decide_q(const Interval& l, CmpOp op, const Interval& r) {
  return decide(l, op, r, [](const Interval& x) -> const Rational& { return x.lo(); },
                [](const Interval& x) -> const Rational& { return x.hi(); });
}

}  // namespace

Tape::Tape(const std::vector<ExprPtr>& roots, const std::vector<std::string>& vars) : num_vars_(vars.size()) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < vars.size(); ++i) index.emplace(vars[i], static_cast<int>(i));
  Compiler c{index, ops_, {}};
  for (const auto& r : roots) roots_.push_back(c.emit(inline_lets(r)));
}

std::vector<std::optional<Interval>> Tape::eval_exact(const std::vector<Interval>& box) const {
  std::vector<std::optional<Interval>> v(ops_.size());
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const TapeOp& op = ops_[i];
    auto A = [&]() -> const std::optional<Interval>& { return v[op.a]; };
    auto B = [&]() -> const std::optional<Interval>& { return v[op.b]; };
    try {
      switch (op.kind) {
        case ExprKind::constant: v[i] = Interval(op.value); break;
        case ExprKind::variable: v[i] = box[op.var]; break;
        case ExprKind::add: if (A() && B()) v[i] = *A() + *B(); break;
        case ExprKind::sub: if (A() && B()) v[i] = *A() - *B(); break;
        case ExprKind::mul: if (A() && B()) v[i] = *A() * *B(); break;
        case ExprKind::div: if (A() && B()) v[i] = *A() / *B(); break;
        case ExprKind::neg: if (A()) v[i] = -*A(); break;
        case ExprKind::sqrt: if (A()) v[i] = sqrt(*A()); break;
        case ExprKind::ite: {
          if (!A() || !B()) break;
          int d = decide_q(*A(), op.cmp, *B());
          if (d == 1) v[i] = v[op.c];
          else if (d == 0) v[i] = v[op.d];
          else if (v[op.c] && v[op.d]) v[i] = hull(*v[op.c], *v[op.d]);
          break;
        }
        default: break;
      }
    } catch (const RangeFault&) {
      v[i].reset();
    }
  }
  return v;
}

void Tape::eval(const std::vector<DInterval>& box, std::vector<DInterval>& out) const {
  out.resize(ops_.size());
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const TapeOp& op = ops_[i];
    switch (op.kind) {
      case ExprKind::constant: out[i] = op.cvalue; break;
      case ExprKind::variable: out[i] = box[op.var]; break;
      case ExprKind::add: out[i] = out[op.a] + out[op.b]; break;
      case ExprKind::sub: out[i] = out[op.a] - out[op.b]; break;
      case ExprKind::mul: out[i] = out[op.a] * out[op.b]; break;
      case ExprKind::div: out[i] = out[op.a] / out[op.b]; break;
      case ExprKind::neg: out[i] = -out[op.a]; break;
      case ExprKind::sqrt: out[i] = dsqrt(out[op.a]); break;
      case ExprKind::ite: {
        int d = decide_d(out[op.a], op.cmp, out[op.b]);
        out[i] = d == 1 ? out[op.c] : d == 0 ? out[op.d] : dhull(out[op.c], out[op.d]);
        break;
      }
      default: out[i] = DInterval::undefined();
    }
  }
}

bool Tape::eval_grad(const std::vector<DInterval>& box, std::vector<DInterval>& out,
                     std::vector<DInterval>& grad) const {
  eval(box, out);
  const std::size_t n = num_vars_;
  grad.assign(ops_.size() * n, DInterval{0, 0});
  std::vector<char> valid(ops_.size(), 1);
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const TapeOp& op = ops_[i];
    DInterval* g = &grad[i * n];
    const DInterval* ga = op.a >= 0 ? &grad[op.a * n] : nullptr;
    const DInterval* gb = op.b >= 0 ? &grad[op.b * n] : nullptr;
    if (op.a >= 0 && !valid[op.a]) valid[i] = 0;
    if (op.b >= 0 && op.kind != ExprKind::ite && !valid[op.b]) valid[i] = 0;
    if (!valid[i] || out[i].is_undefined()) {
      valid[i] = 0;
      continue;
    }
    switch (op.kind) {
      case ExprKind::constant: break;
      case ExprKind::variable: g[op.var] = {1, 1}; break;
      case ExprKind::add:
        for (std::size_t k = 0; k < n; ++k) g[k] = ga[k] + gb[k];
        break;
      case ExprKind::sub:
        for (std::size_t k = 0; k < n; ++k) g[k] = ga[k] - gb[k];
        break;
      case ExprKind::neg:
        for (std::size_t k = 0; k < n; ++k) g[k] = -ga[k];
        break;
      case ExprKind::mul:
        for (std::size_t k = 0; k < n; ++k) g[k] = out[op.a] * gb[k] + out[op.b] * ga[k];
        break;
      case ExprKind::div:
        for (std::size_t k = 0; k < n; ++k) g[k] = (ga[k] - out[i] * gb[k]) / out[op.b];
        break;
      case ExprKind::sqrt: {
        DInterval twice = DInterval{2, 2} * out[i];
        for (std::size_t k = 0; k < n; ++k) g[k] = ga[k] / twice;
        break;
      }
      case ExprKind::ite: {
        int d = decide_d(out[op.a], op.cmp, out[op.b]);
        int src = d == 1 ? op.c : d == 0 ? op.d : -1;
        if (src < 0 || !valid[src]) {
          valid[i] = 0;
        } else {
          for (std::size_t k = 0; k < n; ++k) g[k] = grad[src * n + k];
        }
        break;
      }
      default: valid[i] = 0;
    }
    for (std::size_t k = 0; valid[i] && k < n; ++k) {
      if (g[k].is_undefined()) valid[i] = 0;
    }
  }
  for (int r : roots_) {
    if (!valid[r]) return false;
  }
  return true;
}

bool Tape::contract(int root, const DInterval& target, std::vector<DInterval>& values,
                    std::vector<DInterval>& box) const {
  auto narrow = [&](int slot, const DInterval& by) {
    if (by.is_undefined() || values[slot].is_undefined()) return true;
    auto r = dintersect(values[slot], by);
    if (!r) return false;
    values[slot] = *r;
    return true;
  };
  if (!narrow(root, target)) return false;
  for (int i = root; i >= 0; --i) {
    const TapeOp& op = ops_[i];
    const DInterval v = values[i];
    if (v.is_undefined()) continue;
    switch (op.kind) {
      case ExprKind::constant:
        if (v.hi < op.cvalue.lo || op.cvalue.hi < v.lo) return false;
        break;
      case ExprKind::variable: {
        auto r = dintersect(box[op.var], v);
        if (!r) return false;
        box[op.var] = *r;
        break;
      }
      case ExprKind::add:
        if (!narrow(op.a, v - values[op.b]) || !narrow(op.b, v - values[op.a])) return false;
        break;
      case ExprKind::sub:
        if (!narrow(op.a, v + values[op.b]) || !narrow(op.b, values[op.a] - v)) return false;
        break;
      case ExprKind::neg:
        if (!narrow(op.a, -v)) return false;
        break;
      case ExprKind::mul:
        if (!values[op.b].contains_zero() && !narrow(op.a, v / values[op.b])) return false;
        if (!values[op.a].contains_zero() && !narrow(op.b, v / values[op.a])) return false;
        break;
      case ExprKind::div:
        if (!narrow(op.a, v * values[op.b])) return false;
        if (!v.contains_zero() && !narrow(op.b, values[op.a] / v)) return false;
        break;
      case ExprKind::sqrt: {
        if (v.hi < 0) return false;
        DInterval nonneg{std::max(v.lo, 0.0), v.hi};
        if (!narrow(op.a, nonneg * nonneg)) return false;
        break;
      }
      default: break;
    }
  }
  return true;
}

}  // namespace realc
