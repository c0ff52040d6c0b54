#include "realc/fpeval.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "realc/interval.hpp"
#include "realc/range.hpp"

namespace realc {

namespace {

template <class T>
T constant_of(const Rational& q);
template <>
double constant_of<double>(const Rational& q) {
  return to_double(q);
}
template <>
float constant_of<float>(const Rational& q) {
  return to_float(q);
}

template <class T>
class FloatEval {
 public:
  explicit FloatEval(const std::map<std::string, T>& env) : env_(env) {}

  T eval(const ExprPtr& e) {
    if (auto it = memo_.find(e.get()); it != memo_.end()) return it->second;
    T v = compute(e);
    memo_.emplace(e.get(), v);
    return v;
  }

 private:
  const std::map<std::string, T>& env_;
  std::unordered_map<const Expr*, T> memo_;

  T compute(const ExprPtr& e) {
    switch (e->kind) {
      case ExprKind::constant: return constant_of<T>(e->value);
      case ExprKind::variable: {
        auto it = env_.find(e->name);
        if (it == env_.end()) throw std::invalid_argument("unbound variable '" + e->name + "'");
        return it->second;
      }
      case ExprKind::add: return eval(e->args[0]) + eval(e->args[1]);
      case ExprKind::sub: return eval(e->args[0]) - eval(e->args[1]);
      case ExprKind::mul: return eval(e->args[0]) * eval(e->args[1]);
      case ExprKind::div: return eval(e->args[0]) / eval(e->args[1]);
      case ExprKind::neg: return -eval(e->args[0]);
      case ExprKind::sqrt: return std::sqrt(eval(e->args[0]));
      case ExprKind::ite: {
        T l = eval(e->args[0]), r = eval(e->args[1]);
        bool c = false;
        switch (e->cmp) {
          case CmpOp::lt: c = l < r; break;
          case CmpOp::le: c = l <= r; break;
          case CmpOp::gt: c = l > r; break;
          case CmpOp::ge: c = l >= r; break;
        }
        return c ? eval(e->args[2]) : eval(e->args[3]);
      }
      default: throw std::invalid_argument("float evaluation needs calls and ~x/!x removed");
    }
  }
};

}  // namespace

double eval_double(const ExprPtr& e, const std::map<std::string, double>& env) {
  FloatEval<double> ev(env);
  return ev.eval(inline_lets(e));
}

float eval_float(const ExprPtr& e, const std::map<std::string, float>& env) {
  FloatEval<float> ev(env);
  return ev.eval(inline_lets(e));
}

Interval eval_exact_point(const ExprPtr& e, const std::map<std::string, Rational>& point) {
  std::map<std::string, Interval> env;
  for (const auto& [k, v] : point) env.emplace(k, Interval(v));
  // Conditionals on a point are decided unless the comparison involves a
  // sqrt enclosure that straddles; eval_interval then takes the hull, which
  // still encloses the exact value.
  return eval_interval(e, env);
}

}  // namespace realc
