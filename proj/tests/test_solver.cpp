#include <cstdlib>
#include <random>

#include "doctest.h"
#include "realc/solver.hpp"

using namespace realc;

namespace {

Rational q(const char* s) { return parse_decimal(s); }
ExprPtr c(const char* s) { return ex::constant(q(s), s); }
ExprPtr v(const char* n) { return ex::var(n); }

Constraint box1(const char* name, const char* lo, const char* hi) {
  Constraint k;
  k.declare(name, Interval(q(lo), q(hi)));
  return k;
}

BackendConfig builtin() { return BackendConfig{}; }

std::string external_command() {
  if (const char* env = std::getenv("REALC_SMT_SOLVER")) return env;
  return "z3 -in";
}

bool external_available() {
  BackendConfig cfg;
  cfg.backend = BackendConfig::Backend::external;
  cfg.external_command = external_command();
  try {
    check_sat(Constraint{}, cfg);
    return true;
  } catch (const BackendUnavailable&) {
    return false;
  }
}

}  // namespace

TEST_CASE("check_sat examples") {
  Constraint a = box1("x", "1", "2");
  a.assert_that(fm::cmp(v("x"), CmpOp::lt, c("0")));
  CHECK(check_sat(a, builtin()).is_unsat());

  Constraint b = box1("x", "1", "2");
  b.assert_that(fm::cmp(ex::mul(v("x"), v("x")), CmpOp::gt, c("3")));
  SolverVerdict sb = check_sat(b, builtin());
  REQUIRE(sb.is_sat());
  CHECK(sb.model.at("x") * sb.model.at("x") > 3);
  CHECK(model_satisfies(b, sb.model));
}

TEST_CASE("tiny budget gives unknown(timeout)") {
  // x^8 - x^4 over a wide box, asked for a value just below its minimum.
  Constraint k;
  k.declare("x", Interval(Rational(-3), Rational(3)));
  k.declare("y", Interval(Rational(-3), Rational(3)));
  ExprPtr x2 = ex::mul(v("x"), v("x")), y2 = ex::mul(v("y"), v("y"));
  ExprPtr x4 = ex::mul(x2, x2), y4 = ex::mul(y2, y2);
  ExprPtr p = ex::add(ex::sub(ex::mul(x4, x4), x4), ex::sub(ex::mul(y4, y4), y4));
  k.assert_that(fm::cmp(p, CmpOp::lt, ex::constant(Rational(-1, 2))));
  BackendConfig cfg;
  cfg.timeout_seconds = 0.001;
  SolverVerdict r = check_sat(k, cfg);
  CHECK(r.is_unknown());
  CHECK(r.reason == UnknownReason::timeout);
}

TEST_CASE("builtin_icp_check examples") {
  ExprPtr x = v("x");
  ExprPtr f = ex::mul(x, ex::sub(c("1"), x));
  Constraint a = box1("x", "0", "1");
  a.assert_that(fm::cmp(f, CmpOp::gt, c("0.26")));
  CHECK(builtin_icp_check(a, builtin()).is_unsat());

  Constraint b = box1("x", "0", "1");
  b.assert_that(fm::cmp(f, CmpOp::gt, c("0.24")));
  SolverVerdict sb = builtin_icp_check(b, builtin());
  REQUIRE(sb.is_sat());
  CHECK(model_satisfies(b, sb.model));

  Constraint d = box1("x", "0", "1");
  d.assert_that(fm::cmp(x, CmpOp::ge, c("0")));
  CHECK(builtin_icp_check(d, builtin()).is_sat());
}

TEST_CASE("unbounded variables are incomplete for the builtin backend") {
  Constraint k;
  k.declare_unbounded("x");
  k.assert_that(fm::cmp(v("x"), CmpOp::gt, c("1")));
  SolverVerdict r = builtin_icp_check(k, builtin());
  CHECK(r.is_unknown());
  CHECK(r.reason == UnknownReason::incomplete);
}

TEST_CASE("sqrt and division constraints") {
  Constraint k = box1("x", "0", "4");
  k.assert_that(fm::cmp(ex::sqrt(v("x")), CmpOp::gt, c("2")));
  CHECK(builtin_icp_check(k, builtin()).is_unsat());

  Constraint d = box1("y", "-1", "1");
  d.assert_that(fm::cmp(ex::div(c("1"), v("y")), CmpOp::lt, c("-3")));
  SolverVerdict r = builtin_icp_check(d, builtin());
  REQUIRE(r.is_sat());
  CHECK(model_satisfies(d, r.model));
}

TEST_CASE("perturbation variables cancel through the mean-value form") {
  // (x + e)(1 + d) - x stays within |e| + |x||d| + |e||d|.
  Constraint k;
  k.declare("x", Interval(Rational(1), Rational(1000)));
  k.declare("e", Interval(-pow2(-60), pow2(-60)), true);
  k.declare("d", Interval(-pow2(-53), pow2(-53)), true);
  ExprPtr actual = ex::mul(ex::add(v("x"), v("e")), ex::add(c("1"), v("d")));
  ExprPtr diff = ex::sub(actual, v("x"));
  Rational bound = pow2(-60) + 1000 * pow2(-53) + pow2(-113);
  k.assert_that(fm::disj({fm::cmp(diff, CmpOp::gt, ex::constant(bound * Rational(101, 100))),
                          fm::cmp(diff, CmpOp::lt, ex::constant(-bound * Rational(101, 100)))}));
  CHECK(builtin_icp_check(k, builtin()).is_unsat());
}

TEST_CASE("with_assertions examples") {
  // Valid triangles: the Heron radicand stays non-negative.
  Session s{builtin()};
  Constraint base;
  for (const char* n : {"a", "b", "c"}) base.declare(n, Interval(Rational(1), Rational(9)));
  ExprPtr a = v("a"), b = v("b"), cc = v("c");
  base.assert_that(fm::conj({fm::cmp(ex::add(a, b), CmpOp::gt, ex::add(cc, c("0.1"))),
                             fm::cmp(ex::add(a, cc), CmpOp::gt, ex::add(b, c("0.1"))),
                             fm::cmp(ex::add(b, cc), CmpOp::gt, ex::add(a, c("0.1")))}));
  ExprPtr sum = ex::div(ex::add(ex::add(a, b), cc), c("2.0"));
  ExprPtr rad = ex::mul(ex::mul(ex::mul(sum, ex::sub(sum, a)), ex::sub(sum, b)), ex::sub(sum, cc));
  Constraint query;
  query.assert_that(fm::cmp(rad, CmpOp::lt, c("0")));
  auto r = with_assertions(s, base, [&](Session& inner) { return inner.check(query); });
  CHECK(r.is_unsat());
  CHECK(s.depth() == 0);

  Session empty{builtin()};
  Constraint x = box1("x", "1", "2");
  x.assert_that(fm::cmp(v("x"), CmpOp::lt, c("0")));
  CHECK(with_assertions(empty, Constraint{}, [&](Session& inner) { return inner.check(x); }).is_unsat());
}

namespace {

// Random bounded constraint over x, y with a planted point (px, py).
struct Planted {
  Constraint c;
  Rational px, py;
};

ExprPtr random_poly(std::mt19937_64& rng, int depth) {
  if (depth == 0 || rng() % 3 == 0) {
    switch (rng() % 3) {
      case 0: return ex::constant(Rational(static_cast<long>(rng() % 11) - 5, 4));
      case 1: return v("x");
      default: return v("y");
    }
  }
  ExprPtr a = random_poly(rng, depth - 1), b = random_poly(rng, depth - 1);
  switch (rng() % 3) {
    case 0: return ex::add(a, b);
    case 1: return ex::sub(a, b);
    default: return ex::mul(a, b);
  }
}

Rational eval_point(const ExprPtr& e, const Rational& x, const Rational& y) {
  switch (e->kind) {
    case ExprKind::constant: return e->value;
    case ExprKind::variable: return e->name == "x" ? x : y;
    case ExprKind::add: return eval_point(e->args[0], x, y) + eval_point(e->args[1], x, y);
    case ExprKind::sub: return eval_point(e->args[0], x, y) - eval_point(e->args[1], x, y);
    default: return eval_point(e->args[0], x, y) * eval_point(e->args[1], x, y);
  }
}

Planted planted(std::mt19937_64& rng) {
  Planted p;
  p.px = Rational(static_cast<long>(rng() % 33) - 16, 8);
  p.py = Rational(static_cast<long>(rng() % 33) - 16, 8);
  p.c.declare("x", Interval(Rational(-2), Rational(2)));
  p.c.declare("y", Interval(Rational(-2), Rational(2)));
  std::vector<FormulaPtr> parts;
  for (int i = 0; i < 2; ++i) {
    ExprPtr e = random_poly(rng, 3);
    Rational val = eval_point(e, p.px, p.py);
    // Satisfied at the planted point with a small margin either way.
    if (rng() % 2) parts.push_back(fm::cmp(e, CmpOp::le, ex::constant(val + Rational(1, 64))));
    else parts.push_back(fm::cmp(e, CmpOp::ge, ex::constant(val - Rational(1, 64))));
  }
  p.c.assert_that(fm::conj(parts));
  return p;
}

}  // namespace

TEST_CASE("never wrong on planted and empty constraints") {
  std::mt19937_64 rng(42);
  BackendConfig cfg;
  cfg.timeout_seconds = 0.1;
  for (int i = 0; i < 60; ++i) {
    Planted p = planted(rng);
    SolverVerdict r = builtin_icp_check(p.c, cfg);
    CHECK_FALSE(r.is_unsat());
    if (r.is_sat()) CHECK(model_satisfies(p.c, r.model));

    Constraint empty = p.c;
    empty.assert_that(fm::cmp(v("x"), CmpOp::lt, c("-2")));
    CHECK_FALSE(builtin_icp_check(empty, cfg).is_sat());
  }
}

TEST_CASE("models satisfy weaker constraints") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    Planted p = planted(rng);
    Constraint stronger = p.c;
    stronger.assert_that(fm::cmp(ex::add(v("x"), v("y")), CmpOp::le, ex::constant(p.px + p.py + 1)));
    SolverVerdict r = builtin_icp_check(stronger, builtin());
    if (r.is_sat()) CHECK(model_satisfies(p.c, r.model));
  }
}

TEST_CASE("nested scopes agree with the flat conjunction") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 30; ++i) {
    Planted a = planted(rng), b = planted(rng);
    Constraint query;
    query.assert_that(fm::cmp(random_poly(rng, 2), CmpOp::lt, c("0.5")));
    Session s{builtin()};
    s.push(a.c);
    s.push(b.c);
    SolverVerdict nested = s.check(query);
    s.pop();
    s.pop();
    SolverVerdict flat = builtin_icp_check(conjoin(conjoin(a.c, b.c), query), builtin());
    CHECK(nested.kind == flat.kind);
  }
}

TEST_CASE("emit_smtlib structure and determinism") {
  Constraint k = box1("x", "1", "2");
  k.assert_that(fm::cmp(v("x"), CmpOp::lt, c("0")));
  std::string text = emit_smtlib(k);
  CHECK(text ==
        "(set-logic QF_NRA)\n"
        "(declare-const |x| Real)\n"
        "(assert (<= 1.0 |x|))\n"
        "(assert (<= |x| 2.0))\n"
        "(assert (< |x| 0.0))\n"
        "(check-sat)\n");
  CHECK(emit_smtlib(k) == text);

  Constraint r = box1("x", "-0.5", "0.25");
  r.assert_that(fm::cmp(ex::sqrt(ex::constant(Rational(1, 3))), CmpOp::gt, ex::neg(v("x"))));
  std::string t2 = emit_smtlib(r);
  CHECK(t2.find("(- (/ 1.0 2.0))") != std::string::npos);
  CHECK(t2.find("(/ 1.0 3.0)") != std::string::npos);
  CHECK(t2.find("aux!0") != std::string::npos);
}

TEST_CASE("external backend agrees with builtin where both decide") {
  if (!external_available()) {
    MESSAGE("no external solver; set REALC_SMT_SOLVER to enable");
    return;
  }
  BackendConfig ext;
  ext.backend = BackendConfig::Backend::external;
  ext.external_command = external_command();
  BackendConfig in;
  in.timeout_seconds = 0.2;
  std::mt19937_64 rng(1234);
  int compared = 0;
  for (int i = 0; i < 100; ++i) {
    Constraint k;
    k.declare("x", Interval(Rational(-2), Rational(2)));
    k.declare("y", Interval(Rational(-2), Rational(2)));
    k.assert_that(fm::cmp(random_poly(rng, 3), rng() % 2 ? CmpOp::lt : CmpOp::ge,
                          ex::constant(Rational(static_cast<long>(rng() % 9) - 4, 3))));
    SolverVerdict a = builtin_icp_check(k, in);
    SolverVerdict b = check_sat(k, ext);
    if (a.is_unknown() || b.is_unknown()) continue;
    ++compared;
    CHECK(a.kind == b.kind);
    if (b.is_sat()) CHECK(model_satisfies(k, b.model));
  }
  CHECK(compared >= 50);
}

TEST_CASE("session falls back to builtin when the external command is missing") {
  BackendConfig cfg;
  cfg.backend = BackendConfig::Backend::external;
  cfg.external_command = "/nonexistent/solver-binary";
  CHECK_THROWS_AS(check_sat(Constraint{}, cfg), BackendUnavailable);
  Session s{cfg};
  Constraint k = box1("x", "1", "2");
  k.assert_that(fm::cmp(v("x"), CmpOp::lt, c("0")));
  CHECK(s.check(k).is_unsat());
  CHECK(s.config().backend == BackendConfig::Backend::builtin);
}

TEST_CASE("strict top-level bounds refute nested endpoint atoms") {
  using fm::cmp;
  Constraint k = box1("x", "0", "1");
  k.assert_that(cmp(v("x"), CmpOp::gt, c("0")));
  k.assert_that(cmp(c("1"), CmpOp::gt, v("x")));
  Constraint viol = k;
  viol.assert_that(fm::disj({cmp(v("x"), CmpOp::le, c("0")), cmp(v("x"), CmpOp::ge, c("1"))}));
  CHECK(builtin_icp_check(viol, builtin()).is_unsat());
  // closed sides leave the endpoint reachable
  Constraint closed = box1("x", "0", "1");
  closed.assert_that(fm::disj({cmp(v("x"), CmpOp::le, c("0")), cmp(v("x"), CmpOp::ge, c("2"))}));
  auto r = builtin_icp_check(closed, builtin());
  REQUIRE(r.is_sat());
  CHECK(r.model.at("x") == 0);
  // x > 1 && x < 1 is empty, x >= 1 && x <= 1 is not
  Constraint pinch = box1("x", "0", "2");
  pinch.assert_that(cmp(v("x"), CmpOp::gt, c("1")));
  pinch.assert_that(cmp(v("x"), CmpOp::lt, c("1")));
  CHECK(builtin_icp_check(pinch, builtin()).is_unsat());
  Constraint point = box1("x", "0", "2");
  point.assert_that(cmp(v("x"), CmpOp::ge, c("1")));
  point.assert_that(cmp(v("x"), CmpOp::le, c("1")));
  CHECK(builtin_icp_check(point, builtin()).is_sat());
}

TEST_CASE("a session keeps answers in step after sat models") {
  if (!external_available()) return;
  BackendConfig cfg;
  cfg.backend = BackendConfig::Backend::external;
  cfg.external_command = external_command();
  Session s{cfg};
  Constraint base = box1("x", "0", "10");
  with_assertions(s, base, [&](Session& in) {
    for (int round = 0; round < 5; ++round) {
      Constraint sat, unsat;
      sat.assert_that(fm::cmp(v("x"), CmpOp::lt, c("1")));
      unsat.assert_that(fm::cmp(v("x"), CmpOp::gt, c("11")));
      CHECK(in.check(sat).is_sat());
      CHECK(in.check(unsat).is_unsat());
      CHECK(in.check(sat).is_sat());
    }
    return 0;
  });
}

TEST_CASE("models inside bands thinner than binary64 resolution") {
  using fm::cmp;
  // 10 - 1e-30 < b*b - a*c <= 10 around a point where a midpoint never lands
  Constraint k = box1("a", "2.999", "3.001");
  k.declare("b", Interval(q("3.5"), q("4.5")));
  k.declare("c", Interval(Rational(-2), Rational(2)));
  ExprPtr g = ex::sub(ex::mul(v("b"), v("b")), ex::mul(v("a"), v("c")));
  k.assert_that(cmp(g, CmpOp::le, c("10")));
  k.assert_that(cmp(g, CmpOp::gt, ex::constant(Rational(10) - q("1e-30"))));
  Constraint low = k;
  low.assert_that(cmp(v("c"), CmpOp::lt, c("1")));
  SolverVerdict r = builtin_icp_check(low, builtin());
  REQUIRE(r.is_sat());
  CHECK(model_satisfies(low, r.model));
  Constraint none = k;
  none.assert_that(cmp(g, CmpOp::gt, c("11")));
  CHECK(builtin_icp_check(none, builtin()).is_unsat());
}
