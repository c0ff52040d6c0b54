#include "doctest.h"

#include "realc/vcgen.hpp"

using namespace realc;

namespace {

const PrecisionSpec kF32 = PrecisionSpec::of(PrecisionName::float32);
const PrecisionSpec kF64 = PrecisionSpec::of(PrecisionName::float64);

Program prog(const std::string& src) { return order_functions(parse(src)); }

VerificationCondition post_vc(const Program& p, const std::string& fn, const PrecisionSpec& prec = kF64) {
  for (auto& vc : generate_vcs(p, prec))
    if (vc.kind == VcKind::postcondition && vc.function == fn) return vc;
  FAIL("no postcondition VC for " << fn);
  return {};
}

VerificationCondition run(const Program& p, VerificationCondition vc, const PrecisionSpec& prec = kF64) {
  VcConfig cfg;
  Session s(cfg.solver);
  discharge(p, vc, prec, cfg, s);
  return vc;
}

std::size_t count_roundoff(const Constraint& c) {
  std::size_t n = 0;
  for (const auto& v : c.vars) n += is_roundoff_var(v.name) && v.name != "d!x" && v.name != "d!y";
  return n;
}

const char* kBspline = R"(
def bspline3(u: Real): Real = {
  require(0.0 <= u && u <= 1.0)
  -u * u * u / 6.0
} ensuring (res => -0.17 <= res && res <= 0.05 && res +/- 1e-11)
)";

const char* kSine = R"(
def sineTaylor(x: Real): Real = {
  require(-2.0 < x && x < 2.0)
  x - (x*x*x)/6.0 + (x*x*x*x*x)/120.0 - (x*x*x*x*x*x*x)/5040.0
} ensuring (res => -1.0 < res && res < 1.0 && res +/- 1e-14)

def sineOrder3(x: Real): Real = {
  require(-2.0 < x && x < 2.0)
  0.954929658551372 * x - 0.12900613773279798 * (x*x*x)
} ensuring (res => -1.0001 < res && res < 1.0001 && res +/- 1e-14)

def comparison(x: Real): Real = {
  require(-2.0 < x && x < 2.0)
  sineTaylor(x) - sineOrder3(x)
} ensuring (res => res <= 0.1 && res +/- 5e-14)

def comparisonInvalid(x: Real): Real = {
  require(-2.0 < x && x < 2.0)
  sineTaylor(x) - sineOrder3(x)
} ensuring (res => res <= 0.01 && res +/- 5e-14)
)";

}  // namespace

TEST_CASE("sum gets one roundoff factor per operation") {
  Program p = prog(R"(
def f(x: Real, y: Real): Real = {
  require(x.in(1.0, 2.0) && y.in(1.0, 2.0))
  x + y
} ensuring (res => res <= 5.0 && res +/- 1e-10))");
  auto vcs = generate_vcs(p, kF64);
  REQUIRE(vcs.size() == 1);
  const Constraint& c = vcs[0].constraint;
  CHECK(count_roundoff(c) == 1);
  const VarDecl* d = c.find("d!1");
  REQUIRE(d);
  CHECK(d->bounds->hi() == kF64.epsilon);
  CHECK(d->bounds->lo() == -kF64.epsilon);
  // input twins carry representation roundoff of eps * max|range|
  REQUIRE(c.find("d!x"));
  std::string text = to_source(c.formula);
  CHECK(text.find("x + y") != std::string::npos);
  CHECK(text.find("d!1") != std::string::npos);
}

TEST_CASE("a let binding adds no roundoff") {
  Program p = prog(R"(
def f(x: Real): Real = {
  require(x.in(1.0, 2.0))
  val z = x;
  z
} ensuring (res => res <= 3.0))");
  auto vcs = generate_vcs(p, kF64);
  REQUIRE(vcs.size() == 1);
  CHECK(count_roundoff(vcs[0].constraint) == 0);
}

TEST_CASE("calls are twinned and get a precondition VC") {
  Program p = prog(R"(
def g(y: Real): Real = {
  require(y.in(0.0, 1.0))
  y * y
}
def f(x: Real): Real = {
  require(x.in(0.0, 2.0))
  g(x * x)
} ensuring (res => res <= 20.0))");
  auto vcs = generate_vcs(p, kF64);
  REQUIRE(vcs.size() == 2);
  CHECK(vcs[0].kind == VcKind::postcondition);
  CHECK(vcs[0].constraint.find("call!1"));
  CHECK(vcs[0].constraint.find("call!1~"));
  CHECK(vcs[1].kind == VcKind::call_precondition);
  CHECK(vcs[1].callee == "g");
  CHECK(vcs[1].site == 1);
  // x*x reaches 4, outside g's domain, at a genuine input
  auto pre = run(p, vcs[1]);
  CHECK(pre.status == VcStatus::disproven);
  REQUIRE(pre.counterexample);
  CHECK(pre.counterexample->classification == CexClass::valid);
}

TEST_CASE("templates differ only in roundoff bounds across precisions") {
  Program p = prog(kSine);
  auto a = generate_vcs(p, kF32), b = generate_vcs(p, kF64);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(same_template(a[i].constraint, b[i].constraint));
    CHECK_FALSE(a[i].constraint.vars.empty());
    bool differs = false;
    for (std::size_t j = 0; j < a[i].constraint.vars.size(); ++j)
      differs = differs || a[i].constraint.vars[j].bounds != b[i].constraint.vars[j].bounds;
    CHECK(differs);
  }
}

TEST_CASE("bspline is proven on the full constraint") {
  Program p = prog(kBspline);
  auto vc = run(p, post_vc(p, "bspline3"));
  CHECK(vc.status == VcStatus::proven);
  REQUIRE(vc.used);
  CHECK(vc.used->str() == "uninterpreted/exact/merged");
}

TEST_CASE("sineTaylor verifies and its generated error is about 1.6e-15") {
  Program p = prog(kSine);
  auto vc = run(p, post_vc(p, "sineTaylor"));
  CHECK(vc.status == VcStatus::proven);
  GeneratedSpec g = generate_spec(p, *p.find("sineTaylor"), kF64);
  REQUIRE(g.error);
  CHECK(*g.error < parse_decimal("1.7e-15"));
  CHECK(*g.error > parse_decimal("1.5e-15"));
}

TEST_CASE("noisy Heron needs the error approximation") {
  Program p = prog(R"(
def heronNoisy(a: Real, b: Real, c: Real): Real = {
  require(a.in(1.0, 9.0) && b.in(1.0, 9.0) && c.in(1.0, 9.0) &&
          a + b > c + 0.1 && a + c > b + 0.1 && b + c > a + 0.1 && a +/- 1e-11 && b +/- 1e-11 && c +/- 1e-11)
  val s = (a + b + c) / 2.0;
  sqrt(s * (s - a) * (s - b) * (s - c))
} ensuring (res => res +/- 1e-7))");
  auto vc = run(p, post_vc(p, "heronNoisy"));
  CHECK(vc.status == VcStatus::proven);
  REQUIRE(vc.used);
  CHECK(vc.used->arith == ArithHandling::error_actual);
}

TEST_CASE("comparison needs the inlined bodies") {
  Program p = prog(kSine);
  auto vc = run(p, post_vc(p, "comparison"));
  CHECK(vc.status == VcStatus::proven);
  REQUIRE(vc.used);
  CHECK(vc.used->calls == CallHandling::body_inline);
}

TEST_CASE("comparisonInvalid has a genuine counterexample at x = 1") {
  Program p = prog(kSine);
  auto vc = run(p, post_vc(p, "comparisonInvalid"));
  CHECK(vc.status == VcStatus::disproven);
  REQUIRE(vc.counterexample);
  CHECK(vc.counterexample->classification == CexClass::valid);
  CHECK(vc.counterexample->model.at("x") == Rational(1));
}

TEST_CASE("res < res is disproven") {
  Program p = prog(R"(
def f(x: Real): Real = {
  require(x.in(1.0, 2.0))
  x * x
} ensuring (res => res < res))");
  auto vc = run(p, post_vc(p, "f"));
  CHECK(vc.status == VcStatus::disproven);
  REQUIRE(vc.counterexample);
  CHECK(vc.counterexample->classification == CexClass::valid);
}

TEST_CASE("counterexample classification") {
  Program p = prog(R"(
def f(x: Real): Real = {
  require(x.in(0.0, 2.0))
  x * x
} ensuring (res => res <= 3.0 && res +/- 1e-20))");
  auto vc = post_vc(p, "f");
  // ideal part violated with no error at all
  CHECK(classify_counterexample(p, vc, {{"x", Rational(15, 8)}}) == CexClass::valid);
  // x.in is open: the endpoint is not an input
  CHECK(classify_counterexample(p, vc, {{"x", Rational(2)}}) == CexClass::inconclusive);
  // ideal part holds; only slack in the roundoff factors breaks the bound
  CHECK(classify_counterexample(p, vc, {{"x", Rational(1)}, {"d!1", kF64.epsilon}}) == CexClass::inconclusive);
  // not an input of the function
  CHECK(classify_counterexample(p, vc, {{"x", Rational(5)}}) == CexClass::inconclusive);
  CHECK(classify_counterexample(p, vc, {}) == CexClass::inconclusive);
}

TEST_CASE("generated specs") {
  Program p = prog(R"(
def one(x: Real): Real = {
  require(x.in(1.0, 2.0))
  1.0
}
def id(x: Real): Real = {
  require(x.in(1.0, 2.0))
  x
})");
  GeneratedSpec c = generate_spec(p, *p.find("one"), kF64);
  REQUIRE(c.complete());
  CHECK(*c.range == Interval(Rational(1)));
  CHECK(*c.error == 0);
  GeneratedSpec i = generate_spec(p, *p.find("id"), kF64);
  REQUIRE(i.complete());
  CHECK(*i.range == Interval(Rational(1), Rational(2)));
  CHECK(*i.error == pow2(-52));
  CHECK(to_source(i.clauses()).find("res") != std::string::npos);
}

TEST_CASE("generated specs verify as given postconditions") {
  Program p = prog(kSine);
  const FunctionDef& f = *p.find("sineOrder3");
  GeneratedSpec g = generate_spec(p, f, kF64);
  REQUIRE(g.complete());
  Program q = p;
  for (auto& fn : q.functions)
    if (fn.name == "sineOrder3") fn.post = g.clauses(), fn.has_post = true;
  auto vc = run(q, post_vc(q, "sineOrder3"));
  CHECK(vc.status == VcStatus::proven);
}
