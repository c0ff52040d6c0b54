#include "doctest.h"

#include "realc/simulate.hpp"
#include "realc/pipeline.hpp"

using namespace realc;

namespace {

Program prog(const std::string& src) { return order_functions(parse(src)); }

SimResult sim(const Program& p, const std::string& fn, std::size_t n, std::uint64_t seed = 7,
              PrecisionName prec = PrecisionName::float64, unsigned threads = 0) {
  SimConfig cfg;
  cfg.samples = n;
  cfg.seed = seed;
  cfg.precision = PrecisionSpec::of(prec);
  cfg.threads = threads;
  return simulate(p, *p.find(fn), cfg);
}

const char* kId = "def id(x: Real): Real = {\n require(x.in(0.0, 1.0))\n x\n}";

}  // namespace

TEST_CASE("identity costs only the input rounding") {
  Program p = prog(kId);
  SimResult r = sim(p, "id", 20000);
  CHECK(r.samples == 20000);
  CHECK(r.faults == 0);
  CHECK(r.max_error > 0);
  CHECK(r.max_error <= pow2(-52));
  REQUIRE(r.observed);
  CHECK(r.observed->lo() >= 0);
  CHECK(r.observed->hi() <= 1);

  SimResult f = sim(p, "id", 20000, 7, PrecisionName::float32);
  CHECK(f.max_error <= pow2(-24));
  CHECK(f.max_error > pow2(-40));
}

TEST_CASE("zero samples") {
  Program p = prog(kId);
  SimResult r = sim(p, "id", 0);
  CHECK(r.samples == 0);
  CHECK(r.drawn == 0);
  CHECK_FALSE(r.observed);
  CHECK(r.max_error == 0);
  CHECK(r.worst.empty());
}

TEST_CASE("same seed, same result, whatever the thread count") {
  Program p = prog("def g(x: Real, y: Real): Real = {\n require(x.in(-1.0, 1.0) && y.in(1.0, 3.0) && x +/- 1e-9)\n (x + y) / y\n}");
  SimResult a = sim(p, "g", 5000, 42, PrecisionName::float64, 1);
  SimResult b = sim(p, "g", 5000, 42, PrecisionName::float64, 4);
  CHECK(a.max_error == b.max_error);
  CHECK(a.worst == b.worst);
  CHECK(a.observed->lo() == b.observed->lo());
  CHECK(a.computed->hi() == b.computed->hi());
  SimResult c = sim(p, "g", 5000, 43);
  CHECK(c.worst != a.worst);
  // noise of 1e-9 on x divided by y >= 1
  CHECK(a.max_error > Rational(1, 10000000000));
  CHECK(a.max_error < parse_decimal("1.1e-9"));
}

TEST_CASE("rejection sampling honours the remaining constraints") {
  Program p = prog("def h(x: Real, y: Real): Real = {\n require(x.in(0.0, 1.0) && y.in(0.0, 1.0) && x < y)\n y - x\n}");
  SimResult r = sim(p, "h", 3000);
  CHECK(r.samples == 3000);
  CHECK(r.drawn > r.samples);
  CHECK(r.observed->lo() >= 0);
}

TEST_CASE("a nearly unsatisfiable precondition is an error") {
  Program p = prog("def h(x: Real, y: Real): Real = {\n require(x.in(0.0, 1.0) && y.in(0.0, 1.0) && x - y > 0.9999)\n x - y\n}");
  CHECK_THROWS_AS(sim(p, "h", 10), SamplingError);
}

TEST_CASE("only hardware formats") {
  Program p = prog(kId);
  CHECK_THROWS_AS(sim(p, "id", 10, 1, PrecisionName::doubledouble), std::invalid_argument);
}

TEST_CASE("simulated error stays below the analysed bound") {
  Program p = prog(R"(
def tri(a: Real, b: Real, c: Real): Real = {
  require(a.in(1.0, 9.0) && b.in(1.0, 9.0) && c.in(1.0, 9.0) && a + b > c + 0.1 && a + c > b + 0.1 && b + c > a + 0.1)
  val s = (a + b + c) / 2.0;
  sqrt(s * (s - a) * (s - b) * (s - c))
}
)");
  PipelineConfig cfg;
  cfg.precisions = {PrecisionSpec::of(PrecisionName::float64)};
  Verdict v = verify_program(p, cfg);
  const FunctionVerdict& fv = v.functions.at(0);
  REQUIRE(fv.spec.error);
  SimResult r = sim(p, "tri", 20000);
  CHECK(r.max_error <= *fv.spec.error);
  REQUIRE(fv.spec.range);
  CHECK(fv.spec.range->lo() <= r.observed->lo());
  CHECK(r.observed->hi() <= fv.spec.range->hi());
}
