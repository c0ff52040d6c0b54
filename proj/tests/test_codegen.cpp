#include "doctest.h"

#include <nlohmann/json.hpp>

#include "realc/codegen.hpp"

using namespace realc;
using nlohmann::json;

namespace {

const PrecisionSpec kF32 = PrecisionSpec::of(PrecisionName::float32);
const PrecisionSpec kF64 = PrecisionSpec::of(PrecisionName::float64);
const PrecisionSpec kDD = PrecisionSpec::of(PrecisionName::doubledouble);

Program prog(const std::string& src) { return order_functions(parse(src)); }

ExprPtr body_of(const std::string& expr) {
  return prog("def f(a: Real, b: Real, c: Real): Real = {\n require(a.in(1.0, 2.0) && b.in(1.0, 2.0) && c.in(1.0, 2.0))\n " +
              expr + "\n}")
      .functions[0]
      .body;
}

Verdict run(const Program& p, std::vector<PrecisionSpec> precs) {
  PipelineConfig cfg;
  cfg.precisions = std::move(precs);
  return verify_program(p, cfg);
}

const char* kPoly = R"(
def poly(x: Real): Real = {
  require(x.in(0.0, 1.0))
  val y = x * x;
  if (y < 0.5) y + 1.0 else y - (0.5 - y) + 1.0
} ensuring (res => res +/- 1e-12)
)";

}  // namespace

TEST_CASE("c_expr keeps right operands of equal precedence parenthesised") {
  CHECK(c_expr(body_of("a - (b - c)"), kF64) == "a - (b - c)");
  CHECK(c_expr(body_of("(a - b) - c"), kF64) == "a - b - c");
  CHECK(c_expr(body_of("a / (b * c)"), kF64) == "a / (b * c)");
  CHECK(c_expr(body_of("(a + b) * c"), kF64) == "(a + b) * c");
  CHECK(c_expr(body_of("-(a + b)"), kF64) == "-(a + b)");
}

TEST_CASE("c_expr constants and sqrt per format") {
  CHECK(c_expr(body_of("0.1 * a"), kF64) == "0.1 * a");
  CHECK(c_expr(body_of("0.1 * a"), kF32) == "0.1f * a");
  CHECK(c_expr(body_of("2 * a"), kF32) == "2.0f * a");
  CHECK(c_expr(body_of("0.1 * a"), kDD) == "dd_real(\"0.1\") * a");
  CHECK(c_expr(body_of("sqrt(a)"), kF32) == "sqrtf(a)");
  CHECK(c_expr(body_of("sqrt(a)"), kF64) == "sqrt(a)");
}

TEST_CASE("outward rendering encloses the value") {
  Rational third = Rational(1) / 3;
  CHECK(parse_decimal(render_lower(third)) < third);
  CHECK(parse_decimal(render_upper(third)) > third);
  CHECK(parse_decimal(render_lower(-third)) < -third);
  CHECK(render_lower(Rational(1)) == render_upper(Rational(1)));
}

TEST_CASE("emitted code: lets, branches, verified preamble") {
  Program p = prog(kPoly);
  Verdict v = run(p, {kF64});
  REQUIRE(v.proven());
  EmittedUnit u = emit_code(p, v);
  CHECK(u.verified);
  CHECK(u.failure_report.empty());
  CHECK(u.text.find("float64 (double): verified") != std::string::npos);
  CHECK(u.text.find("const double y = x * x;") != std::string::npos);
  CHECK(u.text.find("if (y < 0.5) {") != std::string::npos);
  CHECK(u.text.find("return y - (0.5 - y) + 1.0;") != std::string::npos);
  CHECK(u.text.find("failure report") == std::string::npos);

  // the ensures line rounds the generated bound up
  const FunctionVerdict& fv = v.functions.at(0);
  REQUIRE(fv.spec.error);
  std::string line = "res +/- " + render_upper(*fv.spec.error);
  CHECK(u.text.find(line) != std::string::npos);
  CHECK(parse_decimal(render_upper(*fv.spec.error)) >= *fv.spec.error);
}

TEST_CASE("code and report are deterministic") {
  Program p = prog(kPoly);
  Verdict a = run(p, {kF32, kF64});
  Verdict b = run(p, {kF32, kF64});
  CHECK(emit_code(p, a).text == emit_code(p, b).text);
  CHECK(emit_report(a) == emit_report(b));
}

TEST_CASE("failure report when no precision suffices") {
  Program p = prog(R"(
def tight(x: Real): Real = {
  require(x.in(1.0, 2.0))
  x * x * x
} ensuring (res => res +/- 1e-30)
)");
  Verdict v = run(p, {kF32, kF64});
  REQUIRE_FALSE(v.proven());
  EmittedUnit u = emit_code(p, v);
  CHECK_FALSE(u.verified);
  CHECK(u.text.find("NOT verified") != std::string::npos);
  CHECK(u.failure_report.find("reported at float64 after trying float32 float64") != std::string::npos);
  CHECK(u.failure_report.find("tight: best computed spec") != std::string::npos);
  CHECK(u.text.find("not proven at float32: computed") != std::string::npos);

  json r = json::parse(emit_report(v));
  CHECK(r["verified"] == false);
  CHECK(r["precision"].is_null());
  CHECK(r["reported_precision"] == "float64");
  REQUIRE(r["functions"].size() == 1);
  const json& f = r["functions"][0];
  CHECK(f["verdict"] != "proven");
  CHECK(f["attempts"].size() == 2);
  CHECK(f["vcs"][0]["kind"] == "postcondition");
}

TEST_CASE("report fields and baselines") {
  Program p = prog(kPoly);
  Verdict v = run(p, {kF64});
  ReportOptions opt;
  opt.baselines["poly"] = interval_baseline(p, *p.find("poly"), v.reported);
  json r = json::parse(emit_report(v, opt));
  CHECK(r["verified"] == true);
  CHECK(r["precision"] == "float64");
  const json& f = r["functions"][0];
  CHECK(f["verdict"] == "proven");
  CHECK(f.contains("split"));
  CHECK(f["split"].contains("roundoff"));
  CHECK_FALSE(f.contains("seconds"));
  REQUIRE(f["interval_range"].is_object());
  // tightened range sits inside the plain interval one
  CHECK(parse_decimal(f["interval_range"]["lo"].get<std::string>()) <=
        parse_decimal(f["range"]["lo"].get<std::string>()));
  CHECK(parse_decimal(f["range"]["hi"].get<std::string>()) <=
        parse_decimal(f["interval_range"]["hi"].get<std::string>()));

  opt.timings = true;
  CHECK(json::parse(emit_report(v, opt))["functions"][0].contains("seconds"));
}

TEST_CASE("program without postconditions") {
  CHECK_THROWS_AS(parse(""), SourceError);
  Program p = prog("def free(x: Real): Real = {\n require(x.in(1.0, 4.0))\n sqrt(x)\n}");
  Verdict v = run(p, {kF32, kF64});
  CHECK(v.proven());
  EmittedUnit u = emit_code(p, v);
  REQUIRE(u.functions.size() == 1);
  CHECK(u.text.find("float32 (float): verified") != std::string::npos);
  CHECK(u.text.find("return sqrtf(x);") != std::string::npos);
  CHECK(u.text.find("given") == std::string::npos);
  json r = json::parse(emit_report(v));
  CHECK(r["functions"][0]["vcs"].empty());
  CHECK(r["functions"][0]["error"].is_string());
}

TEST_CASE("extended formats name their library contract") {
  Program p = prog(kPoly);
  Verdict v = run(p, {kDD});
  EmittedUnit u = emit_code(p, v);
  CHECK(u.text.find("dd_real is provided by an extended-precision library") != std::string::npos);
  CHECK(u.text.find("dd_real(\"0.5\")") != std::string::npos);
}
