// realc command line: compile, simulate, range.
// Exit status: 0 ok, 1 verification failure, 2 input or usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "realc/codegen.hpp"
#include "realc/simulate.hpp"

using namespace realc;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0, kFailed = 1, kInput = 2;
constexpr const char* kSolverEnv = "REALC_SOLVER";

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Program load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return order_functions(parse(ss.str()));
  } catch (const SourceError& e) {
    throw InputError(path + ":" + std::to_string(e.line) + ":" + std::to_string(e.col) + ": " + e.what());
  }
}

const FunctionDef& function(const Program& p, const std::string& name) {
  const FunctionDef* f = p.find(name);
  if (!f) throw InputError("no function named '" + name + "'");
  return *f;
}

// Shared solver and range options.
struct EngineOptions {
  double timeout = 1.0;
  std::string range_precision = "1e-10";
  int max_iter = 50;
  std::string solver;

  void add(CLI::App* cmd) {
    cmd->add_option("--timeout", timeout, "solver timeout per query, seconds")->check(CLI::PositiveNumber);
    cmd->add_option("--range-precision", range_precision, "stop range search within this gap");
    cmd->add_option("--max-iter", max_iter, "range search iterations per bound")->check(CLI::PositiveNumber);
    cmd->add_option("--solver", solver,
                    std::string("builtin or external:<command>; default $") + kSolverEnv + " or builtin");
  }

  BackendConfig backend() const {
    BackendConfig b;
    b.timeout_seconds = timeout;
    std::string choice = solver;
    if (choice.empty()) {
      const char* env = std::getenv(kSolverEnv);
      if (env && *env) choice = std::string("external:") + env;
    }
    if (choice.empty() || choice == "builtin") return b;
    if (choice.rfind("external:", 0) != 0 || choice.size() == 9)
      throw InputError("--solver must be builtin or external:<command>");
    b.backend = BackendConfig::Backend::external;
    b.external_command = choice.substr(9);
    return b;
  }

  RangeConfig range() const {
    RangeConfig r;
    try {
      r.precision = parse_decimal(range_precision);
    } catch (const std::exception&) {
      throw InputError("bad --range-precision '" + range_precision + "'");
    }
    if (sgn(r.precision) <= 0) throw InputError("--range-precision must be positive");
    r.max_iterations = max_iter;
    r.solver = backend();
    return r;
  }
};

PrecisionSpec precision_of(const std::string& text) {
  try {
    return PrecisionSpec::parse(text);
  } catch (const std::invalid_argument&) {
    throw InputError("unknown precision '" + text + "' (float32, float64, dd, qd)");
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string outward(const Interval& r) { return "[" + render_lower(r.lo()) + ", " + render_upper(r.hi()) + "]"; }
std::string outward(const std::optional<Interval>& r) { return r ? outward(*r) : "none"; }

struct CompileOptions {
  std::string file;
  std::string precision;
  std::string paths = "merged";
  std::string out_dir = ".";
  bool timings = false;
  EngineOptions engine;
};

int compile(const CompileOptions& o) {
  Program p = load(o.file);
  PipelineConfig cfg;
  if (!o.precision.empty()) cfg.precisions = {precision_of(o.precision)};
  cfg.vc.solver = o.engine.backend();
  cfg.vc.error.range = o.engine.range();
  cfg.vc.error.paths = o.paths == "explicit" ? PathMode::explicit_paths : PathMode::merged;

  Verdict v = verify_program(p, cfg);
  EmittedUnit unit = emit_code(p, v);
  ReportOptions ro;
  ro.timings = o.timings;
  for (const auto& f : p.functions) ro.baselines[f.name] = interval_baseline(p, f, v.reported);

  fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::string stem = fs::path(o.file).stem().string();
  fs::path code = dir / (stem + "." + v.reported.str() + ".c-like");
  fs::path report = dir / (stem + ".report.json");
  write_file(code, unit.text);
  write_file(report, emit_report(v, ro));

  for (const auto& fv : v.functions) {
    std::cout << fv.name << ": " << (fv.proven() ? "proven" : fv.refuted() ? "disproven" : "unknown");
    if (fv.spec.error) std::cout << ", error <= " << render_upper(*fv.spec.error);
    std::cout << "\n";
  }
  for (const auto& [fn, issue] : unit.warnings)
    std::cerr << "warning: " << fn << ": " << to_string(issue.kind) << " at " << issue.location << "\n";
  std::cout << (v.proven() ? "verified at " + v.precision->str() : "not verified") << "; wrote " << code.string()
            << " and " << report.string() << "\n";
  if (!v.proven()) std::cerr << unit.failure_report;
  return v.proven() ? kOk : kFailed;
}

struct SimulateOptions {
  std::string file, fnc;
  std::size_t n = 100000;
  std::uint64_t seed = 1;
  std::string precision = "float64";
};

int simulate_cmd(const SimulateOptions& o) {
  Program p = load(o.file);
  SimConfig cfg;
  cfg.samples = o.n;
  cfg.seed = o.seed;
  cfg.precision = precision_of(o.precision);
  SimResult r;
  try {
    r = simulate(p, function(p, o.fnc), cfg);
  } catch (const SamplingError& e) {
    throw InputError(e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  std::cout << "function  " << r.function << "\n"
            << "precision " << r.precision.str() << "\n"
            << "samples   " << r.samples << " of " << r.drawn << " drawn\n"
            << "observed  " << outward(r.observed) << "\n"
            << "computed  " << outward(r.computed) << "\n"
            << "max error " << render_upper(r.max_error) << "\n";
  if (!r.worst.empty()) {
    std::cout << "worst at ";
    bool first = true;
    for (const auto& [k, v] : r.worst) std::cout << (first ? "" : ", ") << k << " = " << to_decimal(v, 17), first = false;
    std::cout << "\n";
  }
  if (r.faults) std::cout << "faults    " << r.faults << "\n";
  return kOk;
}

struct RangeOptions {
  std::string file, fnc;
  EngineOptions engine;
};

int range_cmd(const RangeOptions& o) {
  Program p = load(o.file);
  const FunctionDef& f = function(p, o.fnc);
  ExprPtr body = inline_calls(f.body, p);
  Constraint pre = ideal_precondition(f);
  std::cout << "interval  ";
  try {
    std::cout << outward(eval_interval(body, box_of(pre))) << "\n";
  } catch (const RangeFault& e) {
    std::cout << "unbounded (" << e.what() << ")\n";
  }
  RangeResult r = get_range(pre, body, o.engine.range());
  std::cout << "tightened " << outward(r.range) << "\n";
  for (const auto& i : r.issues) {
    std::cerr << "warning: " << to_string(i.kind) << " at " << to_source(i.at);
    if (i.operand) std::cerr << ", operand in " << outward(*i.operand);
    std::cerr << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"realc: verifying compiler from Real programs to finite-precision code"};
  app.require_subcommand(1);

  CompileOptions co;
  auto* compile_cmd = app.add_subcommand("compile", "verify, pick a precision, emit code and report");
  compile_cmd->add_option("file", co.file, "source .real file")->required();
  compile_cmd->add_option("--precision", co.precision, "pin one precision instead of trying all");
  compile_cmd->add_option("--paths", co.paths, "branch handling")->check(CLI::IsMember({"merged", "explicit"}));
  compile_cmd->add_option("--out-dir", co.out_dir, "where to write the code and the report");
  compile_cmd->add_flag("--timings", co.timings, "add per-function seconds to the report");
  co.engine.add(compile_cmd);

  SimulateOptions so;
  auto* sim_cmd = app.add_subcommand("simulate", "random inputs: exact vs hardware evaluation");
  sim_cmd->add_option("file", so.file)->required();
  sim_cmd->add_option("--fnc", so.fnc, "function to simulate")->required();
  sim_cmd->add_option("-n", so.n, "number of accepted samples");
  sim_cmd->add_option("--seed", so.seed);
  sim_cmd->add_option("--precision", so.precision, "float32 or float64");

  RangeOptions ro;
  auto* range_sub = app.add_subcommand("range", "interval and solver-tightened range of a function");
  range_sub->add_option("file", ro.file)->required();
  range_sub->add_option("--fnc", ro.fnc)->required();
  ro.engine.add(range_sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*compile_cmd) return compile(co);
    if (*sim_cmd) return simulate_cmd(so);
    return range_cmd(ro);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInput;
  }
}
