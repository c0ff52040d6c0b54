// End-to-end acceptance checks over the benchmark corpus. One PASS/FAIL line
// per criterion on stdout, details on stderr. Arguments: criterion numbers
// to run (default all). Exit status 1 if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "realc/codegen.hpp"
#include "realc/fpeval.hpp"
#include "realc/simulate.hpp"

using namespace realc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const PrecisionSpec kF32 = PrecisionSpec::of(PrecisionName::float32);
const PrecisionSpec kF64 = PrecisionSpec::of(PrecisionName::float64);
const PrecisionSpec kDD = PrecisionSpec::of(PrecisionName::doubledouble);

constexpr std::size_t kSamples = 100000;
constexpr std::uint64_t kSeed = 20240611;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string sci(const Rational& q) { return to_decimal(q, 4); }

struct Bench {
  std::string file;  // stem
  std::string text;
  Program program;
};

// Single-function table rows without input noise.
const std::set<std::string> kPlainRows = {"doppler1",   "doppler2",  "doppler3",  "rigidBody1", "rigidBody2",
                                          "jetEngine",  "turbine1",  "turbine2",  "turbine3",   "verhulst",
                                          "predatorPrey", "carbonGas", "sine",     "sqroot",     "sineOrder3"};
const std::set<std::string> kSingleRows = {"sine", "sqroot", "sineOrder3"};

std::vector<Bench> load_corpus() {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(REALC_BENCH_DIR))
    if (e.path().extension() == ".real") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Bench> out;
  for (const auto& f : files) {
    std::string text = slurp(f);
    out.push_back({f.stem().string(), text, order_functions(parse(text))});
  }
  return out;
}

struct Key {
  std::string file, fn;
  auto operator<=>(const Key&) const = default;
};

// Analyses are shared between criteria; one range cache per function serves
// all its precisions.
class Analyses {
 public:
  explicit Analyses(const std::vector<Bench>& corpus) : corpus_(corpus) {}

  const Bench& bench(const std::string& file) const {
    for (const auto& b : corpus_)
      if (b.file == file) return b;
    throw std::runtime_error("no benchmark file " + file);
  }

  const GeneratedSpec& spec(const Key& k, const PrecisionSpec& prec) {
    auto key = std::make_pair(k, prec.str());
    auto it = specs_.find(key);
    if (it != specs_.end()) return it->second;
    const Bench& b = bench(k.file);
    ErrorConfig& ec = configs_[k];
    if (!ec.cache) ec.cache = make_range_cache();
    auto t = Clock::now();
    GeneratedSpec g = generate_spec(b.program, *b.program.find(k.fn), prec, ec);
    std::cerr << "  analysed " << k.fn << " at " << prec.str() << " in " << std::lround(seconds_since(t)) << " s\n";
    return specs_.emplace(key, std::move(g)).first->second;
  }

  const SimResult& sim(const Key& k, const PrecisionSpec& prec) {
    auto key = std::make_pair(k, prec.str());
    auto it = sims_.find(key);
    if (it != sims_.end()) return it->second;
    const Bench& b = bench(k.file);
    SimConfig cfg;
    cfg.samples = kSamples;
    cfg.seed = kSeed;
    cfg.precision = prec;
    return sims_.emplace(key, simulate(b.program, *b.program.find(k.fn), cfg)).first->second;
  }

  std::vector<Key> all() const {
    std::vector<Key> out;
    for (const auto& b : corpus_)
      for (const auto& f : b.program.functions) out.push_back({b.file, f.name});
    return out;
  }

  std::optional<Key> row(const std::string& fn) const {
    for (const auto& k : all())
      if (k.fn == fn && corpus_single(k.file)) return k;
    return std::nullopt;
  }

 private:
  bool corpus_single(const std::string& file) const { return bench(file).program.functions.size() == 1; }

  const std::vector<Bench>& corpus_;
  std::map<Key, ErrorConfig> configs_;
  std::map<std::pair<Key, std::string>, GeneratedSpec> specs_;
  std::map<std::pair<Key, std::string>, SimResult> sims_;
};

struct Outcome {
  bool pass = true;
  std::string summary;
  void fail(const std::string& why) {
    if (pass) summary.clear();
    pass = false;
    std::cerr << "  FAIL: " << why << "\n";
    summary += (summary.empty() ? "" : "; ") + why;
  }
};

bool within(const Interval& inner, const Interval& outer) {
  return outer.lo() <= inner.lo() && inner.hi() <= outer.hi();
}

std::string str(const Interval& r) { return "[" + sci(r.lo()) + ", " + sci(r.hi()) + "]"; }

// 1. simulated ranges and errors stay inside the analysed ones
Outcome soundness(Analyses& a) {
  Outcome o;
  auto t = Clock::now();
  std::size_t checked = 0;
  for (const Key& k : a.all()) {
    std::vector<PrecisionSpec> precs = {kF64};
    if (kSingleRows.count(k.fn)) precs.push_back(kF32);
    for (const auto& prec : precs) {
      const GeneratedSpec& g = a.spec(k, prec);
      const SimResult& s = a.sim(k, prec);
      std::string at = k.file + "/" + k.fn + " " + prec.str();
      ++checked;
      if (!g.complete()) {
        o.fail(at + ": no analysed bound");
        continue;
      }
      std::cerr << "  " << at << ": range " << str(*s.observed) << " in " << str(*g.range) << ", error "
                << sci(s.max_error) << " <= " << sci(*g.error) << "\n";
      if (s.faults) o.fail(at + ": " + std::to_string(s.faults) + " faulting samples");
      if (!s.observed || !within(*s.observed, *g.range)) o.fail(at + ": observed range outside analysed range");
      if (s.max_error > *g.error) o.fail(at + ": simulated error " + sci(s.max_error) + " > " + sci(*g.error));
    }
  }
  double secs = seconds_since(t);
  if (secs > 900) o.fail("took " + std::to_string(std::lround(secs)) + " s, budget 900 s");
  if (o.pass) {
    o.summary = std::to_string(checked) + " function/precision pairs, N = " + std::to_string(kSamples) + ", " +
                std::to_string(std::lround(secs)) + " s";
  }
  return o;
}

std::optional<std::pair<std::string, std::string>> reference_ia(const std::string& text) {
  static const std::regex re(R"(IA \[([^,\]]+), ([^\]]+)\])");
  std::smatch m;
  auto line_start = text.find("Reference values:");
  if (line_start == std::string::npos) return std::nullopt;
  std::string line = text.substr(line_start, text.find('\n', line_start) - line_start);
  if (!std::regex_search(line, m, re)) return std::nullopt;
  return std::make_pair(m[1].str(), m[2].str());
}

bool four_figures(const Rational& got, const std::string& ref) {
  double r = std::stod(ref);
  double tol = 0.5 * std::pow(10.0, std::floor(std::log10(std::fabs(r))) - 3);
  return std::fabs(to_double(got) - r) <= tol;
}

// 2. plain interval arithmetic reproduces the IA column
Outcome interval_column(Analyses& a, const std::vector<Bench>& corpus) {
  Outcome o;
  int rows = 0;
  for (const auto& b : corpus) {
    auto ref = reference_ia(b.text);
    if (!ref || b.program.functions.size() != 1) continue;
    const FunctionDef& f = b.program.functions[0];
    ++rows;
    Baseline base = interval_baseline(b.program, f, kF64);
    bool unbounded = ref->first == "-inf" || ref->second == "inf";
    if (unbounded) {
      std::cerr << "  " << f.name << ": IA " << (base.range ? str(*base.range) : "unbounded") << ", expected unbounded\n";
      if (base.range) o.fail(f.name + ": IA finite, expected unbounded");
      continue;
    }
    if (!base.range) {
      o.fail(f.name + ": IA unbounded");
      continue;
    }
    std::cerr << "  " << f.name << ": IA " << to_decimal(base.range->lo(), 6) << ", " << to_decimal(base.range->hi(), 6)
              << " against " << ref->first << ", " << ref->second << "\n";
    if (!four_figures(base.range->lo(), ref->first) || !four_figures(base.range->hi(), ref->second))
      o.fail(f.name + ": IA " + str(*base.range) + " differs from [" + ref->first + ", " + ref->second + "]");
  }
  (void)a;
  if (o.pass) o.summary = std::to_string(rows) + " rows agree to 4 significant figures";
  return o;
}

// 3. IA ⊇ tightened ⊇ simulated; jetEngine only has the tightened one
Outcome tightening(Analyses& a) {
  Outcome o;
  int n = 0;
  for (const Key& k : a.all()) {
    const Bench& b = a.bench(k.file);
    const FunctionDef& f = *b.program.find(k.fn);
    const GeneratedSpec& g = a.spec(k, kF64);
    const SimResult& s = a.sim(k, kF64);
    std::string at = k.file + "/" + k.fn;
    if (!g.range) {
      o.fail(at + ": no tightened range");
      continue;
    }
    ++n;
    Baseline base = interval_baseline(b.program, f, kF64);
    if (base.range && !within(*g.range, round_outward(*base.range, 53)))
      o.fail(at + ": tightened " + str(*g.range) + " not inside IA " + str(*base.range));
    if (!s.observed || !within(*s.observed, *g.range)) o.fail(at + ": simulated range escapes the tightened one");
    if (k.fn == "jetEngine") {
      std::cerr << "  jetEngine: IA " << (base.range ? str(*base.range) : "unbounded") << ", tightened "
                << str(*g.range) << "\n";
      if (base.range) o.fail("jetEngine: IA should be unbounded");
    }
  }
  if (o.pass) o.summary = std::to_string(n) + " functions ordered; jetEngine IA unbounded, tightened finite";
  return o;
}

// 4. analysed error within [simulated, 100 x simulated] on plain double rows
Outcome error_envelope(Analyses& a) {
  Outcome o;
  std::string worst;
  double worst_ratio = 0;
  for (const auto& fn : kPlainRows) {
    auto k = a.row(fn);
    if (!k) {
      o.fail(fn + ": not in the corpus");
      continue;
    }
    const GeneratedSpec& g = a.spec(*k, kF64);
    const SimResult& s = a.sim(*k, kF64);
    if (!g.error) {
      o.fail(fn + ": no error bound");
      continue;
    }
    double ratio = sgn(s.max_error) > 0 ? to_double(*g.error / s.max_error) : INFINITY;
    std::cerr << "  " << fn << ": analysed " << sci(*g.error) << ", simulated " << sci(s.max_error) << ", ratio "
              << ratio << "\n";
    if (ratio > worst_ratio) worst_ratio = ratio, worst = fn;
    if (*g.error < s.max_error) o.fail(fn + ": analysed below simulated");
    if (ratio > 100) o.fail(fn + ": analysed " + sci(*g.error) + " is " + std::to_string(std::lround(ratio)) + "x simulated");
  }
  if (o.pass) {
    std::ostringstream ss;
    ss << kPlainRows.size() << " rows, largest ratio " << std::lround(worst_ratio) << "x (" << worst << ")";
    o.summary = ss.str();
  }
  return o;
}

Program only(const Program& p, const std::set<std::string>& names) {
  Program out;
  for (const auto& f : p.functions)
    if (names.count(f.name)) out.functions.push_back(f);
  return out;
}

Verdict verify_at(const Program& p, const PrecisionSpec& prec) {
  PipelineConfig cfg;
  cfg.precisions = {prec};
  return verify_program(p, cfg);
}

// 5. triangle: sorted formula verifies at double only, naive one does not
Outcome triangle(Analyses& a) {
  Outcome o;
  const Program& p = a.bench("triangle").program;
  Verdict v64 = verify_at(p, kF64);
  const FunctionVerdict* sorted = v64.find("triangleSorted");
  const FunctionVerdict* naive = v64.find("triangle");
  if (!sorted || !naive) {
    o.fail("triangle.real must define triangle and triangleSorted");
    return o;
  }
  std::cerr << "  float64: triangleSorted " << (sorted->proven() ? "proven" : "not proven") << ", error "
            << (sorted->spec.error ? sci(*sorted->spec.error) : "none") << "; triangle "
            << (naive->proven() ? "proven" : "not proven") << ", error "
            << (naive->spec.error ? sci(*naive->spec.error) : "none") << "\n";
  if (!sorted->proven()) o.fail("triangleSorted not proven at float64");
  if (naive->proven()) o.fail("naive triangle proven at float64");
  if (!naive->spec.error || *naive->spec.error <= parse_decimal("1e-11"))
    o.fail("naive triangle error not above 1e-11");
  if (sorted->spec.error) {
    Rational ref = parse_decimal("8.58e-12");
    if (*sorted->spec.error > 10 * ref || *sorted->spec.error * 10 < ref)
      o.fail("triangleSorted error " + sci(*sorted->spec.error) + " not within 10x of 8.58e-12");
  } else {
    o.fail("triangleSorted has no error bound");
  }
  Verdict v32 = verify_at(only(p, {"triangleSorted"}), kF32);
  const FunctionVerdict* s32 = v32.find("triangleSorted");
  std::cerr << "  float32: triangleSorted " << (s32->proven() ? "proven" : "not proven") << ", error "
            << (s32->spec.error ? sci(*s32->spec.error) : "none") << "\n";
  if (s32->proven()) o.fail("triangleSorted proven at float32");
  if (o.pass) {
    o.summary = "sorted " + sci(*sorted->spec.error) + " proven at float64, not at float32; naive " +
                sci(*naive->spec.error) + " > 1e-11";
  }
  return o;
}

std::string flat_triangle(const std::string& sep) {
  return "def triangleFlat(a: Real, b: Real, c: Real): Real = {\n"
         "  require(a.in(1.0, 9.0) && b.in(1.0, 9.0) && c.in(1.0, 9.0) && a + b > c + " + sep +
         " && a + c > b + " + sep + " && b + c > a + " + sep + ")\n"
         "  val s = (a + b + c) / 2.0;\n"
         "  sqrt(s * (s - a) * (s - b) * (s - c))\n"
         "}\n";
}

// 6. flatter triangles, larger errors, and a failure at 1e-10
Outcome flat_triangles() {
  Outcome o;
  std::optional<Rational> last;
  for (int k = 1; k <= 9; ++k) {
    std::string sep = k == 1 ? "0.1" : "1e-" + std::to_string(k);
    Program p = order_functions(parse(flat_triangle(sep)));
    GeneratedSpec g = generate_spec(p, p.functions[0], kF64);
    std::cerr << "  " << sep << ": range " << (g.range ? str(*g.range) : "none") << ", error "
              << (g.error ? sci(*g.error) : "none") << "\n";
    if (!g.error) {
      o.fail(sep + ": no error bound");
      return o;
    }
    if (last && !(*g.error > *last)) o.fail(sep + ": error did not increase");
    last = g.error;
  }
  Program p = order_functions(parse(flat_triangle("1e-10")));
  GeneratedSpec g = generate_spec(p, p.functions[0], kF64);
  bool neg = std::any_of(g.issues.begin(), g.issues.end(),
                         [](const AnalysisIssue& i) { return i.kind == IssueKind::negative_sqrt; });
  std::cerr << "  1e-10: " << (neg ? "negative-sqrt reported" : "no negative-sqrt issue") << ", error "
            << (g.error ? sci(*g.error) : "none") << "\n";
  if (!neg) o.fail("1e-10: no negative-sqrt issue");
  if (g.error) o.fail("1e-10: still produced an error bound");
  if (o.pass) o.summary = "errors increase over 0.1 .. 1e-9 up to " + sci(*last) + "; 1e-10 reports negative-sqrt";
  return o;
}

struct Sample {
  std::map<std::string, Rational> ideal;
  std::map<std::string, double> actual;
};

// Ideal and actual inputs drawn near one of the guards, so that the two
// executions often take different branches.
class NearGuard {
 public:
  NearGuard(const FunctionDef& f, const Program& p) : f_(f) {
    body_ = inline_lets(inline_calls(f.body, p));
    collect(body_);
    for (const auto& x : f.params) boxes_[x] = *f.range_of(x);
    auto extra = f.pre_constraints();
    if (!extra.empty()) pre_ = fm::conj(std::move(extra));
  }

  const ExprPtr& body() const { return body_; }
  bool has_guards() const { return !guards_.empty(); }

  std::optional<Sample> draw(std::mt19937_64& rng) {
    const ExprPtr& g = guards_[rng() % guards_.size()];
    ExprPtr value = ex::sub(g->args[0], g->args[1]);
    std::set<std::string> names = free_vars(value);
    std::vector<std::string> vars(names.begin(), names.end());
    if (vars.empty()) return std::nullopt;
    const std::string v = vars[rng() % vars.size()];
    Sample s;
    for (const auto& x : f_.params) s.ideal[x] = uniform(rng, boxes_.at(x));
    // bisection for a sign change of the guard along v; the box ends first,
    // then random points, since a guard can vanish on the box boundary
    const Interval& bv = boxes_.at(v);
    Rational lo, hi;
    auto sign_at = [&](const Rational& t) -> std::optional<int> {
      s.ideal[v] = t;
      try {
        Interval r = eval_exact_point(value, s.ideal);
        if (sgn(r.lo()) > 0) return 1;
        if (sgn(r.hi()) < 0) return -1;
        return 0;
      } catch (const RangeFault&) {
        return std::nullopt;
      }
    };
    std::optional<int> slo, shi;
    const Rational r1 = uniform(rng, bv), r2 = uniform(rng, bv);
    const std::pair<Rational, Rational> brackets[] = {{bv.lo(), bv.hi()}, {r1, bv.hi()}, {bv.lo(), r1}, {r1, r2}};
    bool found = false;
    for (const auto& [l, h] : brackets) {
      lo = l, hi = h;
      slo = sign_at(lo), shi = sign_at(hi);
      if (slo && shi && *slo * *shi < 0) {
        found = true;
        break;
      }
    }
    if (!found) return std::nullopt;
    for (int i = 0; i < 90; ++i) {
      Rational mid = round_dyadic((lo + hi) / 2, 120, Rounding::nearest);
      auto sm = sign_at(mid);
      if (!sm) return std::nullopt;
      if (*sm == 0) break;
      (*sm == *slo ? lo : hi) = mid;
    }
    Rational root = (lo + hi) / 2;
    const SpecClause* u = f_.uncertainty_of(v);
    Rational noise = u ? (u->kind == ClauseKind::abs_uncertainty ? u->magnitude->value
                                                                  : u->magnitude->value * abs(root))
                       : Rational(0);
    Rational w = 4 * (noise + abs(root) * pow2(-52) + pow2(-1074));
    s.ideal[v] = root + w * symmetric(rng);
    for (const auto& x : f_.params) {
      const Interval& b = boxes_.at(x);
      if (!(b.lo() < s.ideal[x] && s.ideal[x] < b.hi())) return std::nullopt;
    }
    if (pre_ && evaluate_at(pre_, s.ideal) != std::optional<bool>(true)) return std::nullopt;
    for (const auto& x : f_.params) {
      Rational a = s.ideal[x];
      if (const SpecClause* ux = f_.uncertainty_of(x)) {
        Rational k = ux->kind == ClauseKind::abs_uncertainty ? ux->magnitude->value
                                                             : ux->magnitude->value * abs(a);
        a += k * symmetric(rng);
      }
      s.actual[x] = to_double(a);
    }
    return s;
  }

  // Some guard is decided differently by the ideal and the actual run.
  bool diverges(const Sample& s) const {
    for (const auto& g : guards_) {
      Interval l, r;
      try {
        l = eval_exact_point(g->args[0], s.ideal);
        r = eval_exact_point(g->args[1], s.ideal);
      } catch (const RangeFault&) {
        continue;
      }
      Interval d = l - r;
      if (sgn(d.lo()) <= 0 && sgn(d.hi()) >= 0) continue;  // undecided
      bool ideal = holds(g->cmp, sgn(d.lo()) > 0 ? 1 : -1);
      double dl = eval_double(g->args[0], s.actual), dr = eval_double(g->args[1], s.actual);
      bool actual = holds(g->cmp, dl > dr ? 1 : dl < dr ? -1 : 0);
      if (ideal != actual) return true;
    }
    return false;
  }

 private:
  static bool holds(CmpOp op, int sign) {
    switch (op) {
      case CmpOp::lt: return sign < 0;
      case CmpOp::le: return sign <= 0;
      case CmpOp::gt: return sign > 0;
      case CmpOp::ge: return sign >= 0;
    }
    return false;
  }
  static Rational uniform(std::mt19937_64& rng, const Interval& r) {
    Rational t = Rational(static_cast<unsigned long>(rng() >> 11)) * pow2(-53);
    return r.lo() + r.width() * t;
  }
  static Rational symmetric(std::mt19937_64& rng) {
    return Rational(static_cast<unsigned long>(rng() >> 11)) * pow2(-52) - 1;
  }
  void collect(const ExprPtr& e) {
    if (e->kind == ExprKind::ite) guards_.push_back(e);
    for (const auto& a : e->args) collect(a);
  }

  const FunctionDef& f_;
  ExprPtr body_;
  std::vector<ExprPtr> guards_;
  std::map<std::string, Interval> boxes_;
  FormulaPtr pre_;
};

// 7. path error: jump height, identical branches, divergence fuzz
Outcome path_properties(Analyses& a) {
  Outcome o;
  Program step = order_functions(parse(
      "def step(x: Real): Real = {\n  require(x.in(0.0, 1.0))\n  if (x < 0.5) 1.0 else 3.5\n}\n"
      "def same(x: Real): Real = {\n  require(x.in(-2.0, 2.0))\n  if (x * x < 0.3) x * x * x + x else x * x * x + x\n}\n"
      "def plain(x: Real): Real = {\n  require(x.in(-2.0, 2.0))\n  x * x * x + x\n}\n"));
  GeneratedSpec gs = generate_spec(step, *step.find("step"), kF64);
  std::cerr << "  step: path error " << to_decimal(gs.path_error, 10) << ", jump 2.5\n";
  if (abs(gs.path_error - Rational(5, 2)) > parse_decimal("1e-6"))
    o.fail("step path error " + sci(gs.path_error) + " is not the jump 2.5");
  GeneratedSpec same = generate_spec(step, *step.find("same"), kF64);
  GeneratedSpec plain = generate_spec(step, *step.find("plain"), kF64);
  std::cerr << "  identical branches: path error " << sci(same.path_error) << ", branch error "
            << sci(*plain.error) << "\n";
  if (!plain.error || same.path_error > *plain.error) o.fail("identical branches: path error above branch error");

  // divergence fuzz
  struct Target {
    const Program* p;
    std::string fn;
    std::optional<Rational> bound;
  };
  std::vector<Target> targets = {{&step, "step", gs.error}};
  for (const auto& [file, fn] : std::vector<std::pair<std::string, std::string>>{
           {"cav10", "cav10"}, {"square_root3", "squareRoot3"}, {"square_root3_wide", "squareRoot3Wide"},
           {"smart_root", "smartRoot"}, {"triangle", "triangleSorted"}}) {
    targets.push_back({&a.bench(file).program, fn, a.spec({file, fn}, kF64).error});
  }
  std::size_t total = 0;
  for (const auto& t : targets) {
    const FunctionDef& f = *t.p->find(t.fn);
    if (!t.bound) {
      o.fail(t.fn + ": no error bound to fuzz against");
      continue;
    }
    NearGuard ng(f, *t.p);
    std::mt19937_64 rng(kSeed);
    std::size_t divergent = 0, draws = 0;
    Rational worst{0};
    while (divergent < 2000 && draws < 400000) {
      ++draws;
      auto s = ng.draw(rng);
      if (!s || !ng.diverges(*s)) continue;
      ++divergent;
      Interval exact = eval_exact_point(ng.body(), s->ideal);
      Rational got = from_double(eval_double(ng.body(), s->actual));
      worst = max(worst, max(abs(got - exact.lo()), abs(got - exact.hi())));
    }
    total += divergent;
    std::cerr << "  " << t.fn << ": " << divergent << " divergent of " << draws << " draws, worst " << sci(worst)
              << " <= " << sci(*t.bound) << "\n";
    if (divergent < 100) o.fail(t.fn + ": only " + std::to_string(divergent) + " divergent samples");
    if (worst > *t.bound) o.fail(t.fn + ": divergent error " + sci(worst) + " > bound " + sci(*t.bound));
  }
  if (o.pass) {
    o.summary = "step " + to_decimal(gs.path_error, 8) + ", identical branches within branch error, " +
                std::to_string(total) + " divergent samples within bounds";
  }
  return o;
}

// 8. the step that closed each goal, as reported
Outcome pipeline_steps(Analyses& a) {
  Outcome o;
  struct Want {
    std::string file, fn, needle;
  };
  std::vector<Want> wants = {{"bspline", "bspline3", "uninterpreted/exact/merged"},
                             {"heron_noisy", "heronNoisy", "error-approx"},
                             {"sine_approximations", "comparison", "body-inline"}};
  std::vector<std::string> seen;
  for (const auto& w : wants) {
    Program p = a.bench(w.file).program;
    Verdict v = verify_at(p, kF64);
    nlohmann::json r = nlohmann::json::parse(emit_report(v));
    std::string used = "none";
    bool proven = false;
    for (const auto& f : r["functions"]) {
      if (f["name"] != w.fn) continue;
      proven = f["verdict"] == "proven";
      for (const auto& vc : f["vcs"])
        if (vc["kind"] == "postcondition" && vc["approximation_used"].is_string())
          used = vc["approximation_used"].get<std::string>();
    }
    std::cerr << "  " << w.fn << ": " << (proven ? "proven" : "not proven") << ", approximation used " << used
              << "\n";
    seen.push_back(w.fn + " " + used);
    if (!proven) o.fail(w.fn + " not proven");
    if (used.find(w.needle) == std::string::npos) o.fail(w.fn + " used " + used + ", expected " + w.needle);
    if (w.needle == "uninterpreted/exact/merged" && used != w.needle) o.fail(w.fn + " needed more than the full constraint");
  }
  if (o.pass) o.summary = seen[0] + "; " + seen[1] + "; " + seen[2];
  return o;
}

// 9. float32 > float64 > double-double on every bound; one VC template
Outcome monotonicity(Analyses& a, const std::vector<Bench>& corpus) {
  Outcome o;
  std::size_t n = 0;
  for (const Key& k : a.all()) {
    const GeneratedSpec& e32 = a.spec(k, kF32);
    const GeneratedSpec& e64 = a.spec(k, kF64);
    const GeneratedSpec& edd = a.spec(k, kDD);
    std::string at = k.file + "/" + k.fn;
    auto show = [](const GeneratedSpec& g) { return g.error ? sci(*g.error) : std::string("none"); };
    std::cerr << "  " << at << ": " << show(e32) << " > " << show(e64) << " > " << show(edd) << "\n";
    if (!e32.error || !e64.error || !edd.error) {
      o.fail(at + ": missing bound");
      continue;
    }
    ++n;
    if (!(*e32.error > *e64.error && *e64.error > *edd.error)) o.fail(at + ": bounds not strictly decreasing");
  }
  std::size_t vcs = 0;
  for (const auto& b : corpus) {
    auto v32 = generate_vcs(b.program, kF32), v64 = generate_vcs(b.program, kF64), vdd = generate_vcs(b.program, kDD);
    if (v32.size() != v64.size() || v64.size() != vdd.size()) {
      o.fail(b.file + ": VC count depends on the precision");
      continue;
    }
    for (std::size_t i = 0; i < v64.size(); ++i) {
      ++vcs;
      if (!same_template(v32[i].constraint, v64[i].constraint) || !same_template(v64[i].constraint, vdd[i].constraint))
        o.fail(v64[i].label() + ": VCs differ beyond the roundoff bounds");
      if (v32[i].constraint.vars.size() != v64[i].constraint.vars.size()) continue;
      bool eps_differs = false;
      for (std::size_t j = 0; j < v64[i].constraint.vars.size(); ++j) {
        const VarDecl& x = v32[i].constraint.vars[j];
        const VarDecl& y = v64[i].constraint.vars[j];
        if (is_roundoff_var(x.name) && x.bounds && y.bounds && x.bounds->hi() != y.bounds->hi()) eps_differs = true;
      }
      bool has_roundoff = std::any_of(v64[i].constraint.vars.begin(), v64[i].constraint.vars.end(),
                                      [](const VarDecl& x) { return is_roundoff_var(x.name); });
      if (has_roundoff && !eps_differs) o.fail(v64[i].label() + ": roundoff bounds do not change with the precision");
    }
  }
  if (o.pass) o.summary = std::to_string(n) + " functions strictly decreasing; " + std::to_string(vcs) +
                          " VCs share one template across precisions";
  return o;
}

struct Run {
  int status = -1;
  std::string out;
};

Run shell(const std::string& cmd) {
  Run r;
  FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  for (std::size_t k; (k = std::fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, k);
  int st = ::pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

// 10. identical runs, identical bytes
Outcome determinism() {
  Outcome o;
  fs::path root = fs::temp_directory_path() / ("realc-accept-" + std::to_string(::getpid()));
  std::vector<std::string> files = {"sine_approximations", "smart_root", "doppler1_noisy"};
  std::size_t compared = 0;
  for (const auto& f : files) {
    std::string src = std::string(REALC_BENCH_DIR) + "/" + f + ".real";
    for (const char* run : {"a", "b"}) {
      shell(std::string(REALC_BINARY) + " compile " + src + " --out-dir " + (root / run).string());
    }
  }
  for (const auto& e : fs::directory_iterator(root / "a")) {
    fs::path other = root / "b" / e.path().filename();
    ++compared;
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) o.fail(e.path().filename().string() + " differs");
  }
  if (compared < 2 * files.size()) o.fail("expected code and report for every file");
  std::string sim = std::string(REALC_BINARY) + " simulate " + REALC_BENCH_DIR + "/smart_root.real --fnc smartRoot -n 20000 --seed 9";
  Run s1 = shell(sim), s2 = shell(sim);
  ++compared;
  if (s1.status != 0 || s1.out != s2.out) o.fail("simulation output differs between runs");
  fs::remove_all(root);
  if (o.pass) o.summary = std::to_string(compared) + " outputs byte-identical across two runs";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int k) { return wanted.empty() || wanted.count(k); };

  std::vector<Bench> corpus = load_corpus();
  Analyses a(corpus);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"soundness against simulation", [&] { return soundness(a); }},
      {"interval arithmetic column", [&] { return interval_column(a, corpus); }},
      {"range tightening order", [&] { return tightening(a); }},
      {"error envelope", [&] { return error_envelope(a); }},
      {"triangle scenario", [&] { return triangle(a); }},
      {"flat triangles", [&] { return flat_triangles(); }},
      {"path errors", [&] { return path_properties(a); }},
      {"approximation steps", [&] { return pipeline_steps(a); }},
      {"precision monotonicity", [&] { return monotonicity(a, corpus); }},
      {"determinism", [&] { return determinism(); }},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    int k = static_cast<int>(i) + 1;
    if (!want(k)) continue;
    std::cerr << "criterion " << k << ": " << criteria[i].first << "\n";
    auto t = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << k << " " << criteria[i].first << ": " << o.summary << " ("
              << std::lround(seconds_since(t)) << " s)" << std::endl;
  }
  return all ? 0 : 1;
}
