#include "realc/codegen.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

namespace realc {

namespace {

bool is_float(const PrecisionSpec& p) { return p.name == PrecisionName::float32; }
bool is_extended(const PrecisionSpec& p) {
  return p.name == PrecisionName::doubledouble || p.name == PrecisionName::quaddouble;
}

std::string literal_of(const Expr& e) {
  std::string s = e.literal;
  if (s.empty()) {
    auto exact = exact_decimal(e.value);
    s = exact ? *exact : to_decimal(e.value, 17);
  }
  if (!s.empty() && s[0] == '-') s = s.substr(1);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string constant(const Expr& e, const PrecisionSpec& prec) {
  std::string body = literal_of(e);
  if (is_extended(prec)) body = prec.c_type() + "(\"" + body + "\")";
  else if (is_float(prec)) body += "f";
  return sgn(e.value) < 0 ? "(-" + body + ")" : body;
}

int precedence(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::add:
    case ExprKind::sub: return 1;
    case ExprKind::mul:
    case ExprKind::div: return 2;
    case ExprKind::neg: return 3;
    default: return 4;
  }
}

std::string render(const ExprPtr& e, const PrecisionSpec& prec);

// Operands of the same precedence on the right keep their parentheses:
// a - (b - c) and a + (b + c) round differently from the flat forms.
std::string operand(const ExprPtr& child, int parent, bool right, const PrecisionSpec& prec) {
  std::string s = render(child, prec);
  int c = precedence(child);
  return c < parent || (right && c == parent) ? "(" + s + ")" : s;
}

std::string binary(const ExprPtr& e, const char* op, const PrecisionSpec& prec) {
  int p = precedence(e);
  return operand(e->args[0], p, false, prec) + " " + op + " " + operand(e->args[1], p, true, prec);
}

std::string render(const ExprPtr& e, const PrecisionSpec& prec) {
  switch (e->kind) {
    case ExprKind::constant: return constant(*e, prec);
    case ExprKind::variable: return e->name;
    case ExprKind::add: return binary(e, "+", prec);
    case ExprKind::sub: return binary(e, "-", prec);
    case ExprKind::mul: return binary(e, "*", prec);
    case ExprKind::div: return binary(e, "/", prec);
    case ExprKind::neg: return "-" + operand(e->args[0], 3, true, prec);
    case ExprKind::sqrt: return std::string(is_float(prec) ? "sqrtf" : "sqrt") + "(" + render(e->args[0], prec) + ")";
    case ExprKind::let: return render(inline_lets(e), prec);
    case ExprKind::ite:
      return "(" + render(e->args[0], prec) + " " + to_string(e->cmp) + " " + render(e->args[1], prec) + " ? " +
             render(e->args[2], prec) + " : " + render(e->args[3], prec) + ")";
    case ExprKind::call: {
      std::string s = e->name + "(";
      for (std::size_t i = 0; i < e->args.size(); ++i) s += (i ? ", " : "") + render(e->args[i], prec);
      return s + ")";
    }
    case ExprKind::actual:
    case ExprKind::initial_error: break;
  }
  throw std::invalid_argument("not a program expression: " + to_source(e));
}

void statements(const ExprPtr& e, const PrecisionSpec& prec, int indent, std::ostringstream& out) {
  std::string pad(indent, ' ');
  if (e->kind == ExprKind::let) {
    out << pad << "const " << prec.c_type() << " " << e->name << " = " << render(e->args[0], prec) << ";\n";
    statements(e->args[1], prec, indent, out);
  } else if (e->kind == ExprKind::ite) {
    out << pad << "if (" << render(e->args[0], prec) << " " << to_string(e->cmp) << " " << render(e->args[1], prec)
        << ") {\n";
    statements(e->args[2], prec, indent + 2, out);
    out << pad << "} else {\n";
    statements(e->args[3], prec, indent + 2, out);
    out << pad << "}\n";
  } else {
    out << pad << "return " << render(e, prec) << ";\n";
  }
}

}  // namespace

std::string c_expr(const ExprPtr& e, const PrecisionSpec& prec) { return render(e, prec); }

std::string render_lower(const Rational& q) { return to_decimal(q, 17, Rounding::down); }
std::string render_upper(const Rational& q) { return to_decimal(q, 17, Rounding::up); }

namespace {

std::string ensures_text(const GeneratedSpec& g) {
  std::vector<std::string> parts;
  if (g.range) {
    parts.push_back(render_lower(g.range->lo()) + " <= res");
    parts.push_back("res <= " + render_upper(g.range->hi()));
  }
  if (g.error) parts.push_back("res +/- " + render_upper(*g.error));
  if (parts.empty()) return "unknown";
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? " && " : "") + parts[i];
  return s;
}

std::string model_text(const std::map<std::string, Rational>& model) {
  std::string s;
  for (const auto& [name, value] : model) {
    if (name.find('!') != std::string::npos || name.find('~') != std::string::npos) continue;
    s += (s.empty() ? "" : ", ") + name + " = " + to_decimal(value, 17);
  }
  return s;
}

std::string vc_line(const VerificationCondition& vc) {
  std::string s = vc.label() + ": " + to_string(vc.status);
  if (vc.used) s += " (" + vc.used->str() + ")";
  if (vc.counterexample) {
    s += ", counterexample " + model_text(vc.counterexample->model) + " [" +
         to_string(vc.counterexample->classification) + "] violating " + vc.counterexample->clause;
  }
  return s;
}

std::string issue_line(const AnalysisIssue& i) {
  return to_string(i.kind) + (i.ideal ? " (ideal)" : "") + " at " + i.location + ", operand in " +
         i.total.decimal_str(6);
}

std::string annotation(const FunctionDef& f, const FunctionVerdict& fv) {
  std::ostringstream out;
  out << "/*@\n";
  if (!f.pre.empty()) out << "  requires " << to_source(f.pre) << "\n";
  if (f.has_post) out << "  given    " << to_source(f.post) << "\n";
  out << "  ensures  " << ensures_text(fv.spec) << "\n";
  if (fv.spec.path_error > 0) out << "  path error <= " << render_upper(fv.spec.path_error) << "\n";
  for (const auto& vc : fv.vcs) out << "  " << vc_line(vc) << "\n";
  for (const auto& a : fv.attempts) {
    if (a.proven || a.precision == fv.spec.precision) continue;
    out << "  not proven at " << a.precision.str();
    if (a.spec) out << ": computed " << ensures_text(*a.spec);
    out << "\n";
  }
  for (const auto& i : fv.spec.issues) out << "  warning: " << issue_line(i) << "\n";
  out << "@*/\n";
  return out.str();
}

std::string definition(const FunctionDef& f, const PrecisionSpec& prec) {
  std::ostringstream out;
  const std::string t = prec.c_type();
  out << t << " " << f.name << "(";
  for (std::size_t i = 0; i < f.params.size(); ++i) out << (i ? ", " : "") << t << " " << f.params[i];
  out << ") {\n";
  statements(f.body, prec, 2, out);
  out << "}\n";
  return out.str();
}

std::string preamble(const Verdict& v) {
  const PrecisionSpec& prec = v.reported;
  std::ostringstream out;
  out << "/* realc output, " << prec.str() << " (" << prec.c_type() << "): "
      << (v.proven() ? "verified" : "NOT verified, see the failure report at the end") << " */\n";
  if (is_extended(prec)) {
    out << "/* " << prec.c_type() << " is provided by an extended-precision library. It must offer\n"
        << "   + - * / and unary -, the comparisons, sqrt, and construction from a\n"
        << "   decimal string, each with relative error at most " << render_upper(prec.epsilon) << ". */\n";
  }
  out << "#include <math.h>\n";
  return out.str();
}

}  // namespace

EmittedUnit emit_code(const Program& p, const Verdict& v) {
  EmittedUnit u;
  u.precision = v.reported;
  u.verified = v.proven();
  std::ostringstream text, failures;
  text << preamble(v);
  for (const auto& f : p.functions) {
    const FunctionVerdict* fv = v.find(f.name);
    if (!fv) throw std::invalid_argument("no verdict for function " + f.name);
    EmittedFunction ef;
    ef.name = f.name;
    ef.post = fv->spec.clauses();
    ef.proven = fv->proven();
    ef.source = annotation(f, *fv) + definition(f, v.reported);
    for (const auto& i : fv->spec.issues) u.warnings.emplace_back(f.name, i);
    text << "\n" << ef.source;
    if (!ef.proven) {
      failures << "  " << f.name << ": best computed spec " << ensures_text(fv->spec) << "\n";
      for (const auto& vc : fv->vcs)
        if (vc.status != VcStatus::proven) failures << "    " << vc_line(vc) << "\n";
    }
    u.functions.push_back(std::move(ef));
  }
  if (!u.verified) {
    std::ostringstream r;
    r << "not verified at any candidate precision; reported at " << v.reported.str() << " after trying";
    for (const auto& t : v.tried) r << " " << t.str();
    r << "\n" << failures.str();
    u.failure_report = r.str();
    text << "\n/* failure report\n" << u.failure_report << "*/\n";
  }
  u.text = text.str();
  return u;
}

Baseline interval_baseline(const Program& p, const FunctionDef& f, const PrecisionSpec& prec) {
  Baseline b;
  ExprPtr body = inline_calls(f.body, p);
  try {
    b.range = eval_interval(body, box_of(ideal_precondition(f)));
  } catch (const RangeFault&) {
  }
  ErrorConfig ec;
  ec.tighten_ranges = false;
  ErrorResult r = eval_with_error(error_inputs(f, prec), body, prec, ec);
  if (!r.fatal) b.error = r.error_bound;
  return b;
}

namespace {

using nlohmann::json;

json interval_json(const std::optional<Interval>& r) {
  if (!r) return nullptr;
  return {{"lo", render_lower(r->lo())}, {"hi", render_upper(r->hi())}};
}

json upper_json(const std::optional<Rational>& q) { return q ? json(render_upper(*q)) : json(nullptr); }

json vc_json(const VerificationCondition& vc) {
  json j = {{"label", vc.label()},
            {"kind", to_string(vc.kind)},
            {"status", to_string(vc.status)},
            {"approximation_used", vc.used ? json(vc.used->str()) : json(nullptr)},
            {"counterexample", nullptr}};
  if (vc.counterexample) {
    json model = json::object();
    for (const auto& [name, value] : vc.counterexample->model) model[name] = to_decimal(value, 17);
    j["counterexample"] = {{"model", model},
                           {"classification", to_string(vc.counterexample->classification)},
                           {"clause", vc.counterexample->clause},
                           {"step", vc.counterexample->step.str()}};
  }
  return j;
}

std::string verdict_of(const FunctionVerdict& f) {
  if (f.proven()) return "proven";
  return f.refuted() ? "disproven" : "unknown";
}

}  // namespace

std::string emit_report(const Verdict& v, const ReportOptions& opt) {
  json doc;
  doc["precision"] = v.precision ? json(v.precision->str()) : json(nullptr);
  doc["reported_precision"] = v.reported.str();
  doc["verified"] = v.proven();
  doc["tried"] = json::array();
  for (const auto& t : v.tried) doc["tried"].push_back(t.str());
  doc["functions"] = json::array();
  for (const auto& f : v.functions) {
    const GeneratedSpec& g = f.spec;
    json j = {{"name", f.name},
              {"verdict", verdict_of(f)},
              {"precision", v.reported.str()},
              {"range", interval_json(g.range)},
              {"error", upper_json(g.error)},
              {"path_error", render_upper(g.path_error)},
              {"split",
               {{"input", render_upper(g.split.input)},
                {"roundoff", render_upper(g.split.roundoff)},
                {"propagation", render_upper(g.split.propagation)},
                {"path", render_upper(g.split.path)}}},
              {"issues", json::array()},
              {"vcs", json::array()}};
    for (const auto& i : g.issues) {
      j["issues"].push_back({{"kind", to_string(i.kind)},
                             {"location", i.location},
                             {"ideal", i.ideal},
                             {"operand", interval_json(i.total)}});
    }
    for (const auto& vc : f.vcs) j["vcs"].push_back(vc_json(vc));
    j["attempts"] = json::array();
    for (const auto& a : f.attempts) {
      json aj = {{"precision", a.precision.str()}, {"proven", a.proven}, {"vcs", json::array()}};
      for (const auto& [label, st] : a.vcs) aj["vcs"].push_back({{"label", label}, {"status", to_string(st)}});
      if (a.spec) {
        aj["range"] = interval_json(a.spec->range);
        aj["error"] = upper_json(a.spec->error);
      }
      j["attempts"].push_back(std::move(aj));
    }
    auto b = opt.baselines.find(f.name);
    if (b != opt.baselines.end()) {
      j["interval_range"] = interval_json(b->second.range);
      j["interval_error"] = upper_json(b->second.error);
    }
    if (opt.timings) j["seconds"] = f.seconds;
    doc["functions"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

}  // namespace realc
