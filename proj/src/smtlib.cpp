// SMT-LIB2 rendering and the external solver process.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "realc/solver.hpp"

namespace realc {

namespace {

std::string lit(const mpz_class& z) {
  mpz_class a = abs(z);
  std::string s = a.get_str() + ".0";
  return sgn(z) < 0 ? "(- " + s + ")" : s;
}

std::string rational_smt(const Rational& q) {
  if (q.get_den() == 1) return lit(q.get_num());
  std::string frac = "(/ " + mpz_class(abs(q.get_num())).get_str() + ".0 " + q.get_den().get_str() + ".0)";
  return sgn(q) < 0 ? "(- " + frac + ")" : frac;
}

std::string sym(const std::string& name) { return "|" + name + "|"; }

const char* cmp_smt(CmpOp op) {
  switch (op) {
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::gt: return ">";
    case CmpOp::ge: return ">=";
  }
  return "<";
}

// Renders constraints as SMT-LIB lines. Shared subterms and square roots get
// auxiliary constants so the text stays linear in the DAG size.
class SmtWriter {
 public:
  explicit SmtWriter(std::size_t& aux_counter) : aux_(aux_counter) {}

  void declare(const std::string& name, std::set<std::string>& declared) {
    if (declared.insert(name).second) out_ << "(declare-const " << sym(name) << " Real)\n";
  }

  void constraint(const Constraint& c, std::set<std::string>& declared) {
    for (const auto& v : c.vars) declare(v.name, declared);
    for (const auto& v : c.vars) {
      if (!v.bounds) continue;
      out_ << "(assert (<= " << rational_smt(v.bounds->lo()) << " " << sym(v.name) << "))\n";
      out_ << "(assert (<= " << sym(v.name) << " " << rational_smt(v.bounds->hi()) << "))\n";
    }
    if (c.formula->kind != FormulaKind::truth) {
      count_formula(c.formula);
      std::string body = formula(c.formula, declared);
      out_ << "(assert " << body << ")\n";
    }
  }

  std::string text() const { return out_.str(); }

 private:
  void count(const ExprPtr& e) {
    if (++parents_[e.get()] > 1) return;
    for (const auto& a : e->args) count(a);
  }

  void count_formula(const FormulaPtr& f) {
    if (f->kind == FormulaKind::cmp) {
      count(f->lhs);
      count(f->rhs);
    }
    for (const auto& c : f->children) count_formula(c);
  }

  std::string fresh(std::set<std::string>& declared) {
    std::string name = "aux!" + std::to_string(aux_++);
    declare(name, declared);
    return sym(name);
  }

  std::string expr(const ExprPtr& e, std::set<std::string>& declared) {
    if (auto it = done_.find(e.get()); it != done_.end()) return it->second;
    std::string s;
    auto arg = [&](int i) { return expr(e->args[i], declared); };
    switch (e->kind) {
      case ExprKind::constant: s = rational_smt(e->value); break;
      case ExprKind::variable: s = sym(e->name); break;
      case ExprKind::add: s = "(+ " + arg(0) + " " + arg(1) + ")"; break;
      case ExprKind::sub: s = "(- " + arg(0) + " " + arg(1) + ")"; break;
      case ExprKind::mul: s = "(* " + arg(0) + " " + arg(1) + ")"; break;
      case ExprKind::div: s = "(/ " + arg(0) + " " + arg(1) + ")"; break;
      case ExprKind::neg: s = "(- " + arg(0) + ")"; break;
      case ExprKind::sqrt: {
        std::string a = arg(0);
        s = fresh(declared);
        // Only constrained where the root exists; elsewhere the value is free,
        // which can only add models.
        out_ << "(assert (>= " << s << " 0.0))\n";
        out_ << "(assert (=> (>= " << a << " 0.0) (= (* " << s << " " << s << ") " << a << ")))\n";
        break;
      }
      case ExprKind::ite:
        s = "(ite (" + std::string(cmp_smt(e->cmp)) + " " + arg(0) + " " + arg(1) + ") " + arg(2) + " " + arg(3) + ")";
        break;
      case ExprKind::let:
      case ExprKind::call:
      case ExprKind::actual:
      case ExprKind::initial_error:
        throw std::invalid_argument("expression kind not supported in SMT-LIB output: " + to_source(e));
    }
    if (e->kind != ExprKind::sqrt && !e->is_leaf() && parents_[e.get()] > 1) {
      std::string name = fresh(declared);
      out_ << "(assert (= " << name << " " << s << "))\n";
      s = name;
    }
    done_.emplace(e.get(), s);
    return s;
  }

  std::string formula(const FormulaPtr& f, std::set<std::string>& declared) {
    switch (f->kind) {
      case FormulaKind::truth: return "true";
      case FormulaKind::falsity: return "false";
      case FormulaKind::cmp: {
        std::string l = expr(f->lhs, declared);
        std::string r = expr(f->rhs, declared);
        return "(" + std::string(cmp_smt(f->op)) + " " + l + " " + r + ")";
      }
      case FormulaKind::conj:
      case FormulaKind::disj: {
        std::string s = f->kind == FormulaKind::conj ? "(and" : "(or";
        for (const auto& c : f->children) s += " " + formula(c, declared);
        return s + ")";
      }
      case FormulaKind::negation: return "(not " + formula(f->children[0], declared) + ")";
    }
    return "true";
  }

  std::size_t& aux_;
  std::ostringstream out_;
  std::unordered_map<const Expr*, std::size_t> parents_;
  std::unordered_map<const Expr*, std::string> done_;
};

Constraint inlined(const Constraint& c) {
  Constraint out = c;
  out.formula = map_exprs(c.formula, [](const ExprPtr& e) { return inline_lets(e); });
  return out;
}

}  // namespace

std::string emit_smtlib(const Constraint& c) {
  std::size_t aux = 0;
  std::set<std::string> declared;
  SmtWriter w(aux);
  w.constraint(inlined(c), declared);
  return "(set-logic QF_NRA)\n" + w.text() + "(check-sat)\n";
}

// --- external process -------------------------------------------------------

namespace {

// Minimal s-expression reader for (get-value ...) answers.
struct SExpr {
  std::string atom;
  std::vector<SExpr> list;
  bool is_list = false;
};

std::optional<SExpr> parse_sexpr(const std::string& text, std::size_t& pos) {
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos >= text.size()) return std::nullopt;
  if (text[pos] == '(') {
    SExpr e;
    e.is_list = true;
    ++pos;
    while (true) {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
      if (pos >= text.size()) return std::nullopt;
      if (text[pos] == ')') {
        ++pos;
        return e;
      }
      auto child = parse_sexpr(text, pos);
      if (!child) return std::nullopt;
      e.list.push_back(std::move(*child));
    }
  }
  if (text[pos] == ')') return std::nullopt;
  SExpr e;
  if (text[pos] == '|') {
    std::size_t end = text.find('|', pos + 1);
    if (end == std::string::npos) return std::nullopt;
    e.atom = text.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    return e;
  }
  while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) && text[pos] != '(' &&
         text[pos] != ')') {
    e.atom += text[pos++];
  }
  return e;
}

std::optional<Rational> value_of(const SExpr& e) {
  if (!e.is_list) {
    try {
      return parse_decimal(e.atom);
    } catch (const std::invalid_argument&) {
      return std::nullopt;
    }
  }
  if (e.list.empty() || e.list[0].is_list) return std::nullopt;
  const std::string& head = e.list[0].atom;
  if (head == "-" && e.list.size() == 2) {
    auto v = value_of(e.list[1]);
    if (v) return -*v;
    return std::nullopt;
  }
  if (head == "/" && e.list.size() == 3) {
    auto a = value_of(e.list[1]), b = value_of(e.list[2]);
    if (a && b && sgn(*b) != 0) return *a / *b;
  }
  return std::nullopt;
}

}  // namespace

class ExternalProcess {
 public:
  explicit ExternalProcess(const std::string& command) {
    signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) throw BackendUnavailable("cannot create pipes");
    pid_ = fork();
    if (pid_ < 0) throw BackendUnavailable("cannot fork solver process");
    if (pid_ == 0) {
      dup2(to_child[0], 0);
      dup2(from_child[1], 1);
      int devnull = open("/dev/null", O_WRONLY);
      if (devnull >= 0) dup2(devnull, 2);
      close(to_child[1]);
      close(from_child[0]);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    in_ = to_child[1];
    out_ = from_child[0];
    send("(set-option :print-success false)\n(set-option :produce-models true)\n(set-logic QF_NRA)\n"
         "(echo \"ready\")\n");
    auto line = read_line(5000);
    if (!line || line->find("ready") == std::string::npos) {
      shutdown();
      throw BackendUnavailable("solver process did not start: " + command);
    }
  }

  ~ExternalProcess() { shutdown(); }

  bool alive() const { return pid_ > 0; }

  bool send(const std::string& text) {
    std::size_t done = 0;
    while (done < text.size()) {
      ssize_t n = write(in_, text.data() + done, text.size() - done);
      if (n <= 0) {
        if (errno == EINTR) continue;
        return false;
      }
      done += static_cast<std::size_t>(n);
    }
    return true;
  }

  std::optional<std::string> read_line(int timeout_ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
      std::size_t nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        // the newline after a get-value reply is left behind by read_sexpr
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        return line;
      }
      if (!fill(deadline)) return std::nullopt;
    }
  }

  // Reads one balanced s-expression (possibly spanning lines).
  std::optional<std::string> read_sexpr(int timeout_ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
      int depth = 0;
      bool started = false;
      for (std::size_t i = 0; i < buffer_.size(); ++i) {
        char ch = buffer_[i];
        if (ch == '(') {
          ++depth;
          started = true;
        } else if (ch == ')') {
          --depth;
        }
        if (started && depth == 0) {
          std::string s = buffer_.substr(0, i + 1);
          buffer_.erase(0, i + 1);
          return s;
        }
      }
      if (!fill(deadline)) return std::nullopt;
    }
  }

  std::size_t aux_counter = 0;
  std::vector<std::set<std::string>> declared{{}};

 private:
  bool fill(std::chrono::steady_clock::time_point deadline) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) return false;
    int ms = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count()) + 1;
    pollfd p{out_, POLLIN, 0};
    int r = poll(&p, 1, ms);
    if (r <= 0) return false;
    char buf[4096];
    ssize_t n = read(out_, buf, sizeof buf);
    if (n <= 0) return false;
    buffer_.append(buf, static_cast<std::size_t>(n));
    return true;
  }

  void shutdown() {
    if (pid_ <= 0) return;
    close(in_);
    close(out_);
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }

  pid_t pid_ = -1;
  int in_ = -1, out_ = -1;
  std::string buffer_;
};

namespace {

SolverVerdict external_query(ExternalProcess& p, const Constraint& full, const Constraint& query, double timeout_s) {
  auto& declared = p.declared.back();
  std::set<std::string> local = declared;
  SmtWriter w(p.aux_counter);
  w.constraint(inlined(query), local);
  long ms = std::max(1L, static_cast<long>(timeout_s * 1000));
  std::string script = "(push 1)\n(set-option :timeout " + std::to_string(ms) + ")\n" + w.text() + "(check-sat)\n";
  if (!p.send(script)) return SolverVerdict::unknown(UnknownReason::incomplete);
  int wait_ms = static_cast<int>(ms) + 2000;
  auto answer = p.read_line(wait_ms);
  SolverVerdict v = SolverVerdict::unknown(UnknownReason::timeout);
  if (answer) {
    std::string a = *answer;
    a.erase(0, a.find_first_not_of(" \t\r"));
    a.erase(a.find_last_not_of(" \t\r") + 1);
    if (a == "unsat") {
      v = SolverVerdict::unsat();
    } else if (a == "sat") {
      std::string names;
      for (const auto& var : full.vars) names += " " + sym(var.name);
      std::map<std::string, Rational> model;
      bool ok = !full.vars.empty();
      if (ok && p.send("(get-value (" + names + "))\n")) {
        auto text = p.read_sexpr(wait_ms);
        std::size_t pos = 0;
        auto parsed = text ? parse_sexpr(*text, pos) : std::nullopt;
        ok = parsed && parsed->is_list;
        if (ok) {
          for (const auto& pair : parsed->list) {
            if (!pair.is_list || pair.list.size() != 2 || pair.list[0].is_list) {
              ok = false;
              break;
            }
            auto val = value_of(pair.list[1]);
            if (!val) {
              ok = false;
              break;
            }
            model[pair.list[0].atom] = *val;
          }
        }
      }
      if (full.vars.empty()) ok = evaluate_at(full.formula, {}).value_or(false);
      // A model is only trusted after exact re-checking.
      if (ok && model_satisfies(full, model)) v = SolverVerdict::sat(std::move(model));
      else v = SolverVerdict::unknown(UnknownReason::incomplete);
    } else if (a != "unknown" && a != "timeout") {
      v = SolverVerdict::unknown(UnknownReason::incomplete);
    }
  }
  p.send("(pop 1)\n");
  return v;
}

}  // namespace

SolverVerdict check_sat(const Constraint& c, const BackendConfig& cfg) {
  if (cfg.backend == BackendConfig::Backend::builtin) return builtin_icp_check(c, cfg);
  ExternalProcess p(cfg.external_command);
  return external_query(p, c, c, cfg.timeout_seconds);
}

Session::Session(BackendConfig cfg) : cfg_(std::move(cfg)) {}

Session::~Session() = default;

namespace {

bool ensure_process(std::unique_ptr<ExternalProcess>& proc, BackendConfig& cfg) {
  if (cfg.backend != BackendConfig::Backend::external) return false;
  if (proc && proc->alive()) return true;
  try {
    proc = std::make_unique<ExternalProcess>(cfg.external_command);
    return true;
  } catch (const BackendUnavailable& e) {
    std::cerr << "warning: " << e.what() << "; using the builtin solver\n";
    cfg.backend = BackendConfig::Backend::builtin;
    proc.reset();
    return false;
  }
}

}  // namespace

void Session::push(const Constraint& base) {
  scopes_.push_back(base);
  merged_ = conjoin(merged_, base);
  if (proc_ && proc_->alive()) {
    auto declared = proc_->declared.back();
    SmtWriter w(proc_->aux_counter);
    w.constraint(inlined(base), declared);
    proc_->send("(push 1)\n" + w.text());
    proc_->declared.push_back(std::move(declared));
  }
}

void Session::pop() {
  if (scopes_.empty()) throw std::logic_error("pop without matching push");
  scopes_.pop_back();
  merged_ = Constraint{};
  for (const auto& s : scopes_) merged_ = conjoin(merged_, s);
  if (proc_ && proc_->alive() && proc_->declared.size() > 1) {
    proc_->send("(pop 1)\n");
    proc_->declared.pop_back();
  }
}

SolverVerdict Session::check(const Constraint& query) {
  ++queries_;
  Constraint full = conjoin(merged_, query);
  if (cfg_.backend == BackendConfig::Backend::external && !(proc_ && proc_->alive())) {
    // (Re)start and replay the open scopes.
    if (ensure_process(proc_, cfg_)) {
      for (const auto& s : scopes_) {
        auto declared = proc_->declared.back();
        SmtWriter w(proc_->aux_counter);
        w.constraint(inlined(s), declared);
        proc_->send("(push 1)\n" + w.text());
        proc_->declared.push_back(std::move(declared));
      }
    }
  }
  if (cfg_.backend == BackendConfig::Backend::external && proc_) {
    SolverVerdict v = external_query(*proc_, full, query, cfg_.timeout_seconds);
    if (v.is_unknown() && v.reason == UnknownReason::timeout) proc_.reset();
    return v;
  }
  return builtin_icp_check(full, cfg_);
}

}  // namespace realc
