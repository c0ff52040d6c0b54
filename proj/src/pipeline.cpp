#include "realc/pipeline.hpp"

#include <chrono>
#include <map>
#include <memory>

namespace realc {

bool FunctionVerdict::proven() const {
  for (const auto& vc : vcs)
    if (vc.status != VcStatus::proven) return false;
  return true;
}

bool FunctionVerdict::refuted() const {
  for (const auto& vc : vcs)
    if (vc.status == VcStatus::disproven) return true;
  return false;
}

const FunctionVerdict* Verdict::find(const std::string& name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

Verdict verify_program(const Program& p, const PipelineConfig& cfg) {
  if (cfg.precisions.empty()) throw std::invalid_argument("no candidate precision");
  Verdict out;
  // node ranges are precision independent: one cache per function
  std::map<std::string, std::shared_ptr<RangeCache>> caches;
  for (const auto& f : p.functions) caches[f.name] = make_range_cache();

  std::map<std::string, double> seconds;
  std::map<std::string, std::vector<Attempt>> attempts;
  auto clock = [] { return std::chrono::steady_clock::now(); };
  auto since = [&](auto t0) { return std::chrono::duration<double>(clock() - t0).count(); };

  std::vector<VerificationCondition> vcs;
  for (const auto& prec : cfg.precisions) {
    out.tried.push_back(prec);
    out.reported = prec;
    vcs = generate_vcs(p, prec);
    Session s(cfg.vc.solver);
    bool all = true, refuted = false;
    std::map<std::string, Attempt> round;
    for (auto& vc : vcs) {
      VcConfig vcfg = cfg.vc;
      vcfg.error.cache = caches.at(vc.function);
      auto t0 = clock();
      discharge(p, vc, prec, vcfg, s);
      seconds[vc.function] += since(t0);
      all = all && vc.status == VcStatus::proven;
      refuted = refuted || vc.status == VcStatus::disproven;
      round[vc.function].vcs.emplace_back(vc.label(), vc.status);
    }
    for (const auto& f : p.functions) {
      Attempt a = round[f.name];
      a.precision = prec;
      a.proven = true;
      for (const auto& [label, st] : a.vcs) a.proven = a.proven && st == VcStatus::proven;
      if (!a.proven) {
        ErrorConfig ec = cfg.vc.error;
        ec.cache = caches.at(f.name);
        auto t0 = clock();
        a.spec = generate_spec(p, f, prec, ec);
        seconds[f.name] += since(t0);
      }
      attempts[f.name].push_back(std::move(a));
    }
    if (all) {
      out.precision = prec;
      break;
    }
    if (refuted) break;
  }

  for (const auto& f : p.functions) {
    FunctionVerdict fv;
    fv.name = f.name;
    fv.attempts = attempts[f.name];
    for (const auto& vc : vcs)
      if (vc.function == f.name) fv.vcs.push_back(vc);
    ErrorConfig ec = cfg.vc.error;
    ec.cache = caches.at(f.name);
    auto t0 = clock();
    const Attempt* last = fv.attempts.empty() ? nullptr : &fv.attempts.back();
    if (last && last->spec && last->precision == out.reported) fv.spec = *last->spec;
    else fv.spec = generate_spec(p, f, out.reported, ec);
    fv.seconds = seconds[f.name] + since(t0);
    out.functions.push_back(std::move(fv));
  }
  return out;
}

}  // namespace realc
