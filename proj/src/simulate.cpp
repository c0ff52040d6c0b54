#include "realc/simulate.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <thread>
#include <vector>

#include "realc/fpeval.hpp"
#include "realc/solver.hpp"
#include "realc/vcgen.hpp"

namespace realc {

namespace {

constexpr std::size_t kChunk = 1024;
constexpr std::size_t kMaxDrawsPerSample = 1000;  // 99.9% rejection

struct Input {
  std::string name;
  Interval box;
  const SpecClause* noise = nullptr;
};

// Uniform on [lo, hi] with ~113 random bits, so the ideal input is rarely a
// float itself and representation roundoff is exercised.
Rational fine_sample(std::mt19937_64& rng, const Interval& r) {
  Rational t = Rational(static_cast<unsigned long>(rng() >> 11)) * pow2(-53) +
               Rational(static_cast<unsigned long>(rng() >> 4)) * pow2(-113);
  return r.lo() + r.width() * t;
}

Rational symmetric(std::mt19937_64& rng) {
  return Rational(static_cast<unsigned long>(rng() >> 11)) * pow2(-52) - 1;
}

struct Partial {
  std::size_t accepted = 0, drawn = 0, faults = 0;
  std::optional<Interval> observed, computed;
  Rational max_error{0};
  std::map<std::string, Rational> worst;
};

void hull_into(std::optional<Interval>& acc, const Interval& v) { acc = acc ? hull(*acc, v) : v; }

class Sampler {
 public:
  Sampler(const Program& p, const FunctionDef& f, const SimConfig& cfg) : cfg_(cfg) {
    body_ = inline_lets(inline_calls(f.body, p));
    for (const auto& x : f.params) {
      auto box = f.range_of(x);
      if (!box) throw std::invalid_argument("input '" + x + "' of " + f.name + " has no bounds");
      inputs_.push_back({x, *box, f.uncertainty_of(x)});
    }
    auto extra = f.pre_constraints();
    if (!extra.empty()) pre_ = fm::conj(std::move(extra));
  }

  Partial chunk(std::size_t index, std::size_t target) const {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::mt19937_64 rng(seq);
    Partial out;
    const bool single = cfg_.precision.name == PrecisionName::float32;
    while (out.accepted < target && out.drawn < target * kMaxDrawsPerSample) {
      ++out.drawn;
      std::map<std::string, Rational> ideal;
      std::map<std::string, double> ad;
      std::map<std::string, float> af;
      bool inside = true;
      for (const auto& in : inputs_) {
        Rational x = fine_sample(rng, in.box);
        // bounds are strict for x.in; endpoints have measure zero anyway
        if (x == in.box.lo() || x == in.box.hi()) inside = false;
        ideal[in.name] = x;
        Rational noisy = x;
        if (in.noise) {
          Rational k = in.noise->kind == ClauseKind::rel_uncertainty ? Rational(in.noise->magnitude->value * abs(x))
                                                                      : in.noise->magnitude->value;
          noisy += k * symmetric(rng);
        }
        if (single) af[in.name] = to_float(noisy);
        else ad[in.name] = to_double(noisy);
      }
      if (!inside) continue;
      if (pre_ && evaluate_at(pre_, ideal) != std::optional<bool>(true)) continue;
      ++out.accepted;

      Interval exact;
      try {
        exact = eval_exact_point(body_, ideal);
      } catch (const RangeFault&) {
        ++out.faults;
        continue;
      }
      double actual = single ? static_cast<double>(eval_float(body_, af)) : eval_double(body_, ad);
      hull_into(out.observed, exact);
      if (!std::isfinite(actual)) {
        ++out.faults;
        continue;
      }
      Rational a = from_double(actual);
      hull_into(out.computed, Interval(a));
      Rational dev = max(abs(a - exact.lo()), abs(a - exact.hi()));
      if (out.worst.empty() || dev > out.max_error) {
        out.max_error = dev;
        out.worst = ideal;
      }
    }
    return out;
  }

 private:
  const SimConfig& cfg_;
  ExprPtr body_;
  std::vector<Input> inputs_;
  FormulaPtr pre_;
};

}  // namespace

SimResult simulate(const Program& p, const FunctionDef& f, const SimConfig& cfg) {
  if (cfg.precision.name != PrecisionName::float32 && cfg.precision.name != PrecisionName::float64)
    throw std::invalid_argument("simulation runs in float32 or float64 only, not " + cfg.precision.str());
  SimResult res;
  res.function = f.name;
  res.precision = cfg.precision;
  Sampler sampler(p, f, cfg);

  const std::size_t chunks = (cfg.samples + kChunk - 1) / kChunk;
  std::vector<Partial> parts(chunks);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < chunks;) {
      std::size_t target = std::min(kChunk, cfg.samples - i * kChunk);
      parts[i] = sampler.chunk(i, target);
    }
  };
  unsigned n = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, chunks));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  // reduced in chunk order, so the worst input is independent of scheduling
  for (const auto& part : parts) {
    res.samples += part.accepted;
    res.drawn += part.drawn;
    res.faults += part.faults;
    if (part.observed) hull_into(res.observed, *part.observed);
    if (part.computed) hull_into(res.computed, *part.computed);
    if (!part.worst.empty() && (res.worst.empty() || part.max_error > res.max_error)) {
      res.max_error = part.max_error;
      res.worst = part.worst;
    }
  }
  if (res.samples < cfg.samples || res.samples * kMaxDrawsPerSample < res.drawn) {
    throw SamplingError("precondition of " + f.name + " rejected " + std::to_string(res.drawn - res.samples) +
                        " of " + std::to_string(res.drawn) + " draws (more than 99.9%)");
  }
  return res;
}

}  // namespace realc
