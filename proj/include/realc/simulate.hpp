#pragma once

// Random testing oracle: exact rational evaluation against hardware
// binary32/binary64 execution of the same function on noisy inputs.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "realc/ast.hpp"
#include "realc/interval.hpp"
#include "realc/precision.hpp"

namespace realc {

struct SimConfig {
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  PrecisionSpec precision = PrecisionSpec::of(PrecisionName::float64);
  unsigned threads = 0;  // 0: hardware concurrency; results do not depend on it
};

struct SimResult {
  std::string function;
  PrecisionSpec precision;
  std::size_t samples = 0;  // accepted samples
  std::size_t drawn = 0;    // including rejected ones
  std::optional<Interval> observed;         // hull of the exact results
  std::optional<Interval> computed;         // hull of the hardware results
  Rational max_error{0};                    // max |computed - exact| (exact side enclosed)
  std::map<std::string, Rational> worst;    // ideal inputs of the largest error
  std::size_t faults = 0;                   // NaN/inf results or exact faults
};

/// More than 99.9% of the draws failed the precondition constraints.
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform ideal inputs in the declared box, rejection-sampled against the
/// remaining precondition constraints; the actual input is the ideal one
/// moved uniformly within its declared noise, then rounded to the format.
/// Calls are inlined. Deterministic for a fixed seed and sample count.
/// Only float32 and float64 can be simulated.
SimResult simulate(const Program& p, const FunctionDef& f, const SimConfig& cfg);

}  // namespace realc
