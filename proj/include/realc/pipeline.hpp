#pragma once

// The compilation loop: try the candidate precisions least precise first
// until every VC of the program holds, and generate specs for the result.

#include <optional>
#include <string>
#include <vector>

#include "realc/vcgen.hpp"

namespace realc {

/// One precision tried for one function. A failing attempt carries the
/// spec computed at that precision, showing by how much the target was missed.
struct Attempt {
  PrecisionSpec precision;
  std::vector<std::pair<std::string, VcStatus>> vcs;  // label, status
  bool proven = false;
  std::optional<GeneratedSpec> spec;  // failing attempts only
};

struct FunctionVerdict {
  std::string name;
  std::vector<Attempt> attempts;  // in the order tried
  std::vector<VerificationCondition> vcs;  // at the reported precision
  GeneratedSpec spec;                      // at the reported precision
  double seconds = 0;                      // discharge over all precisions tried, plus generate_spec
  bool proven() const;
  /// A VC was refuted by a genuine counterexample.
  bool refuted() const;
};

struct Verdict {
  std::vector<FunctionVerdict> functions;
  std::optional<PrecisionSpec> precision;  // least precise candidate that verifies everything
  PrecisionSpec reported;                  // precision of the VCs and specs below
  std::vector<PrecisionSpec> tried;
  bool proven() const { return precision.has_value(); }
  const FunctionVerdict* find(const std::string& name) const;
};

struct PipelineConfig {
  std::vector<PrecisionSpec> precisions = PrecisionSpec::all();
  VcConfig vc;
};

/// Least precise candidate first, until every VC holds. A genuine
/// counterexample ends the loop early: no
/// precision repairs the ideal computation. On failure everything is
/// reported at the last precision tried.
Verdict verify_program(const Program& p, const PipelineConfig& cfg = {});

}  // namespace realc
