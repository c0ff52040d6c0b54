#pragma once

// Divergence between ideal and actual runs that take different sides of a
// branch. The guard `lhs op rhs` is read as c(x) op 0 with c = lhs - rhs;
// when computing c in finite precision is off by at most err_c, the actual
// run can only take the other side for ideal inputs with c(x) in a band of
// width err_c around 0. Errors are bounded for those inputs only, so no
// continuity of the branches is assumed.

#include <optional>
#include <vector>

#include "realc/error.hpp"

namespace realc {

struct Guard {
  ExprPtr lhs;
  CmpOp op = CmpOp::lt;
  ExprPtr rhs;

  static Guard of_ite(const ExprPtr& ite);
  ExprPtr value() const;  // c = lhs - rhs
  FormulaPtr holds() const;
  FormulaPtr fails() const;
  /// Ideal inputs for which a run whose c is off by at most `slack` can see
  /// the guard on side `taken` (true: holds).
  FormulaPtr reachable(bool taken, const Rational& slack) const;
};

enum class Direction { then_else, else_then };

/// Ideal run takes one side, actual run the other.
struct PathPair {
  Guard guard;
  ExprPtr taken_ideal;
  ExprPtr taken_actual;
  Direction direction = Direction::then_else;
};

/// Range engine settings for divergence regions: at least 1e-12 precision
/// and twice the iteration cap, since the bands are thin.
RangeConfig path_range_config(const RangeConfig& base);

struct PathError {
  std::optional<Rational> bound;      // nullopt: a fault left no finite bound
  std::vector<AnalysisIssue> issues;  // from analysing the branches on the band
};

/// A guard whose value lies within +-slack on the whole region.
struct Boundary {
  Guard guard;
  Rational slack;
};

/// Bound on |ideal f_ideal(x) - actual f_actual| over ideal inputs in
/// `region` (pre is added). 0 when the region is infeasible. With `near`
/// and a linear guard, also tries the route through the guard surface.
PathError divergence_bound(const ErrorInputs& in, const FormulaPtr& region, const ExprPtr& f_ideal,
                           const ExprPtr& f_actual, const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s,
                           const std::optional<Boundary>& near = std::nullopt);

/// One direction of a pair given the guard error err_c.
PathError compute_path_error(const ErrorInputs& in, const PathPair& p, const Rational& err_c,
                             const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s);

/// Max over both directions of `if (guard) f1 else f2`, with err_c from the
/// error engine under pre.
PathError get_path_error(const ErrorInputs& in, const Guard& g, const ExprPtr& f1, const ExprPtr& f2,
                         const PrecisionSpec& prec, const ErrorConfig& cfg, Session& s);
PathError get_path_error(const ErrorInputs& in, const Guard& g, const ExprPtr& f1, const ExprPtr& f2,
                         const PrecisionSpec& prec, const ErrorConfig& cfg = {});

/// One straight-line path: the guard decisions along it and its ite-free body.
struct Path {
  std::vector<std::pair<Guard, bool>> decisions;
  ExprPtr body;
  FormulaPtr condition() const;
};

/// Every path of an expression (lets are inlined first). nullopt when there
/// are more than `limit`.
std::optional<std::vector<Path>> enumerate_paths(const ExprPtr& e, std::size_t limit = 256);

/// Keeps paths whose condition is satisfiable with pre on the session, or
/// undecided.
std::vector<Path> prune_infeasible(const std::vector<Path>& paths, Session& s);

/// Path-by-path analysis: per-path errors under their own conditions plus a
/// divergence bound for every ordered pair of feasible paths. Falls back to
/// the merged analysis above the path limit.
ErrorResult eval_paths_explicit(const ErrorInputs& in, const ExprPtr& e, const PrecisionSpec& prec,
                                const ErrorConfig& cfg, Session& s);

}  // namespace realc
