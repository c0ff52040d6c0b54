#pragma once

// Flat instruction lists compiled from expression DAGs. One slot per distinct
// node; evaluation walks the slots in order.

#include <optional>
#include <string>
#include <vector>

#include "realc/dinterval.hpp"
#include "realc/expr.hpp"
#include "realc/interval.hpp"

namespace realc {

struct TapeOp {
  ExprKind kind;
  int a = -1, b = -1, c = -1, d = -1;
  CmpOp cmp = CmpOp::lt;
  int var = -1;
  Rational value{0};
  DInterval cvalue;
};

class Tape {
 public:
  /// `vars` fixes the variable order of every box passed in later. Lets are
  /// inlined; calls, ~x and !x must already be replaced by variables.
  Tape(const std::vector<ExprPtr>& roots, const std::vector<std::string>& vars);

  std::size_t size() const { return ops_.size(); }
  std::size_t num_vars() const { return num_vars_; }
  int root(std::size_t i) const { return roots_[i]; }
  const std::vector<TapeOp>& ops() const { return ops_; }

  /// Exact rational interval evaluation; nullopt slots could fault
  /// (division by zero, negative sqrt) somewhere on the box.
  std::vector<std::optional<Interval>> eval_exact(const std::vector<Interval>& box) const;

  /// Outward binary64 evaluation into `out` (resized to size()).
  void eval(const std::vector<DInterval>& box, std::vector<DInterval>& out) const;

  /// Values plus interval gradients with respect to every variable.
  /// `grad` is laid out slot-major (size() * num_vars()). Returns false when
  /// an undecided conditional makes the gradient meaningless.
  bool eval_grad(const std::vector<DInterval>& box, std::vector<DInterval>& out, std::vector<DInterval>& grad) const;

  /// Backward pass: narrows `box` assuming slot `root` lies in `target`,
  /// given values from a prior eval(). Returns false if the box becomes empty.
  bool contract(int root, const DInterval& target, std::vector<DInterval>& values, std::vector<DInterval>& box) const;

 private:
  std::vector<TapeOp> ops_;
  std::vector<int> roots_;
  std::size_t num_vars_ = 0;
};

}  // namespace realc
