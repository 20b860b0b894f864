#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "salsa/tensor.h"

namespace salsa {

struct GradcheckOptions {
  double eps = 1e-5;
  /// 0 checks every entry; otherwise a seeded sample of this many per tensor.
  std::size_t maxEntriesPerTensor = 0;
  std::uint64_t seed = 0;
  /// Entries whose left and right one-sided differences disagree by more than
  /// this (relative) are treated as nondifferentiable points and skipped.
  double kinkTolerance = 1e-3;
  /// Lower bound on the relative-error denominator. Finite differences of
  /// an O(10) loss carry about 1e-10 of rounding noise, which this keeps from
  /// reading as a large relative error on structurally zero gradients.
  double denominatorFloor = 1e-8;
};

struct GradcheckResult {
  double maxRelativeError = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  /// Where maxRelativeError was attained.
  std::size_t worstTensor = 0;
  std::size_t worstEntry = 0;
  double worstAnalytic = 0.0;
  double worstNumeric = 0.0;
};

/// Compares analytic gradients of `loss` (a scalar-valued closure) with
/// central finite differences for every entry of the given leaf tensors.
/// Relative error is |a - n| / max(denominatorFloor, |a| + |n|). `loss` must be
/// deterministic across calls.
GradcheckResult gradcheckParams(
    const std::function<Tensor()>& loss,
    std::vector<Tensor> leaves,
    const GradcheckOptions& options = {});

/// Gradient check of f at x; non-scalar outputs are summed.
double gradcheck(
    const std::function<Tensor(const Tensor&)>& f,
    const Tensor& x,
    double eps = 1e-5);

} // namespace salsa
