#include "salsa/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "salsa/error.h"
#include "salsa/ops.h"
#include "salsa/rng.h"

namespace salsa {

namespace {

double evalScalar(const std::function<Tensor()>& loss) {
  NoGradGuard guard;
  return loss().item();
}

} // namespace

GradcheckResult gradcheckParams(
    const std::function<Tensor()>& loss,
    std::vector<Tensor> leaves,
    const GradcheckOptions& options) {
  if (options.eps <= 0.0) {
    throw ContractError("gradcheck: eps must be positive");
  }
  for (auto& leaf : leaves) {
    if (!leaf.isLeaf() || !leaf.requiresGrad()) {
      throw ContractError("gradcheck: every checked tensor must be a requires-grad leaf");
    }
    leaf.zeroGrad();
  }
  loss().backward();

  Rng rng(options.seed);
  GradcheckResult result;
  const double base = evalScalar(loss);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    std::vector<double> analytic(leaf.numel(), 0.0);
    if (leaf.hasGrad()) {
      std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());
    }
    std::vector<std::size_t> entries(leaf.numel());
    std::iota(entries.begin(), entries.end(), 0);
    if (options.maxEntriesPerTensor > 0 && entries.size() > options.maxEntriesPerTensor) {
      for (std::size_t i = 0; i < options.maxEntriesPerTensor; ++i) {
        std::swap(entries[i], entries[i + rng.uniformInt(entries.size() - i)]);
      }
      entries.resize(options.maxEntriesPerTensor);
    }
    auto values = leaf.mutableData();
    for (auto idx : entries) {
      const double original = values[idx];
      values[idx] = original + options.eps;
      const double plus = evalScalar(loss);
      values[idx] = original - options.eps;
      const double minus = evalScalar(loss);
      values[idx] = original;

      const double right = (plus - base) / options.eps;
      const double left = (base - minus) / options.eps;
      if (std::abs(right - left) >
          options.kinkTolerance * std::max(1.0, std::abs(right) + std::abs(left))) {
        ++result.skipped;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double a = analytic[idx];
      const double err =
          std::abs(a - numeric) / std::max(options.denominatorFloor, std::abs(a) + std::abs(numeric));
      if (err > result.maxRelativeError) {
        result.maxRelativeError = err;
        result.worstTensor = li;
        result.worstEntry = idx;
        result.worstAnalytic = a;
        result.worstNumeric = numeric;
      }
      ++result.checked;
    }
  }
  return result;
}

double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  auto leaf = Tensor::fromVector(x.shape(), x.toVector(), true);
  GradcheckOptions options;
  options.eps = eps;
  auto result = gradcheckParams(
      [&] {
        auto y = f(leaf);
        return y.numel() == 1 ? y : sum(y);
      },
      {leaf}, options);
  return result.maxRelativeError;
}

} // namespace salsa
