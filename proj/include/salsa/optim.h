#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "salsa/parameter_store.h"

namespace salsa {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a fixed list of parameters. Parameters
/// without a gradient buffer are skipped for the step.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg);

  /// Throws TrainingDivergence naming the first parameter whose gradient is
  /// not finite; no parameter is modified in that case.
  void step();
  void zeroGrad();

  const AdamConfig& config() const {
    return cfg_;
  }
  const std::vector<Parameter*>& parameters() const {
    return params_;
  }
  std::size_t steps() const {
    return t_;
  }

  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  const std::vector<Moments>& moments() const {
    return moments_;
  }
  void restore(std::size_t steps, std::vector<Moments> moments);

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Moments> moments_;
};

/// Global L2 norm of the gradients; rescales them to maxNorm when larger.
/// Returns the norm before clipping.
double clipGradNorm(const std::vector<Parameter*>& params, double maxNorm);

/// TrainingDivergence naming the first parameter with a non-finite gradient.
void requireFiniteGradients(const std::vector<Parameter*>& params);

} // namespace salsa
