#pragma once

#include <cstddef>
#include <vector>

#include "salsa/tensor.h"

namespace salsa {

class Rng;

/// Persistent power-iteration state attached to one weight matrix.
struct SpecNormState {
  /// Left singular-vector estimate, unit length, one entry per row of W.
  std::vector<double> u;
  /// Most recent spectral-norm estimate, used as the divisor.
  double sigma = 1.0;
  int powerIterations = 1;
  /// When set, forward passes reuse `sigma` and never touch `u`.
  bool frozen = false;
  std::size_t updates = 0;
};

struct PowerIterationResult {
  double sigma = 0.0;
  std::vector<double> u;
};

/// One step: v = normalize(W^T u), u' = normalize(W v), sigma = u'^T W v.
PowerIterationResult powerIterationStep(const Tensor& weight, const std::vector<double>& u);

/// State with a random unit u refined by `warmupIterations` steps.
SpecNormState makeSpecNormState(
    const Tensor& weight,
    Rng& rng,
    int powerIterations = 1,
    int warmupIterations = 15);

/// W / sigma(W). When `update` is set and the state is not frozen, runs the
/// configured number of power-iteration steps first. The divisor is a
/// constant in the graph: gradients flow as W / sigma.
Tensor spectralNormalize(const Tensor& weight, SpecNormState& state, bool update);

/// Largest singular value from power iteration on the Gram matrix W^T W,
/// iterated to relative convergence 1e-12 from two starting vectors.
/// Independent of powerIterationStep; used as a test oracle.
double exactSpectralNorm(const Tensor& weight);

} // namespace salsa
