#include <gtest/gtest.h>

#include <cmath>

#include "salsa/ops.h"
#include "salsa/rng.h"
#include "salsa/specnorm.h"

using namespace salsa;

TEST(SpecNorm, DiagonalMatrixSigma) {
  const auto w = Tensor::fromVector({3, 3}, {2, 0, 0, 0, -5, 0, 0, 0, 1});
  EXPECT_NEAR(exactSpectralNorm(w), 5.0, 1e-10);
}

TEST(SpecNorm, NormalizedWeightHasUnitNorm) {
  Rng rng(4);
  const auto w = Tensor::randn({6, 10}, rng, 1.0);
  auto state = makeSpecNormState(w, rng, 1, 200);
  const auto normalized = spectralNormalize(w, state, true);
  EXPECT_NEAR(exactSpectralNorm(normalized), 1.0, 1e-8);
}

TEST(SpecNorm, FrozenStateIsUntouched) {
  Rng rng(2);
  const auto w = Tensor::randn({4, 4}, rng, 1.0);
  auto state = makeSpecNormState(w, rng);
  state.frozen = true;
  const auto u = state.u;
  const double sigma = state.sigma;
  spectralNormalize(w, state, true);
  EXPECT_EQ(state.u, u);
  EXPECT_EQ(state.sigma, sigma);
}

TEST(SpecNorm, UpdateCountsSteps) {
  Rng rng(2);
  const auto w = Tensor::randn({4, 3}, rng, 1.0);
  auto state = makeSpecNormState(w, rng, 2, 0);
  spectralNormalize(w, state, true);
  spectralNormalize(w, state, false);
  EXPECT_EQ(state.updates, 1u);
}

TEST(SpecNorm, PowerStepKeepsUnitVector) {
  Rng rng(8);
  const auto w = Tensor::randn({5, 7}, rng, 1.0);
  const auto r = powerIterationStep(w, std::vector<double>(5, 1.0 / std::sqrt(5.0)));
  double s = 0.0;
  for (const double x : r.u) {
    s += x * x;
  }
  EXPECT_NEAR(s, 1.0, 1e-14);
  EXPECT_LE(r.sigma, exactSpectralNorm(w) * (1 + 1e-12));
}
