#include "salsa/specnorm.h"

#include <algorithm>
#include <cmath>

#include "salsa/error.h"
#include "salsa/ops.h"
#include "salsa/rng.h"

namespace salsa {

namespace {

void requireMatrix(const Tensor& w, const char* op) {
  if (w.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shapeString(w.shape()));
  }
}

double normalizeInPlace(std::vector<double>& x) {
  double ss = 0.0;
  for (double v : x) {
    ss += v * v;
  }
  const double n = std::sqrt(ss);
  if (n == 0.0) {
    return 0.0;
  }
  for (double& v : x) {
    v /= n;
  }
  return n;
}

} // namespace

PowerIterationResult powerIterationStep(const Tensor& weight, const std::vector<double>& u) {
  requireMatrix(weight, "powerIterationStep");
  const auto m = weight.dim(0);
  const auto n = weight.dim(1);
  if (u.size() != m) {
    throw DimensionError(
        "powerIterationStep: u has " + std::to_string(u.size()) + " entries, W has " +
        std::to_string(m) + " rows");
  }
  const auto w = weight.data();
  std::vector<double> v(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      v[j] += w[i * n + j] * u[i];
    }
  }
  if (normalizeInPlace(v) == 0.0) {
    throw DegenerateMatrixError("powerIterationStep: W^T u vanished (zero matrix?)");
  }
  PowerIterationResult result;
  result.u.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      s += w[i * n + j] * v[j];
    }
    result.u[i] = s;
  }
  std::vector<double> wv = result.u;
  if (normalizeInPlace(result.u) == 0.0) {
    throw DegenerateMatrixError("powerIterationStep: W v vanished");
  }
  for (std::size_t i = 0; i < m; ++i) {
    result.sigma += result.u[i] * wv[i];
  }
  return result;
}

SpecNormState makeSpecNormState(
    const Tensor& weight,
    Rng& rng,
    int powerIterations,
    int warmupIterations) {
  requireMatrix(weight, "makeSpecNormState");
  if (powerIterations < 1) {
    throw ConfigError("spectral norm: powerIterations must be >= 1");
  }
  SpecNormState state;
  state.powerIterations = powerIterations;
  state.u.resize(weight.dim(0));
  for (auto& x : state.u) {
    x = rng.normal();
  }
  if (normalizeInPlace(state.u) == 0.0) {
    state.u.assign(state.u.size(), 0.0);
    state.u[0] = 1.0;
  }
  for (int i = 0; i < warmupIterations; ++i) {
    auto step = powerIterationStep(weight, state.u);
    state.u = std::move(step.u);
    state.sigma = step.sigma;
  }
  if (warmupIterations == 0) {
    state.sigma = powerIterationStep(weight, state.u).sigma;
  }
  return state;
}

Tensor spectralNormalize(const Tensor& weight, SpecNormState& state, bool update) {
  requireMatrix(weight, "spectralNormalize");
  if (update && !state.frozen) {
    for (int i = 0; i < state.powerIterations; ++i) {
      auto step = powerIterationStep(weight, state.u);
      state.u = std::move(step.u);
      state.sigma = step.sigma;
    }
    ++state.updates;
  }
  if (!(state.sigma > 0.0) || !std::isfinite(state.sigma)) {
    throw DegenerateMatrixError("spectralNormalize: non-positive spectral norm estimate");
  }
  return scale(weight, 1.0 / state.sigma);
}

double exactSpectralNorm(const Tensor& weight) {
  requireMatrix(weight, "exactSpectralNorm");
  const auto m = weight.dim(0);
  const auto n = weight.dim(1);
  const auto w = weight.data();
  std::vector<double> gram(n * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t a = 0; a < n; ++a) {
      const double wa = w[i * n + a];
      for (std::size_t b = 0; b < n; ++b) {
        gram[a * n + b] += wa * w[i * n + b];
      }
    }
  }
  auto run = [&](std::vector<double> x) {
    if (normalizeInPlace(x) == 0.0) {
      return 0.0;
    }
    double lambda = 0.0;
    std::vector<double> gx(n);
    for (int it = 0; it < 1000000; ++it) {
      for (std::size_t a = 0; a < n; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
          s += gram[a * n + b] * x[b];
        }
        gx[a] = s;
      }
      double rq = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        rq += x[a] * gx[a];
      }
      x = gx;
      if (normalizeInPlace(x) == 0.0) {
        return 0.0;
      }
      const bool converged = it > 0 && std::abs(rq - lambda) <= 1e-12 * std::abs(rq);
      lambda = rq;
      if (converged && it >= 20) {
        break;
      }
    }
    return lambda;
  };
  Rng rng(0x5EC7);
  std::vector<double> a(n);
  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.normal();
    b[i] = 1.0 + 0.5 * rng.normal();
  }
  const double lambda = std::max(run(a), run(b));
  return std::sqrt(std::max(lambda, 0.0));
}

} // namespace salsa
