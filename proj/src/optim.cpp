#include "salsa/optim.h"

#include <cmath>

#include "salsa/error.h"

namespace salsa {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) {
    throw ConfigError("adam: learning rate must be positive");
  }
  if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0)) {
    throw ConfigError("adam: betas must be in [0, 1)");
  }
  if (!(cfg_.eps > 0.0)) {
    throw ConfigError("adam: eps must be positive");
  }
  moments_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    moments_[i].m.assign(params_[i]->value.numel(), 0.0);
    moments_[i].v.assign(params_[i]->value.numel(), 0.0);
  }
}

void requireFiniteGradients(const std::vector<Parameter*>& params) {
  for (const auto* p : params) {
    if (!p->value.hasGrad()) {
      continue;
    }
    for (double g : p->value.grad()) {
      if (!std::isfinite(g)) {
        throw TrainingDivergence("non-finite gradient in parameter '" + p->name + "'");
      }
    }
  }
}

void Adam::step() {
  requireFiniteGradients(params_);
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& value = params_[i]->value;
    if (!value.hasGrad()) {
      continue;
    }
    const auto g = value.grad();
    auto w = value.mutableData();
    auto& m = moments_[i].m;
    auto& v = moments_[i].v;
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      w[j] -= cfg_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
}

void Adam::zeroGrad() {
  for (auto* p : params_) {
    p->value.zeroGrad();
  }
}

void Adam::restore(std::size_t steps, std::vector<Moments> moments) {
  if (moments.size() != params_.size()) {
    throw DimensionError("adam: moment count does not match the parameter list");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (moments[i].m.size() != params_[i]->value.numel() ||
        moments[i].v.size() != params_[i]->value.numel()) {
      throw DimensionError("adam: moment shape mismatch for '" + params_[i]->name + "'");
    }
  }
  t_ = steps;
  moments_ = std::move(moments);
}

double clipGradNorm(const std::vector<Parameter*>& params, double maxNorm) {
  double ss = 0.0;
  for (const auto* p : params) {
    if (p->value.hasGrad()) {
      for (double g : p->value.grad()) {
        ss += g * g;
      }
    }
  }
  const double norm = std::sqrt(ss);
  if (norm > maxNorm && std::isfinite(norm)) {
    const double factor = maxNorm / norm;
    for (auto* p : params) {
      if (p->value.hasGrad()) {
        for (double& g : p->value.mutableGrad()) {
          g *= factor;
        }
      }
    }
  }
  return norm;
}

} // namespace salsa
