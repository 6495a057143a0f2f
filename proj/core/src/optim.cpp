#include "taxogate/optim.hpp"

#include <algorithm>
#include <cmath>

namespace taxogate {

void sgd_step(ParamStore& store, double learning_rate) {
  for (auto& [name, t] : store.tensors()) {
    for (const double g : t.grad) {
      if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient in " + name);
    }
  }
  for (auto& [name, t] : store.tensors()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      t.values[i] -= learning_rate * t.grad[i];
      t.grad[i] = 0.0;
    }
  }
}

double clip_grad_norm(ParamStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, t] : store.tensors()) {
    for (const double g : t.grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [_, t] : store.tensors()) {
      for (double& g : t.grad) g *= scale;
    }
  }
  return norm;
}

PlateauScheduler::PlateauScheduler(double initial_lr, int patience, double factor, double min_lr)
    : lr_(initial_lr), patience_(patience), factor_(factor), min_lr_(min_lr), best_(0.0) {}

double PlateauScheduler::observe(double metric) {
  if (!seen_ || metric < best_) {
    best_ = metric;
    seen_ = true;
    stale_ = 0;
    return lr_;
  }
  if (++stale_ > patience_) {
    lr_ = std::max(min_lr_, lr_ * factor_);
    stale_ = 0;
  }
  return lr_;
}

}  // namespace taxogate
