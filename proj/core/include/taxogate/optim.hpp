#pragma once

#include <stdexcept>

#include "taxogate/param_store.hpp"

namespace taxogate {

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// values -= lr * grad, then zero the gradients.
void sgd_step(ParamStore& store, double learning_rate);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(ParamStore& store, double max_norm);

/// Halves the learning rate after `patience` evaluations without improvement
/// of a minimised metric.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, int patience = 10, double factor = 0.5, double min_lr = 1e-6);

  /// Records a metric value and returns the learning rate to use next.
  double observe(double metric);
  double learning_rate() const noexcept { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double min_lr_;
  double best_;
  int stale_ = 0;
  bool seen_ = false;
};

}  // namespace taxogate
