#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "taxogate/param_store.hpp"

namespace taxogate {

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Above this many coordinates a seeded subsample of this size is checked.
  std::size_t max_coordinates = 10000;
  /// Denominator floor for the relative error, so coordinates whose true
  /// gradient is ~0 are judged on absolute error.
  double scale_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  std::size_t coordinates_checked = 0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_rel_error = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tolerance) const { return worst_rel_error <= tolerance; }
};

class GradCheckFailed : public std::runtime_error {
 public:
  explicit GradCheckFailed(GradCheckReport report);
  GradCheckReport report;
};

/// Loss closure. With `accumulate` set it must add d(loss)/d(param) into the
/// store's gradient slots; otherwise it only evaluates.
using LossFn = std::function<double(bool accumulate)>;

/// Central finite differences against the analytic gradient. Throws
/// GradCheckFailed when the worst relative error exceeds the tolerance.
GradCheckReport grad_check(const LossFn& loss, ParamStore& store, const GradCheckOptions& opt = {});

}  // namespace taxogate
