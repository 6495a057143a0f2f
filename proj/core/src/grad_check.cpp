#include "taxogate/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "taxogate/rng.hpp"

namespace taxogate {

namespace {

std::string describe(const GradCheckReport& r) {
  std::ostringstream os;
  os << "gradient check failed at " << r.worst_tensor << "[" << r.worst_index
     << "]: analytic " << r.worst_analytic << " vs numeric " << r.worst_numeric
     << " (rel error " << r.worst_rel_error << ")";
  return os.str();
}

}  // namespace

GradCheckFailed::GradCheckFailed(GradCheckReport r) : std::runtime_error(describe(r)), report(std::move(r)) {}

GradCheckReport grad_check(const LossFn& loss, ParamStore& store, const GradCheckOptions& opt) {
  store.zero_grad();
  loss(true);

  std::vector<std::pair<ParamTensor*, std::size_t>> coords;
  for (auto& [_, t] : store.tensors()) {
    for (std::size_t i = 0; i < t.size(); ++i) coords.emplace_back(&t, i);
  }
  if (coords.size() > opt.max_coordinates) {
    CounterRng rng(derive_seed(opt.seed, "grad_check"));
    rng.shuffle(coords);
    coords.resize(opt.max_coordinates);
  }

  GradCheckReport report;
  for (auto& [tensor, i] : coords) {
    const double analytic = tensor->grad[i];
    const double saved = tensor->values[i];
    tensor->values[i] = saved + opt.epsilon;
    const double up = loss(false);
    tensor->values[i] = saved - opt.epsilon;
    const double down = loss(false);
    tensor->values[i] = saved;
    const double numeric = (up - down) / (2.0 * opt.epsilon);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), opt.scale_floor});
    const double rel = std::abs(analytic - numeric) / scale;
    ++report.coordinates_checked;
    if (rel > report.worst_rel_error || report.worst_tensor.empty()) {
      report.worst_rel_error = rel;
      report.worst_tensor = tensor->name;
      report.worst_index = i;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  store.zero_grad();
  if (!report.passed(opt.tolerance)) throw GradCheckFailed(report);
  return report;
}

}  // namespace taxogate
