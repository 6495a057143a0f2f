#include "taxogate/param_store.hpp"

#include <functional>
#include <numeric>

#include "taxogate/rng.hpp"

namespace taxogate {

ConstMatrixMap ParamTensor::mat() const {
  return ConstMatrixMap(values.data(), static_cast<Eigen::Index>(rows()),
                        static_cast<Eigen::Index>(cols()));
}

MatrixMap ParamTensor::mat() {
  return MatrixMap(values.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

MatrixMap ParamTensor::grad_mat() {
  return MatrixMap(grad.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

Eigen::Map<const Vector> ParamTensor::vec() const {
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::Map<Vector> ParamTensor::grad_vec() {
  return Eigen::Map<Vector>(grad.data(), static_cast<Eigen::Index>(grad.size()));
}

ParamTensor& ParamStore::add_zeros(const std::string& name, std::vector<std::size_t> shape) {
  if (tensors_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  if (shape.empty() || shape.size() > 2) throw ShapeMismatch("parameter " + name + " must be 1-D or 2-D");
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  ParamTensor t{name, std::move(shape), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  return tensors_.emplace(name, std::move(t)).first->second;
}

ParamTensor& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
  ParamTensor& t = add_zeros(name, std::move(shape));
  CounterRng rng(derive_seed(seed_, name));
  for (double& v : t.values) v = rng.uniform(-init_.range, init_.range);
  return t;
}

ParamTensor& ParamStore::at(const std::string& name) {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

const ParamTensor& ParamStore::at(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : tensors_) std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.size();
  return n;
}

}  // namespace taxogate
