#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace taxogate {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A named parameter tensor with a gradient slot of the same shape. Tensors
/// are at most 2-D; a 1-D tensor of length n is viewed as an n x 1 matrix.
struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;

  std::size_t size() const noexcept { return values.size(); }
  std::size_t rows() const noexcept { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const noexcept { return shape.size() < 2 ? 1 : shape[1]; }

  ConstMatrixMap mat() const;
  MatrixMap mat();
  MatrixMap grad_mat();
  Eigen::Map<const Vector> vec() const;
  Eigen::Map<Vector> grad_vec();
};

struct InitSpec {
  double range = 0.08;  // uniform(-range, range)
};

/// Parameter tensors keyed by name, iterated in name order. Each tensor's
/// initial values depend only on (seed, name), so adding tensors later never
/// changes existing ones.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0, InitSpec init = {}) : seed_(seed), init_(init) {}

  ParamTensor& add(const std::string& name, std::vector<std::size_t> shape);
  /// Adds a tensor filled with zeros instead of the random init.
  ParamTensor& add_zeros(const std::string& name, std::vector<std::size_t> shape);

  ParamTensor& at(const std::string& name);
  const ParamTensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.contains(name); }

  void zero_grad();
  std::size_t parameter_count() const;

  std::map<std::string, ParamTensor>& tensors() noexcept { return tensors_; }
  const std::map<std::string, ParamTensor>& tensors() const noexcept { return tensors_; }

  std::uint64_t seed() const noexcept { return seed_; }
  const InitSpec& init() const noexcept { return init_; }

 private:
  std::uint64_t seed_;
  InitSpec init_;
  std::map<std::string, ParamTensor> tensors_;
};

}  // namespace taxogate
