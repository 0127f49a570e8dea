#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cgan::ad {

using Matrix = Eigen::MatrixXd;

class Value;
using ValuePtr = std::shared_ptr<Value>;

/// One node of the reverse-mode computation graph. `data` is a dense tensor
/// (1x1 scalar, 1xN vector, or batch x dim); `grad` always has the same shape
/// and accumulates the adjoint during backward(). `op` tags the producing
/// operation, `parents` keeps the inputs alive and defines the DAG.
class Value {
 public:
  Matrix data;
  Matrix grad;
  std::string op;
  std::vector<ValuePtr> parents;

  /// Distributes this->grad into the parents' grads. Empty for leaves.
  std::function<void(Value&)> backward_fn;

  Value(Matrix d, std::string op_tag)
      : data(std::move(d)), grad(Matrix::Zero(data.rows(), data.cols())), op(std::move(op_tag)) {}

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }
  bool is_scalar() const { return data.rows() == 1 && data.cols() == 1; }
  double scalar() const { return data(0, 0); }

  void zero_grad() { grad.setZero(); }
};

/// Leaf node (input data or a trainable parameter).
ValuePtr make_leaf(Matrix data, std::string op_tag = "leaf");

// Elementwise / reduction ops. Each returns a fresh node wired to its inputs.
ValuePtr add(const ValuePtr& a, const ValuePtr& b);
ValuePtr mul(const ValuePtr& a, const ValuePtr& b);
/// scale * x + shift, elementwise.
ValuePtr affine(const ValuePtr& x, double scale, double shift);
ValuePtr leaky_relu(const ValuePtr& x, double negative_slope);
ValuePtr sigmoid(const ValuePtr& x);
ValuePtr log(const ValuePtr& x);
/// Clamp to [lo, hi]; gradient passes through inside the interval, zero outside.
ValuePtr clamp(const ValuePtr& x, double lo, double hi);
ValuePtr square(const ValuePtr& x);
/// Mean over all entries, returns a 1x1 node.
ValuePtr mean_all(const ValuePtr& x);
ValuePtr sum_all(const ValuePtr& x);

/// Row concatenation [a; b]; column counts must match.
ValuePtr vstack(const ValuePtr& a, const ValuePtr& b);

/// Rows [begin, begin + count) as a new node.
ValuePtr rows(const ValuePtr& x, Eigen::Index begin, Eigen::Index count);

/// x * W^T + b with x: batch x in, W: out x in, b: 1 x out broadcast over rows.
ValuePtr linear(const ValuePtr& x, const ValuePtr& weight, const ValuePtr& bias);

/// Column-block means: batch x (m*s) -> batch x s, output j = mean of columns
/// [j*m, (j+1)*m). The non-trainable aggregation step.
ValuePtr aggregate_windows(const ValuePtr& fast, int window_len);

/// Plain-matrix version of the same reduction.
Matrix aggregate(const Matrix& fast, int window_len);

/// Reverse pass from a scalar loss: seeds root.grad = 1 and visits each
/// reachable node exactly once in reverse topological order. Throws
/// std::invalid_argument when root is not 1x1.
void backward(const ValuePtr& root);

}  // namespace cgan::ad
