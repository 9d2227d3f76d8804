#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen arrays.
//
// A Tensor is a cheap handle onto a graph node. Every operation allocates a
// new node that remembers its inputs and a closure that pushes the node's
// gradient back into them. The graph is rebuilt for every training step.
//
// Leaves created with variable() accumulate gradient across backward() calls
// until zero_grad(); interior nodes are reset at the start of every call.

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace fbff::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// exp() inputs are clamped to this before exponentiation.
inline constexpr double kExpClamp = 30.0;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backprop;

  bool is_leaf() const { return !backprop; }
  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Matrix::Zero(value.rows(), value.cols());
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const;
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_scalar() const { return size() == 1; }
  double item() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

// Leaves.
Tensor constant(Matrix value);
Tensor constant(double value);
Tensor variable(Matrix value);
Tensor variable(double value);

// Backward pass from a scalar root. Throws std::invalid_argument otherwise.
void backward(const Tensor& root);

Tensor stop_gradient(const Tensor& x);

// Elementwise arithmetic; a 1x1 operand broadcasts against any shape.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator+(const Tensor& a, double b);
Tensor operator+(double a, const Tensor& b);
Tensor operator-(const Tensor& a, double b);
Tensor operator-(double a, const Tensor& b);
Tensor operator*(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(const Tensor& a, double b);

/// Matrix product a·b.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor exp(const Tensor& x);  // input clamped at kExpClamp
Tensor log(const Tensor& x);
Tensor log1p(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor swish(const Tensor& x);
Tensor lgamma(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Normalizes a column vector to zero mean and unit variance (no affine part).
Tensor layer_norm(const Tensor& x, double eps = 1e-5);

/// Vertical concatenation of column vectors.
Tensor concat(const std::vector<Tensor>& parts);
/// Rows [start, start + count) of a column vector.
Tensor slice(const Tensor& x, Eigen::Index start, Eigen::Index count);

/// log(exp(a) + exp(b)) for scalars, stable for -inf operands.
Tensor logaddexp(const Tensor& a, const Tensor& b);

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
/// for a scalar function. Throws std::domain_error if f yields NaN.
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Matrix& x, double eps = 1e-5);

}  // namespace fbff::ad
