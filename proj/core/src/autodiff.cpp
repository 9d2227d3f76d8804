#include "fbff/autodiff.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace fbff::ad {
namespace {

using NodePtr = std::shared_ptr<Node>;

Tensor make(Matrix value, std::vector<NodePtr> inputs,
            std::function<void(Node&)> backprop) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in->requires_grad;
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

// Adds g into the gradient of n, reducing when n is a broadcast scalar.
void accumulate(Node& n, const Matrix& g) {
  if (!n.requires_grad) return;
  n.ensure_grad();
  if (n.value.size() == 1 && g.size() != 1)
    n.grad(0, 0) += g.sum();
  else
    n.grad += g;
}

template <typename Fn>
Matrix broadcast(const Matrix& a, const Matrix& b, Fn fn) {
  if (a.rows() == b.rows() && a.cols() == b.cols())
    return fn(a.array(), b.array()).matrix();
  if (a.size() == 1)
    return fn(Matrix::Constant(b.rows(), b.cols(), a(0, 0)).array(), b.array())
        .matrix();
  if (b.size() == 1)
    return fn(a.array(), Matrix::Constant(a.rows(), a.cols(), b(0, 0)).array())
        .matrix();
  throw std::invalid_argument("shape mismatch in elementwise op");
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return Matrix::Constant(rows, cols, m(0, 0));
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  Matrix out = fwd(x.value());
  return make(out, {x.node()}, [deriv](Node& self) {
    Node& in = *self.inputs[0];
    accumulate(in, (self.grad.array() * deriv(in.value, self.value).array())
                       .matrix());
  });
}

double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double softplus_scalar(double v) {
  return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

}  // namespace

const Matrix& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor");
  return node_->value(0, 0);
}

void Tensor::zero_grad() {
  if (node_) node_->grad.setZero(node_->value.rows(), node_->value.cols());
}

Tensor constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Tensor variable(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->ensure_grad();
  return Tensor(std::move(node));
}

Tensor variable(double value) { return variable(Matrix::Constant(1, 1, value)); }

void backward(const Tensor& root) {
  if (!root) throw std::invalid_argument("backward on empty tensor");
  if (!root.is_scalar())
    throw std::invalid_argument("backward requires a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second)
        stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (!n->is_leaf()) n->grad.setZero(n->value.rows(), n->value.cols());
  root.node()->ensure_grad();
  root.node()->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (!(*it)->is_leaf()) (*it)->backprop(**it);
}

Tensor stop_gradient(const Tensor& x) { return constant(x.value()); }

Tensor operator+(const Tensor& a, const Tensor& b) {
  Matrix out = broadcast(a.value(), b.value(), [](auto x, auto y) { return x + y; });
  return make(out, {a.node(), b.node()}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], self.grad);
  });
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  Matrix out = broadcast(a.value(), b.value(), [](auto x, auto y) { return x - y; });
  return make(out, {a.node(), b.node()}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], -self.grad);
  });
}

Tensor operator*(const Tensor& a, const Tensor& b) {
  Matrix out = broadcast(a.value(), b.value(), [](auto x, auto y) { return x * y; });
  return make(out, {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    const auto r = self.value.rows();
    const auto c = self.value.cols();
    if (x.requires_grad)
      accumulate(x, (self.grad.array() * expand(y.value, r, c).array()).matrix());
    if (y.requires_grad)
      accumulate(y, (self.grad.array() * expand(x.value, r, c).array()).matrix());
  });
}

Tensor operator/(const Tensor& a, const Tensor& b) {
  Matrix out = broadcast(a.value(), b.value(), [](auto x, auto y) { return x / y; });
  return make(out, {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    const auto r = self.value.rows();
    const auto c = self.value.cols();
    const Matrix yv = expand(y.value, r, c);
    if (x.requires_grad) accumulate(x, (self.grad.array() / yv.array()).matrix());
    if (y.requires_grad)
      accumulate(y, (-self.grad.array() * self.value.array() / yv.array()).matrix());
  });
}

Tensor operator-(const Tensor& a) {
  return make(-a.value(), {a.node()},
              [](Node& self) { accumulate(*self.inputs[0], -self.grad); });
}

Tensor operator+(const Tensor& a, double b) { return a + constant(b); }
Tensor operator+(double a, const Tensor& b) { return constant(a) + b; }
Tensor operator-(const Tensor& a, double b) { return a - constant(b); }
Tensor operator-(double a, const Tensor& b) { return constant(a) - b; }

Tensor operator*(const Tensor& a, double b) {
  return make(a.value() * b, {a.node()},
              [b](Node& self) { accumulate(*self.inputs[0], self.grad * b); });
}
Tensor operator*(double a, const Tensor& b) { return b * a; }
Tensor operator/(const Tensor& a, double b) { return a * (1.0 / b); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul shape mismatch");
  Matrix out = a.value() * b.value();
  return make(out, {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) {
      x.ensure_grad();
      x.grad.noalias() += self.grad * y.value.transpose();
    }
    if (y.requires_grad) {
      y.ensure_grad();
      y.grad.noalias() += x.value.transpose() * self.grad;
    }
  });
}

Tensor exp(const Tensor& x) {
  return unary(
      x,
      [](const Matrix& v) {
        return Matrix(v.array().min(kExpClamp).exp().matrix());
      },
      [](const Matrix& in, const Matrix& out) {
        // Zero slope past the clamp.
        return Matrix((in.array() > kExpClamp).select(0.0, out.array()).matrix());
      });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](const Matrix& v) { return Matrix(v.array().log().matrix()); },
      [](const Matrix& in, const Matrix&) {
        return Matrix(in.array().inverse().matrix());
      });
}

Tensor log1p(const Tensor& x) {
  return unary(
      x, [](const Matrix& v) { return Matrix(v.array().log1p().matrix()); },
      [](const Matrix& in, const Matrix&) {
        return Matrix((1.0 + in.array()).inverse().matrix());
      });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x, [](const Matrix& v) { return Matrix(v.array().sqrt().matrix()); },
      [](const Matrix&, const Matrix& out) {
        return Matrix((0.5 / out.array()).matrix());
      });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](const Matrix& v) { return Matrix(v.array().square().matrix()); },
      [](const Matrix& in, const Matrix&) { return Matrix(2.0 * in); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](const Matrix& v) { return Matrix(v.array().tanh().matrix()); },
      [](const Matrix&, const Matrix& out) {
        return Matrix((1.0 - out.array().square()).matrix());
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](const Matrix& v) { return Matrix(v.unaryExpr(&sigmoid_scalar)); },
      [](const Matrix&, const Matrix& out) {
        return Matrix((out.array() * (1.0 - out.array())).matrix());
      });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, [](const Matrix& v) { return Matrix(v.unaryExpr(&softplus_scalar)); },
      [](const Matrix& in, const Matrix&) {
        return Matrix(in.unaryExpr(&sigmoid_scalar));
      });
}

Tensor swish(const Tensor& x) {
  return unary(
      x,
      [](const Matrix& v) {
        return Matrix((v.array() * v.unaryExpr(&sigmoid_scalar).array()).matrix());
      },
      [](const Matrix& in, const Matrix&) {
        const Eigen::ArrayXXd s = in.unaryExpr(&sigmoid_scalar).array();
        return Matrix((s * (1.0 + in.array() * (1.0 - s))).matrix());
      });
}

Tensor lgamma(const Tensor& x) {
  return unary(
      x,
      [](const Matrix& v) {
        return Matrix(v.unaryExpr([](double a) { return std::lgamma(a); }));
      },
      [](const Matrix& in, const Matrix&) {
        return Matrix(
            in.unaryExpr([](double a) { return boost::math::digamma(a); }));
      });
}

Tensor sum(const Tensor& x) {
  return make(Matrix::Constant(1, 1, x.value().sum()), {x.node()},
              [](Node& self) {
                Node& in = *self.inputs[0];
                accumulate(in, Matrix::Constant(in.value.rows(), in.value.cols(),
                                                self.grad(0, 0)));
              });
}

Tensor mean(const Tensor& x) {
  return sum(x) * (1.0 / static_cast<double>(x.size()));
}

Tensor layer_norm(const Tensor& x, double eps) {
  if (x.cols() != 1) throw std::invalid_argument("layer_norm expects a column");
  const double n = static_cast<double>(x.rows());
  const double mu = x.value().mean();
  const Vector centered = x.value().array() - mu;
  const double var = centered.squaredNorm() / n;
  const double inv_std = 1.0 / std::sqrt(var + eps);
  Matrix out = centered * inv_std;
  return make(out, {x.node()}, [inv_std, n](Node& self) {
    // dx = inv_std * (g - mean(g) - y * mean(g*y))
    const Vector& g = self.grad;
    const Vector& y = self.value;
    const double gm = g.mean();
    const double gy = g.dot(y) / n;
    accumulate(*self.inputs[0],
               (inv_std * (g.array() - gm - y.array() * gy)).matrix());
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  Eigen::Index rows = 0;
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) {
    if (p.cols() != 1) throw std::invalid_argument("concat expects columns");
    rows += p.rows();
    inputs.push_back(p.node());
  }
  Matrix out(rows, 1);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make(out, std::move(inputs), [](Node& self) {
    Eigen::Index offset = 0;
    for (auto& in : self.inputs) {
      const auto r = in->value.rows();
      if (in->requires_grad) {
        in->ensure_grad();
        in->grad += self.grad.middleRows(offset, r);
      }
      offset += r;
    }
  });
}

Tensor slice(const Tensor& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.rows())
    throw std::out_of_range("slice out of range");
  Matrix out = x.value().middleRows(start, count);
  return make(out, {x.node()}, [start, count](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    in.grad.middleRows(start, count) += self.grad;
  });
}

Tensor logaddexp(const Tensor& a, const Tensor& b) {
  if (!a.is_scalar() || !b.is_scalar())
    throw std::invalid_argument("logaddexp expects scalars");
  const double x = a.item();
  const double y = b.item();
  const double m = std::max(x, y);
  double out;
  double wa;
  if (m == -std::numeric_limits<double>::infinity()) {
    out = m;
    wa = 0.5;
  } else {
    out = m + std::log(std::exp(x - m) + std::exp(y - m));
    wa = std::exp(x - out);
  }
  return make(Matrix::Constant(1, 1, out), {a.node(), b.node()},
              [wa](Node& self) {
                const double g = self.grad(0, 0);
                accumulate(*self.inputs[0], Matrix::Constant(1, 1, g * wa));
                accumulate(*self.inputs[1], Matrix::Constant(1, 1, g * (1.0 - wa)));
              });
}

double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Matrix& x, double eps) {
  if (eps <= 0) throw std::invalid_argument("grad_check: eps must be positive");
  Tensor input = variable(x);
  Tensor out = f(input);
  if (std::isnan(out.item())) throw std::domain_error("grad_check: f(x) is NaN");
  backward(out);
  const Matrix analytic = input.grad();

  double worst = 0.0;
  Matrix probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe(i);
    probe(i) = orig + eps;
    const double up = f(constant(probe)).item();
    probe(i) = orig - eps;
    const double down = f(constant(probe)).item();
    probe(i) = orig;
    if (std::isnan(up) || std::isnan(down))
      throw std::domain_error("grad_check: f is NaN near x");
    const double numeric = (up - down) / (2.0 * eps);
    const double err =
        std::abs(analytic(i) - numeric) / std::max(1.0, std::abs(analytic(i)));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace fbff::ad
