#include "cgan/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "cgan/errors.hpp"

namespace cgan::ad {

ValuePtr make_leaf(Matrix data, std::string op_tag) {
  return std::make_shared<Value>(std::move(data), std::move(op_tag));
}

namespace {

void check_same_shape(const ValuePtr& a, const ValuePtr& b, const char* where) {
  if (a->rows() != b->rows() || a->cols() != b->cols())
    throw ShapeError(std::string(where) + ": shape mismatch " + std::to_string(a->rows()) + "x" +
                     std::to_string(a->cols()) + " vs " + std::to_string(b->rows()) + "x" +
                     std::to_string(b->cols()));
}

ValuePtr make_node(Matrix data, std::string op, std::vector<ValuePtr> parents,
                   std::function<void(Value&)> back) {
  auto node = std::make_shared<Value>(std::move(data), std::move(op));
  node->parents = std::move(parents);
  node->backward_fn = std::move(back);
  return node;
}

}  // namespace

ValuePtr add(const ValuePtr& a, const ValuePtr& b) {
  check_same_shape(a, b, "add");
  return make_node(a->data + b->data, "add", {a, b}, [a, b](Value& self) {
    a->grad += self.grad;
    b->grad += self.grad;
  });
}

ValuePtr mul(const ValuePtr& a, const ValuePtr& b) {
  check_same_shape(a, b, "mul");
  return make_node(a->data.cwiseProduct(b->data), "mul", {a, b}, [a, b](Value& self) {
    a->grad += self.grad.cwiseProduct(b->data);
    b->grad += self.grad.cwiseProduct(a->data);
  });
}

ValuePtr affine(const ValuePtr& x, double scale, double shift) {
  Matrix out = (x->data.array() * scale + shift).matrix();
  return make_node(std::move(out), "affine", {x},
                   [x, scale](Value& self) { x->grad += scale * self.grad; });
}

ValuePtr leaky_relu(const ValuePtr& x, double negative_slope) {
  Matrix out = x->data.unaryExpr(
      [negative_slope](double v) { return v > 0.0 ? v : negative_slope * v; });
  return make_node(std::move(out), "leaky_relu", {x}, [x, negative_slope](Value& self) {
    x->grad.array() += self.grad.array() * x->data.array().unaryExpr([negative_slope](double v) {
      return v > 0.0 ? 1.0 : negative_slope;
    });
  });
}

ValuePtr sigmoid(const ValuePtr& x) {
  Matrix out = x->data.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  auto node = make_node(std::move(out), "sigmoid", {x}, nullptr);
  // sigma' = sigma * (1 - sigma), read from the stored output
  node->backward_fn = [x](Value& self) {
    x->grad.array() += self.grad.array() * self.data.array() * (1.0 - self.data.array());
  };
  return node;
}

ValuePtr log(const ValuePtr& x) {
  Matrix out = x->data.array().log().matrix();
  return make_node(std::move(out), "log", {x}, [x](Value& self) {
    x->grad.array() += self.grad.array() / x->data.array();
  });
}

ValuePtr clamp(const ValuePtr& x, double lo, double hi) {
  Matrix out = x->data.unaryExpr([lo, hi](double v) { return std::min(std::max(v, lo), hi); });
  return make_node(std::move(out), "clamp", {x}, [x, lo, hi](Value& self) {
    x->grad.array() +=
        self.grad.array() *
        ((x->data.array() >= lo) && (x->data.array() <= hi)).cast<double>();
  });
}

ValuePtr square(const ValuePtr& x) {
  return make_node(x->data.cwiseProduct(x->data), "square", {x}, [x](Value& self) {
    x->grad.array() += self.grad.array() * 2.0 * x->data.array();
  });
}

ValuePtr mean_all(const ValuePtr& x) {
  const double n = static_cast<double>(x->data.size());
  Matrix out(1, 1);
  out(0, 0) = x->data.sum() / n;
  return make_node(std::move(out), "mean_all", {x}, [x, n](Value& self) {
    x->grad.array() += self.grad(0, 0) / n;
  });
}

ValuePtr sum_all(const ValuePtr& x) {
  Matrix out(1, 1);
  out(0, 0) = x->data.sum();
  return make_node(std::move(out), "sum_all", {x},
                   [x](Value& self) { x->grad.array() += self.grad(0, 0); });
}

ValuePtr vstack(const ValuePtr& a, const ValuePtr& b) {
  if (a->cols() != b->cols())
    throw ShapeError("vstack: column mismatch " + std::to_string(a->cols()) + " vs " +
                     std::to_string(b->cols()));
  Matrix out(a->rows() + b->rows(), a->cols());
  out.topRows(a->rows()) = a->data;
  out.bottomRows(b->rows()) = b->data;
  const Eigen::Index split = a->rows();
  return make_node(std::move(out), "vstack", {a, b}, [a, b, split](Value& self) {
    a->grad += self.grad.topRows(split);
    b->grad += self.grad.bottomRows(self.grad.rows() - split);
  });
}

ValuePtr rows(const ValuePtr& x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 1 || begin + count > x->rows())
    throw ShapeError("rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + std::to_string(x->rows()) + " rows");
  return make_node(x->data.middleRows(begin, count), "rows", {x}, [x, begin, count](Value& self) {
    x->grad.middleRows(begin, count) += self.grad;
  });
}

ValuePtr linear(const ValuePtr& x, const ValuePtr& weight, const ValuePtr& bias) {
  if (x->cols() != weight->cols())
    throw ShapeError("linear: input has " + std::to_string(x->cols()) + " features, weight expects " +
                     std::to_string(weight->cols()));
  if (bias->rows() != 1 || bias->cols() != weight->rows())
    throw ShapeError("linear: bias must be 1x" + std::to_string(weight->rows()));
  Matrix out = x->data * weight->data.transpose();
  out.rowwise() += bias->data.row(0);
  return make_node(std::move(out), "linear", {x, weight, bias}, [x, weight, bias](Value& self) {
    x->grad.noalias() += self.grad * weight->data;
    weight->grad.noalias() += self.grad.transpose() * x->data;
    bias->grad.row(0) += self.grad.colwise().sum();
  });
}

Matrix aggregate(const Matrix& fast, int window_len) {
  if (window_len < 1 || fast.cols() % window_len != 0)
    throw ShapeError("aggregate: " + std::to_string(fast.cols()) +
                     " columns not divisible by window length " + std::to_string(window_len));
  const Eigen::Index s = fast.cols() / window_len;
  Matrix slow(fast.rows(), s);
  for (Eigen::Index j = 0; j < s; ++j)
    slow.col(j) = fast.middleCols(j * window_len, window_len).rowwise().mean();
  return slow;
}

ValuePtr aggregate_windows(const ValuePtr& fast, int window_len) {
  Matrix slow = aggregate(fast->data, window_len);
  const Eigen::Index s = slow.cols();
  return make_node(std::move(slow), "aggregate", {fast}, [fast, window_len, s](Value& self) {
    for (Eigen::Index j = 0; j < s; ++j)
      fast->grad.middleCols(j * window_len, window_len).colwise() +=
          (self.grad.col(j) / static_cast<double>(window_len)).eval();
  });
}

void backward(const ValuePtr& root) {
  if (!root->is_scalar())
    throw std::invalid_argument("backward: root must be a 1x1 scalar loss, got " +
                                std::to_string(root->rows()) + "x" + std::to_string(root->cols()));

  // Iterative post-order DFS; each node enters `order` exactly once.
  std::vector<Value*> order;
  std::unordered_set<Value*> visited;
  std::vector<std::pair<Value*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Value* child = node->parents[next_child++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad.setConstant(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

}  // namespace cgan::ad
