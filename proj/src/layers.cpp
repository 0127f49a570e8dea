#include "cgan/layers.hpp"

#include <cmath>

#include "cgan/errors.hpp"

namespace cgan {

using ad::Matrix;
using ad::Value;
using ad::ValuePtr;

DenseLayer::DenseLayer(int in_features, int out_features, Activation act, Rng& rng,
                       double leaky_slope)
    : act_(act), leaky_slope_(leaky_slope) {
  if (in_features < 1 || out_features < 1)
    throw ConfigError("dense layer sizes must be positive");
  // Glorot-uniform init
  const double bound = std::sqrt(6.0 / (in_features + out_features));
  weight = ad::make_leaf(rng.uniform_matrix(out_features, in_features, -bound, bound), "weight");
  bias = ad::make_leaf(Matrix::Zero(1, out_features), "bias");
}

ValuePtr DenseLayer::forward(const ValuePtr& x) const {
  ValuePtr pre = ad::linear(x, weight, bias);
  switch (act_) {
    case Activation::LeakyRelu: return ad::leaky_relu(pre, leaky_slope_);
    case Activation::Sigmoid: return ad::sigmoid(pre);
    case Activation::Linear: return pre;
  }
  return pre;
}

BatchNormLayer::BatchNormLayer(int features, double momentum, double epsilon)
    : momentum_(momentum), epsilon_(epsilon) {
  if (features < 1) throw ConfigError("batch norm feature count must be positive");
  if (!(momentum > 0.0 && momentum < 1.0)) throw ConfigError("batch norm momentum must be in (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("batch norm epsilon must be positive");
  gamma = ad::make_leaf(Matrix::Ones(1, features), "gamma");
  beta = ad::make_leaf(Matrix::Zero(1, features), "beta");
  running_mean = Eigen::RowVectorXd::Zero(features);
  running_var = Eigen::RowVectorXd::Ones(features);
}

ValuePtr BatchNormLayer::forward(const ValuePtr& x) {
  if (x->cols() != gamma->cols())
    throw ShapeError("batch norm: expected " + std::to_string(gamma->cols()) + " features, got " +
                     std::to_string(x->cols()));
  const Eigen::Index n = x->rows();

  if (mode == Mode::Eval) {
    Eigen::RowVectorXd inv_std = (running_var.array() + epsilon_).sqrt().inverse();
    Matrix out = (x->data.rowwise() - running_mean).array().rowwise() * inv_std.array();
    out = (out.array().rowwise() * gamma->data.row(0).array()).rowwise() +
          beta->data.row(0).array();
    auto node = std::make_shared<Value>(std::move(out), "batchnorm_eval");
    node->parents = {x, gamma, beta};
    ValuePtr g = gamma, b = beta;
    Eigen::RowVectorXd mean_c = running_mean;
    node->backward_fn = [x, g, b, mean_c, inv_std](Value& self) {
      x->grad.array() +=
          self.grad.array().rowwise() * (g->data.row(0).array() * inv_std.array());
      Matrix xhat = (x->data.rowwise() - mean_c).array().rowwise() * inv_std.array();
      g->grad.row(0) += (self.grad.array() * xhat.array()).colwise().sum().matrix();
      b->grad.row(0) += self.grad.colwise().sum();
    };
    return node;
  }

  if (n < 2)
    throw ValidationError("batch norm: train mode needs batch size >= 2, got " +
                          std::to_string(n));

  Eigen::RowVectorXd mean = x->data.colwise().mean();
  Matrix centered = x->data.rowwise() - mean;
  Eigen::RowVectorXd var = centered.array().square().colwise().mean();
  Eigen::RowVectorXd inv_std = (var.array() + epsilon_).sqrt().inverse();
  Matrix xhat = centered.array().rowwise() * inv_std.array();

  // Running estimates use the unbiased batch variance.
  const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
  running_mean = momentum_ * running_mean + (1.0 - momentum_) * mean;
  running_var = momentum_ * running_var + (1.0 - momentum_) * (var * unbias);

  Matrix out = (xhat.array().rowwise() * gamma->data.row(0).array()).rowwise() +
               beta->data.row(0).array();
  auto node = std::make_shared<Value>(std::move(out), "batchnorm");
  node->parents = {x, gamma, beta};
  ValuePtr g = gamma, b = beta;
  auto xhat_copy = std::make_shared<Matrix>(std::move(xhat));
  node->backward_fn = [x, g, b, xhat_copy, inv_std, n](Value& self) {
    const Matrix& xh = *xhat_copy;
    Eigen::RowVectorXd sum_g = self.grad.colwise().sum();
    Eigen::RowVectorXd sum_gx = (self.grad.array() * xh.array()).colwise().sum();
    const double inv_n = 1.0 / static_cast<double>(n);
    // d/dx of the standardized value, vectorized over the batch
    Matrix dxhat = self.grad.array().rowwise() * g->data.row(0).array();
    Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
    Eigen::RowVectorXd sum_dxhat_x = (dxhat.array() * xh.array()).colwise().sum();
    Matrix dx = dxhat;
    dx.array().rowwise() -= (sum_dxhat * inv_n).array();
    dx.array() -= xh.array().rowwise() * (sum_dxhat_x * inv_n).array();
    dx.array().rowwise() *= inv_std.array();
    x->grad += dx;
    g->grad.row(0) += sum_gx;
    b->grad.row(0) += sum_g;
  };
  return node;
}

DropoutLayer::DropoutLayer(double rate, std::uint64_t seed) : rate_(rate), seed_(seed) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(rate));
}

ValuePtr DropoutLayer::forward(const ValuePtr& x) {
  if (mode == Mode::Eval || rate_ == 0.0) return x;
  Rng mask_rng(mix_seed(seed_, counter_++));
  const double keep = 1.0 - rate_;
  const double scale = 1.0 / keep;
  Matrix mask(x->rows(), x->cols());
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      mask(r, c) = mask_rng.canonical() < keep ? scale : 0.0;
  auto mask_copy = std::make_shared<Matrix>(std::move(mask));
  auto node = std::make_shared<Value>(x->data.cwiseProduct(*mask_copy), "dropout");
  node->parents = {x};
  node->backward_fn = [x, mask_copy](Value& self) {
    x->grad += self.grad.cwiseProduct(*mask_copy);
  };
  return node;
}

}  // namespace cgan
