#include "cgan/optimizer.hpp"

#include <cmath>

#include "cgan/errors.hpp"

namespace cgan {

AdamOptimizer::AdamOptimizer(std::vector<ad::ValuePtr> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (const auto& p : params_) {
    first_moment_.push_back(ad::Matrix::Zero(p->rows(), p->cols()));
    second_moment_.push_back(ad::Matrix::Zero(p->rows(), p->cols()));
  }
}

void AdamOptimizer::step() {
  for (const auto& p : params_)
    if (!p->grad.allFinite())
      throw TrainingAbort("optimizer: non-finite gradient in parameter '" + p->op +
                          "' at step " + std::to_string(step_count_ + 1));

  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    auto& m = first_moment_[i];
    auto& v = second_moment_[i];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    p.data.array() -=
        cfg_.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.epsilon);
    p.zero_grad();
  }
}

}  // namespace cgan
