#pragma once

#include <cstdint>

#include "cgan/autodiff.hpp"
#include "cgan/rng.hpp"

namespace cgan {

enum class Mode { Train, Eval };

enum class Activation { LeakyRelu, Sigmoid, Linear };

/// Fully connected layer y = act(x W^T + b).
class DenseLayer {
 public:
  DenseLayer(int in_features, int out_features, Activation act, Rng& rng,
             double leaky_slope = 0.2);

  ad::ValuePtr forward(const ad::ValuePtr& x) const;

  ad::ValuePtr weight;  // out x in
  ad::ValuePtr bias;    // 1 x out

  int in_features() const { return static_cast<int>(weight->cols()); }
  int out_features() const { return static_cast<int>(weight->rows()); }
  Activation activation() const { return act_; }

 private:
  Activation act_;
  double leaky_slope_;
};

/// Batch normalization over the batch dimension, one (gamma, beta) pair per
/// feature. Train mode standardizes with batch statistics and folds them into
/// the running estimates; eval mode applies the running estimates as a fixed
/// affine map.
class BatchNormLayer {
 public:
  BatchNormLayer(int features, double momentum = 0.9, double epsilon = 1e-5);

  /// Train mode requires batch size >= 2 (a single row has no batch variance).
  ad::ValuePtr forward(const ad::ValuePtr& x);

  ad::ValuePtr gamma;  // 1 x features
  ad::ValuePtr beta;   // 1 x features
  Eigen::RowVectorXd running_mean;
  Eigen::RowVectorXd running_var;
  Mode mode = Mode::Train;

  double momentum() const { return momentum_; }
  double epsilon() const { return epsilon_; }

 private:
  double momentum_;
  double epsilon_;
};

/// Inverted dropout: train mode zeroes units with probability `rate` and
/// scales survivors by 1/(1-rate); eval mode is the identity. The mask is a
/// pure function of (seed, step counter), so a given call sequence replays
/// exactly.
class DropoutLayer {
 public:
  DropoutLayer(double rate, std::uint64_t seed);

  ad::ValuePtr forward(const ad::ValuePtr& x);

  double rate() const { return rate_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t step_counter() const { return counter_; }
  void reset_counter(std::uint64_t value) { counter_ = value; }

  Mode mode = Mode::Train;

 private:
  double rate_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace cgan
