#pragma once

#include <cstdint>
#include <vector>

#include "cgan/autodiff.hpp"

namespace cgan {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Holds first/second moment accumulators per
/// registered parameter; step() applies the update and clears the gradients.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<ad::ValuePtr> params, AdamConfig cfg = {});

  /// Throws TrainingAbort when any gradient is non-finite.
  void step();

  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<ad::ValuePtr>& params() const { return params_; }

 private:
  std::vector<ad::ValuePtr> params_;
  std::vector<ad::Matrix> first_moment_;
  std::vector<ad::Matrix> second_moment_;
  AdamConfig cfg_;
  std::int64_t step_count_ = 0;
};

}  // namespace cgan
