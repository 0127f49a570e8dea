#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cgan/autodiff.hpp"
#include "cgan/layers.hpp"
#include "cgan/optimizer.hpp"
#include "cgan/qp.hpp"

namespace cgan::gan {

enum class GenLossVariant { Minimax, NonSaturating };

/// Noise -> two dense+batchnorm+dropout blocks -> linear head producing the
/// projection inputs `a` -> hard projection onto the polytope -> window
/// aggregation. With constrained=false the projection stage is the identity
/// (the comparison baseline); everything else is unchanged.
class GeneratorModel {
 public:
  GeneratorModel(const qp::RampBoxPolytope& polytope, int noise_dim, int s, int hidden,
                 std::uint64_t seed, bool constrained, qp::SolverConfig solver);

  struct Output {
    ad::ValuePtr a;     // head output, batch x (m*s)
    ad::ValuePtr fast;  // projected profile (== a when unconstrained)
    ad::ValuePtr slow;  // aggregated windows, batch x s
  };
  Output forward(const ad::ValuePtr& noise);

  void set_mode(Mode mode);
  Mode mode() const { return mode_; }
  /// Trainable tensors in a fixed, documented order (checkpoint layout).
  std::vector<ad::ValuePtr> parameters();

  int noise_dim() const { return noise_dim_; }
  int s() const { return s_; }
  int profile_len() const { return polytope.window_len * s_; }
  bool constrained() const { return constrained_; }

  qp::RampBoxPolytope polytope;
  qp::SolverConfig solver;
  DenseLayer dense1, dense2, head;
  BatchNormLayer bn1, bn2;
  DropoutLayer drop1, drop2;
  long degenerate_windows = 0;  // backward passes that hit a rank-deficient KKT system

 private:
  int noise_dim_;
  int s_;
  bool constrained_;
  Mode mode_ = Mode::Train;
};

/// s aggregated readings -> two dense+batchnorm+dropout blocks -> sigmoid
/// probability of being real.
class DiscriminatorModel {
 public:
  DiscriminatorModel(int s, int hidden, std::uint64_t seed);

  ad::ValuePtr forward(const ad::ValuePtr& x);
  void set_mode(Mode mode);
  Mode mode() const { return mode_; }
  std::vector<ad::ValuePtr> parameters();

  int s() const { return s_; }

  DenseLayer dense1, dense2, output;
  BatchNormLayer bn1, bn2;
  DropoutLayer drop1, drop2;

 private:
  int s_;
  Mode mode_ = Mode::Train;
};

/// Plain-data forward pass: (fast profiles, aggregated values).
std::pair<ad::Matrix, ad::Matrix> generate(GeneratorModel& gen, const ad::Matrix& noise);

/// -1/2 mean log d_real - 1/2 mean log(1 - d_fake), probabilities clamped to
/// [1e-7, 1 - 1e-7] so the logs stay finite.
ad::ValuePtr discriminator_loss(const ad::ValuePtr& d_real, const ad::ValuePtr& d_fake);

/// Minimax: mean log(1 - d_fake). NonSaturating: -mean log d_fake. Both are
/// minimized by the generator; the non-saturating form keeps gradients alive
/// when the discriminator wins early.
ad::ValuePtr generator_loss(const ad::ValuePtr& d_fake, GenLossVariant variant);

struct TrainingConfig {
  int batch_size = 64;  // >= 2, batch statistics need more than one row
  long total_steps = 1000;
  int d_steps_per_g_step = 1;
  GenLossVariant gen_loss = GenLossVariant::NonSaturating;
  AdamConfig adam;
  std::uint64_t seed = 1;
  int max_consecutive_skips = 10;
  // Generator batch-norm refresh after the last step: running statistics are
  // re-estimated over this many 256-row noise batches with dropout disabled.
  // Training batches carry dropout noise, so the running variance learned
  // during the loop overstates the dropout-free activation spread and
  // eval-mode sampling comes out under-dispersed without the refresh.
  // 0 disables; zero-step runs never calibrate.
  int calibration_batches = 50;
};

/// Rows are training samples, columns the s aggregated readings per sample.
struct TrainingDataset {
  ad::Matrix samples;
};

/// Validates finiteness, nonnegativity and uniform length.
TrainingDataset make_dataset(const std::vector<Eigen::VectorXd>& samples);

struct StepRecord {
  long step = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double d_real_mean = 0.0;
  double d_fake_mean = 0.0;
};

struct TrainingHistory {
  std::vector<StepRecord> steps;  // one record per completed step
  long skipped_steps = 0;         // batches dropped after projection nonconvergence
};

/// Alternating updates: d_steps_per_g_step discriminator steps on a real
/// batch plus a detached generated batch, then one generator step whose
/// gradient flows through the aggregation and the projection layer. Every
/// discriminator evaluation runs real and generated samples through one
/// concatenated batch so the batch statistics are shared; split batches
/// would normalize away the very level differences that separate the two.
///
/// A step that fails projection is skipped: its parameter and batch-norm
/// updates are rolled back and the batch dropped. More than
/// max_consecutive_skips skips in a row abort. A step producing a non-finite
/// loss or parameter is rolled back the same way and aborts with
/// TrainingAbort, leaving the models at the last completed step.
TrainingHistory train(const TrainingDataset& dataset, GeneratorModel& gen,
                      DiscriminatorModel& disc, const TrainingConfig& cfg);

/// n fast profiles (n x m*s) drawn in eval mode: dropout off, batch norm on
/// running statistics. Deterministic for a fixed seed. Leaves the generator
/// in eval mode.
ad::Matrix sample_profiles(GeneratorModel& gen, long n, std::uint64_t seed);

}  // namespace cgan::gan
