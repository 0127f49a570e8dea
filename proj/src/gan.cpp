#include "cgan/gan.hpp"

#include <cmath>
#include <iostream>
#include <string>
#include <utility>

#include "cgan/errors.hpp"
#include "cgan/projection_op.hpp"
#include "cgan/rng.hpp"

namespace cgan::gan {

namespace {

constexpr double kLeakySlope = 0.2;
constexpr double kDropoutRate = 0.3;
constexpr double kProbEps = 1e-7;

DenseLayer dense_init(int in, int out, Activation act, std::uint64_t seed) {
  if (in < 1 || out < 1) throw ConfigError("layer dimensions must be positive");
  Rng rng(seed);
  return DenseLayer(in, out, act, rng, kLeakySlope);
}

const qp::RampBoxPolytope& check_dims(const qp::RampBoxPolytope& p, int noise_dim, int s,
                                      int hidden) {
  if (noise_dim < 1) throw ConfigError("noise_dim must be positive");
  if (s < 1) throw ConfigError("aggregated sample width must be positive");
  if (hidden < 1) throw ConfigError("hidden width must be positive");
  return p;
}

ad::ValuePtr clamp_prob(const ad::ValuePtr& p) {
  return ad::clamp(p, kProbEps, 1.0 - kProbEps);
}

}  // namespace

GeneratorModel::GeneratorModel(const qp::RampBoxPolytope& polytope_in, int noise_dim, int s,
                               int hidden, std::uint64_t seed, bool constrained,
                               qp::SolverConfig solver_in)
    : polytope(check_dims(polytope_in, noise_dim, s, hidden)),
      solver(solver_in),
      dense1(dense_init(noise_dim, hidden, Activation::Linear, mix_seed(seed, 1))),
      dense2(dense_init(hidden, hidden, Activation::Linear, mix_seed(seed, 2))),
      head(dense_init(hidden, polytope_in.window_len * s, Activation::Linear, mix_seed(seed, 3))),
      bn1(hidden),
      bn2(hidden),
      drop1(kDropoutRate, mix_seed(seed, 11)),
      drop2(kDropoutRate, mix_seed(seed, 12)),
      noise_dim_(noise_dim),
      s_(s),
      constrained_(constrained) {}

GeneratorModel::Output GeneratorModel::forward(const ad::ValuePtr& noise) {
  if (noise->cols() != noise_dim_)
    throw ShapeError("noise has " + std::to_string(noise->cols()) + " columns, expected " +
                     std::to_string(noise_dim_));
  if (noise->rows() < 1) throw ShapeError("noise batch is empty");

  auto h = drop1.forward(ad::leaky_relu(bn1.forward(dense1.forward(noise)), kLeakySlope));
  h = drop2.forward(ad::leaky_relu(bn2.forward(dense2.forward(h)), kLeakySlope));

  Output out;
  out.a = head.forward(h);
  out.fast = constrained_ ? qp::project_windows(out.a, polytope, solver, &degenerate_windows)
                          : out.a;
  out.slow = ad::aggregate_windows(out.fast, polytope.window_len);
  return out;
}

void GeneratorModel::set_mode(Mode mode) {
  bn1.mode = mode;
  bn2.mode = mode;
  drop1.mode = mode;
  drop2.mode = mode;
  mode_ = mode;
}

std::vector<ad::ValuePtr> GeneratorModel::parameters() {
  return {dense1.weight, dense1.bias, bn1.gamma, bn1.beta, dense2.weight, dense2.bias,
          bn2.gamma,     bn2.beta,    head.weight, head.bias};
}

DiscriminatorModel::DiscriminatorModel(int s, int hidden, std::uint64_t seed)
    : dense1(dense_init(s, hidden, Activation::Linear, mix_seed(seed, 21))),
      dense2(dense_init(hidden, hidden, Activation::Linear, mix_seed(seed, 22))),
      output(dense_init(hidden, 1, Activation::Sigmoid, mix_seed(seed, 23))),
      bn1(hidden),
      bn2(hidden),
      drop1(kDropoutRate, mix_seed(seed, 31)),
      drop2(kDropoutRate, mix_seed(seed, 32)),
      s_(s) {}

ad::ValuePtr DiscriminatorModel::forward(const ad::ValuePtr& x) {
  if (x->cols() != s_)
    throw ShapeError("discriminator input has " + std::to_string(x->cols()) +
                     " columns, expected " + std::to_string(s_));
  auto h = drop1.forward(ad::leaky_relu(bn1.forward(dense1.forward(x)), kLeakySlope));
  h = drop2.forward(ad::leaky_relu(bn2.forward(dense2.forward(h)), kLeakySlope));
  return output.forward(h);
}

void DiscriminatorModel::set_mode(Mode mode) {
  bn1.mode = mode;
  bn2.mode = mode;
  drop1.mode = mode;
  drop2.mode = mode;
  mode_ = mode;
}

std::vector<ad::ValuePtr> DiscriminatorModel::parameters() {
  return {dense1.weight, dense1.bias, bn1.gamma, bn1.beta,    dense2.weight, dense2.bias,
          bn2.gamma,     bn2.beta,    output.weight, output.bias};
}

std::pair<ad::Matrix, ad::Matrix> generate(GeneratorModel& gen, const ad::Matrix& noise) {
  auto out = gen.forward(ad::make_leaf(noise, "noise"));
  return {out.fast->data, out.slow->data};
}

ad::ValuePtr discriminator_loss(const ad::ValuePtr& d_real, const ad::ValuePtr& d_fake) {
  auto log_real = ad::mean_all(ad::log(clamp_prob(d_real)));
  auto log_one_minus_fake = ad::mean_all(ad::log(ad::affine(clamp_prob(d_fake), -1.0, 1.0)));
  return ad::affine(ad::add(log_real, log_one_minus_fake), -0.5, 0.0);
}

ad::ValuePtr generator_loss(const ad::ValuePtr& d_fake, GenLossVariant variant) {
  if (variant == GenLossVariant::Minimax)
    return ad::mean_all(ad::log(ad::affine(clamp_prob(d_fake), -1.0, 1.0)));
  return ad::affine(ad::mean_all(ad::log(clamp_prob(d_fake))), -1.0, 0.0);
}

TrainingDataset make_dataset(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty()) throw EmptyDatasetError("training dataset is empty");
  const Eigen::Index s = samples.front().size();
  if (s < 1) throw ShapeError("training samples must be non-empty vectors");
  ad::Matrix out(static_cast<Eigen::Index>(samples.size()), s);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != s)
      throw ShapeError("sample " + std::to_string(i) + " has length " +
                       std::to_string(samples[i].size()) + ", expected " + std::to_string(s));
    if (!samples[i].allFinite() || samples[i].minCoeff() < 0.0)
      throw ValidationError("sample " + std::to_string(i) + " has negative or non-finite values");
    out.row(static_cast<Eigen::Index>(i)) = samples[i].transpose();
  }
  return TrainingDataset{std::move(out)};
}

namespace {

// Parameter tensors plus batch-norm running statistics; enough to undo a step.
struct StateSnapshot {
  std::vector<ad::Matrix> tensors;
};

std::vector<ad::Matrix*> state_slots(std::vector<ad::ValuePtr>& gparams,
                                     std::vector<ad::ValuePtr>& dparams, GeneratorModel& gen,
                                     DiscriminatorModel& disc,
                                     std::vector<Eigen::RowVectorXd*>& stats_out) {
  std::vector<ad::Matrix*> slots;
  for (auto& p : gparams) slots.push_back(&p->data);
  for (auto& p : dparams) slots.push_back(&p->data);
  stats_out = {&gen.bn1.running_mean, &gen.bn1.running_var,  &gen.bn2.running_mean,
               &gen.bn2.running_var,  &disc.bn1.running_mean, &disc.bn1.running_var,
               &disc.bn2.running_mean, &disc.bn2.running_var};
  return slots;
}

ad::Matrix sample_batch(const TrainingDataset& dataset, int batch, Rng& rng) {
  const Eigen::Index n = dataset.samples.rows();
  ad::Matrix out(batch, dataset.samples.cols());
  for (int i = 0; i < batch; ++i)
    out.row(i) = dataset.samples.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  return out;
}

}  // namespace

TrainingHistory train(const TrainingDataset& dataset, GeneratorModel& gen,
                      DiscriminatorModel& disc, const TrainingConfig& cfg) {
  if (dataset.samples.rows() < 1) throw EmptyDatasetError("training dataset is empty");
  if (dataset.samples.cols() != gen.s() || dataset.samples.cols() != disc.s())
    throw ShapeError("dataset width " + std::to_string(dataset.samples.cols()) +
                     " does not match the models (generator " + std::to_string(gen.s()) +
                     ", discriminator " + std::to_string(disc.s()) + ")");
  if (!dataset.samples.allFinite() || dataset.samples.minCoeff() < 0.0)
    throw ValidationError("training dataset has negative or non-finite values");
  if (cfg.batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (cfg.total_steps < 0) throw ConfigError("total_steps must be nonnegative");
  if (cfg.d_steps_per_g_step < 1) throw ConfigError("d_steps_per_g_step must be positive");
  if (cfg.max_consecutive_skips < 1) throw ConfigError("max_consecutive_skips must be positive");

  gen.set_mode(Mode::Train);
  disc.set_mode(Mode::Train);

  auto gparams = gen.parameters();
  auto dparams = disc.parameters();
  AdamOptimizer opt_g(gparams, cfg.adam);
  AdamOptimizer opt_d(dparams, cfg.adam);
  Rng rng(cfg.seed);

  std::vector<Eigen::RowVectorXd*> stats;
  auto slots = state_slots(gparams, dparams, gen, disc, stats);
  auto take = [&] {
    StateSnapshot snap;
    snap.tensors.reserve(slots.size() + stats.size());
    for (auto* m : slots) snap.tensors.push_back(*m);
    for (auto* v : stats) snap.tensors.push_back(*v);
    return snap;
  };
  auto restore = [&](const StateSnapshot& snap) {
    std::size_t i = 0;
    for (auto* m : slots) *m = snap.tensors[i++];
    for (auto* v : stats) *v = snap.tensors[i++];
  };
  auto state_finite = [&] {
    for (auto* m : slots)
      if (!m->allFinite()) return false;
    for (auto* v : stats)
      if (!v->allFinite()) return false;
    return true;
  };

  TrainingHistory history;
  history.steps.reserve(static_cast<std::size_t>(cfg.total_steps));
  int consecutive_skips = 0;

  for (long step = 1; step <= cfg.total_steps; ++step) {
    StateSnapshot before = take();
    try {
      StepRecord rec;
      rec.step = step;

      // Real and generated samples always share one discriminator batch, so
      // the batch statistics are computed jointly; normalizing the two sides
      // separately would erase exactly the level differences the
      // discriminator is supposed to detect.
      for (int k = 0; k < cfg.d_steps_per_g_step; ++k) {
        auto real = ad::make_leaf(sample_batch(dataset, cfg.batch_size, rng), "real_batch");
        auto noise = ad::make_leaf(
            rng.uniform_matrix(cfg.batch_size, gen.noise_dim(), -1.0, 1.0), "noise");
        auto gen_out = gen.forward(noise);
        // Detached copy: the discriminator update must not push the generator.
        auto fake = ad::make_leaf(gen_out.slow->data, "fake_detached");
        auto d_all = disc.forward(ad::vstack(real, fake));
        auto d_real = ad::rows(d_all, 0, cfg.batch_size);
        auto d_fake = ad::rows(d_all, cfg.batch_size, cfg.batch_size);
        auto loss_d = discriminator_loss(d_real, d_fake);
        ad::backward(loss_d);
        opt_d.step();
        rec.loss_d = loss_d->scalar();
        rec.d_real_mean = d_real->data.mean();
      }

      auto real = ad::make_leaf(sample_batch(dataset, cfg.batch_size, rng), "real_batch");
      auto noise = ad::make_leaf(
          rng.uniform_matrix(cfg.batch_size, gen.noise_dim(), -1.0, 1.0), "noise");
      auto gen_out = gen.forward(noise);
      auto d_all = disc.forward(ad::vstack(real, gen_out.slow));
      auto d_fake = ad::rows(d_all, cfg.batch_size, cfg.batch_size);
      auto loss_g = generator_loss(d_fake, cfg.gen_loss);
      ad::backward(loss_g);
      // The generator loss also deposits gradients in the discriminator;
      // only the generator moves on this half of the step.
      for (auto& p : dparams) p->zero_grad();
      opt_g.step();
      rec.loss_g = loss_g->scalar();
      rec.d_fake_mean = d_fake->data.mean();

      if (!std::isfinite(rec.loss_d) || !std::isfinite(rec.loss_g))
        throw TrainingAbort("non-finite loss at step " + std::to_string(step));
      if (!state_finite())
        throw TrainingAbort("non-finite parameter after step " + std::to_string(step));

      history.steps.push_back(rec);
      consecutive_skips = 0;
    } catch (const qp::NonconvergenceError&) {
      restore(before);
      ++history.skipped_steps;
      ++consecutive_skips;
      std::cerr << "warning: projection did not converge, skipping step " << step << "\n";
      if (consecutive_skips > cfg.max_consecutive_skips)
        throw TrainingAbort("projection failed for " + std::to_string(consecutive_skips) +
                            " consecutive steps");
    } catch (const TrainingAbort&) {
      restore(before);
      throw;
    } catch (const ValidationError& e) {
      // Numeric blowup surfaces as an invalid projection input; same remedy
      // as a non-finite loss.
      restore(before);
      throw TrainingAbort("invalid values during step " + std::to_string(step) + ": " + e.what());
    }
  }

  // Batch-norm refresh: training batches carry dropout noise, so the running
  // variance accumulated above is inflated relative to the dropout-free
  // forward pass used at eval. Re-estimate the generator's running statistics
  // with dropout off; batches where the projection fails are just skipped.
  if (cfg.total_steps > 0 && cfg.calibration_batches > 0) {
    gen.drop1.mode = Mode::Eval;
    gen.drop2.mode = Mode::Eval;
    Rng crng(mix_seed(cfg.seed, 41));
    for (int k = 0; k < cfg.calibration_batches; ++k) {
      ad::Matrix noise = crng.uniform_matrix(256, gen.noise_dim(), -1.0, 1.0);
      try {
        gen.forward(ad::make_leaf(noise, "calibration_noise"));
      } catch (const qp::NonconvergenceError&) {
      }
    }
    gen.set_mode(Mode::Train);
  }
  return history;
}

ad::Matrix sample_profiles(GeneratorModel& gen, long n, std::uint64_t seed) {
  if (n < 0) throw ConfigError("sample count must be nonnegative");
  gen.set_mode(Mode::Eval);
  Rng rng(seed);
  ad::Matrix out(n, gen.profile_len());
  const long chunk = 256;
  for (long i = 0; i < n; i += chunk) {
    const long b = std::min(chunk, n - i);
    auto noise = ad::make_leaf(rng.uniform_matrix(b, gen.noise_dim(), -1.0, 1.0), "noise");
    out.middleRows(i, b) = gen.forward(noise).fast->data;
  }
  return out;
}

}  // namespace cgan::gan
