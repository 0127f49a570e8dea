#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cgan/commands.hpp"
#include "cgan/config.hpp"
#include "cgan/errors.hpp"
#include "cgan/qp.hpp"

namespace {

int dispatch(const std::string& name, const cgan::cli::RunConfig& cfg) {
  if (name == "synth") return cgan::cli::run_synth(cfg);
  if (name == "estimate") return cgan::cli::run_estimate(cfg);
  if (name == "train") return cgan::cli::run_train(cfg);
  if (name == "generate") return cgan::cli::run_generate(cfg);
  return cgan::cli::run_validate(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained load-profile GAN: synthesize, estimate, train, generate, validate"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  long steps = 0;
  bool baseline = false;
  long n_profiles = 0;
  std::string checkpoint;
  std::string profiles_csv;
  std::string real_csv;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration (JSON)")
        ->required();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out_dir, "override the output directory");
  };

  add_common(app.add_subcommand("synth", "write a synthetic ground-truth dataset"));
  add_common(app.add_subcommand("estimate", "estimate constraint parameters from meter data"));

  auto* train_cmd = app.add_subcommand("train", "train the generator against aggregated data");
  add_common(train_cmd);
  train_cmd->add_option("--steps", steps, "override the training step count")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_flag("--baseline", baseline, "also train an unconstrained twin");

  auto* generate_cmd = app.add_subcommand("generate", "sample profiles from a trained checkpoint");
  add_common(generate_cmd);
  generate_cmd->add_option("--n", n_profiles, "override the number of profiles")
      ->check(CLI::PositiveNumber);
  generate_cmd->add_option("--checkpoint", checkpoint, "generator checkpoint path");

  auto* validate_cmd = app.add_subcommand("validate", "score generated profiles against real data");
  add_common(validate_cmd);
  validate_cmd->add_option("--profiles", profiles_csv, "generated profiles CSV");
  validate_cmd->add_option("--real", real_csv, "real aggregated meter CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    cgan::cli::RunConfig cfg = cgan::cli::load_config(config_path);
    if (active->count("--seed") > 0) {
      cfg.seed = seed;
      cfg.synth_seed.reset();  // an explicit seed also wins over a pinned synth seed
    }
    if (active->count("--out") > 0) cfg.out_dir = out_dir;
    if (active == train_cmd) {
      if (active->count("--steps") > 0) cfg.train.total_steps = steps;
      if (baseline) cfg.train.baseline = true;
    } else if (active == generate_cmd) {
      if (active->count("--n") > 0) cfg.generate.n = n_profiles;
      if (active->count("--checkpoint") > 0) cfg.generate.checkpoint = checkpoint;
    } else if (active == validate_cmd) {
      if (active->count("--profiles") > 0) cfg.validate.profiles_csv = profiles_csv;
      if (active->count("--real") > 0) cfg.validate.real_slow_csv = real_csv;
    }
    return dispatch(active->get_name(), cfg);
  } catch (const cgan::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cgan::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cgan::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cgan::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cgan::EmptyDatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cgan::EmptyPolytopeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cgan::DegenerateDataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cgan::TrainingAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const cgan::qp::NonconvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
