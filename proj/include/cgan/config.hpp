#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cgan/data.hpp"
#include "cgan/gan.hpp"
#include "cgan/metrics.hpp"
#include "cgan/qp.hpp"

namespace cgan::cli {

struct DataConfig {
  std::string slow_csv;  // aggregated meter readings (training / estimation)
  std::string fast_csv;  // optional high-resolution series (estimation only)
  std::optional<data::WindowFilter> filter;
};

/// Where the constraint parameters k1, k2, k3, L, U come from: written out in
/// the config, a params.json produced by the estimate command, or estimated
/// from the configured data on the fly.
struct ParamsSource {
  enum class Kind { Inline, File, Estimate };
  Kind kind = Kind::Estimate;
  data::ConstraintParams values;  // Inline
  std::string path;               // File
};

struct EstimateOverrides {
  std::optional<double> k1, k2, k3;
};

struct ModelConfig {
  int noise_dim = 8;
  int hidden = 128;
  int m = 15;  // fast samples per aggregation window
  int s = 1;   // aggregated readings per generated sample
};

struct TrainSection {
  int batch_size = 64;
  long total_steps = 1000;
  int d_steps_per_g_step = 1;
  gan::GenLossVariant loss = gan::GenLossVariant::NonSaturating;
  double learning_rate = 1e-4;
  bool baseline = false;  // also train an unconstrained twin
};

struct GenerateSection {
  long n = 500;
  std::string checkpoint;  // empty -> <out_dir>/generator.json
};

struct ValidateSection {
  std::string profiles_csv;            // empty -> <out_dir>/profiles.csv
  std::string metadata_json;           // empty -> sidecar next to profiles_csv
  std::string real_slow_csv;           // required by the validate command
  std::string ground_truth_fast_csv;   // optional realism reference
  metrics::ReportThresholds thresholds;
};

/// One document configures every command; each command reads the sections it
/// needs. Parsing validates everything up front and rejects unknown keys at
/// every level, so a command never starts work on a half-good config.
struct RunConfig {
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  DataConfig data;
  ParamsSource params;
  data::SyntheticProcessConfig synth;
  std::optional<std::uint64_t> synth_seed;  // set iff the config pins it
  EstimateOverrides estimate;
  ModelConfig model;
  TrainSection train;
  qp::SolverConfig solver;
  GenerateSection generate;
  ValidateSection validate;
};

/// Throws ParseError for unreadable/invalid JSON, ConfigError for schema
/// violations (unknown keys, wrong types, out-of-range values).
RunConfig load_config(const std::string& path);

/// Same contract, parsing from a JSON string (tests).
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");

/// "YYYY-MM-DD" with calendar validation; ConfigError otherwise.
std::chrono::year_month_day parse_date(const std::string& text);

}  // namespace cgan::cli
