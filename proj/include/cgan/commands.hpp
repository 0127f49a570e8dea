#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "cgan/config.hpp"

namespace cgan::cli {

/// Profile matrix I/O: one profile per row, comma-separated full-precision
/// values, no header. Rows must share one length; values must be finite but
/// may be negative (unconstrained baselines produce them).
void write_profiles_csv(const std::string& path, const std::vector<Eigen::VectorXd>& profiles);
std::vector<Eigen::VectorXd> read_profiles_csv(const std::string& path);

/// Constraint parameters per the config's params source (inline values, a
/// params.json file, or estimation from the configured series).
data::ConstraintParams resolve_params(const RunConfig& cfg);
qp::RampBoxPolytope resolve_polytope(const RunConfig& cfg);

// Each command returns its process exit code (0 success, 1 threshold fail for
// validate) and throws on errors; the frontend maps exception classes to the
// remaining exit codes.
int run_synth(const RunConfig& cfg);
int run_estimate(const RunConfig& cfg);
int run_train(const RunConfig& cfg);
int run_generate(const RunConfig& cfg);
int run_validate(const RunConfig& cfg);

}  // namespace cgan::cli
