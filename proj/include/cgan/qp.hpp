#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgan::qp {

/// Feasible set for one generated window: per-sample box bounds scaled from
/// the historical extrema of the aggregated data, plus ramp limits between
/// consecutive samples.
///
/// With lo = k1*hist_min and hi = k2*hist_max the constraints are
///   lo <= z_i <= hi                                   (i = 0..m-1)
///   (1-k3) z_{i-1} <= z_i <= (1+k3) z_{i-1}           (i = 1..m-1)
/// Windows are independent: the first sample of a window has no predecessor.
struct RampBoxPolytope {
  double k1 = 0.0;
  double k2 = 1.0;
  double k3 = 0.0;
  double hist_min = 0.0;  // L, kW
  double hist_max = 0.0;  // U, kW
  int window_len = 1;     // m, samples per window

  double lower_bound() const { return k1 * hist_min; }
  double upper_bound() const { return k2 * hist_max; }
  int constraint_count() const { return 2 * window_len + 2 * (window_len - 1); }

  /// Inequality rows G z <= h, in a fixed order: m lower-box rows, m upper-box
  /// rows, m-1 ramp-up rows (z_i - (1+k3) z_{i-1} <= 0), m-1 ramp-down rows
  /// ((1-k3) z_{i-1} - z_i <= 0).
  Eigen::MatrixXd constraint_matrix() const;
  Eigen::VectorXd constraint_bounds() const;
};

/// Validates parameters and certifies nonemptiness (some constant vector
/// inside the box must be ramp-feasible). Throws ConfigError on malformed
/// parameters and EmptyPolytopeError when no feasible point exists.
RampBoxPolytope build_polytope(double k1, double k2, double k3, double hist_min, double hist_max,
                               int window_len);

struct SolverConfig {
  double feas_tol = 1e-8;
  double stat_tol = 1e-8;
  double comp_tol = 1e-8;
  double active_tol = 1e-6;
  int max_iterations = 200;
};

struct SolverStats {
  int iterations = 0;
  double primal_residual = 0.0;      // max constraint violation
  double stationarity_residual = 0.0;
  double max_complementarity = 0.0;  // max per-constraint dual*slack
  bool polished = false;
};

/// Optimum of the projection problem together with its KKT certificate:
/// z_star minimizes sum((z_i - a_i)^2) over the polytope, `duals` are the
/// nonnegative multipliers satisfying 2(z*-a) + G^T duals = 0, and
/// `active_mask` flags rows whose slack is below active_tol.
struct QpSolution {
  Eigen::VectorXd z_star;
  Eigen::VectorXd duals;
  std::vector<bool> active_mask;
  SolverStats stats;
};

/// Solver failed to reach the requested tolerances; carries the residuals at
/// the final iterate for diagnostics.
struct NonconvergenceError : std::runtime_error {
  NonconvergenceError(const std::string& msg, SolverStats s)
      : std::runtime_error(msg), stats(s) {}
  SolverStats stats;
};

/// Euclidean projection of `a` onto the polytope by a primal-dual
/// interior-point method, followed by an active-set polish that sharpens the
/// iterate to machine precision when the active set is identified cleanly.
QpSolution project(const Eigen::VectorXd& a, const RampBoxPolytope& polytope,
                   const SolverConfig& cfg = {});

/// Rowwise projection of a batch (each row one window).
std::vector<QpSolution> project_batch(const Eigen::MatrixXd& a, const RampBoxPolytope& polytope,
                                      const SolverConfig& cfg = {});

/// Pulls a loss gradient at z* back to the projection input by implicit
/// differentiation of the KKT system. Strictly active constraints pin their
/// rows; the surrounding linear system is solved in the least-squares sense so
/// weakly active (degenerate) rows cannot make it blow up. When the system is
/// rank deficient, `degenerate` (if given) is set and the least-squares
/// gradient is still returned.
Eigen::VectorXd qp_backward(const QpSolution& sol, const RampBoxPolytope& polytope,
                            const Eigen::VectorXd& grad_out, const SolverConfig& cfg = {},
                            bool* degenerate = nullptr);

/// Exact reference solver: enumerates candidate active subsets of the
/// constraint rows, solves each equality-constrained projection, and returns
/// the feasible candidate with the smallest objective. Exponential in the
/// constraint count; refuses window_len > 8.
Eigen::VectorXd oracle_project(const Eigen::VectorXd& a, const RampBoxPolytope& polytope);

}  // namespace cgan::qp
