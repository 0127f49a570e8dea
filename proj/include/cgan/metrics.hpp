#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "cgan/qp.hpp"

namespace cgan::metrics {

/// Exact empirical CDF: F(x) = (#samples <= x) / n over the stored sorted
/// sample. No binning or interpolation.
class Ecdf {
 public:
  /// Throws ValidationError on an empty or non-finite sample.
  explicit Ecdf(std::vector<double> samples);

  double operator()(double x) const;
  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

/// Exact Kolmogorov-Smirnov distance sup_x |F_a(x) - F_b(x)|, evaluated over
/// the pooled sample points where the sup is attained.
double ks_distance(const Ecdf& a, const Ecdf& b);

/// Largest relative step 100 * |z_i - z_{i-1}| / z_{i-1} over the profile.
/// Pairs whose predecessor is <= eps_div are skipped (relative change is
/// undefined at a zero base); nullopt when every pair was skipped.
/// Throws ValidationError for profiles shorter than 2.
std::optional<double> max_consecutive_change(const Eigen::VectorXd& profile,
                                             double eps_div = 1e-6);

struct RealismStats {
  double max_change_pct = 0.0;    // profiles with no defined pair contribute nothing
  double max_injection_kw = 0.0;  // global maximum sample
  long n_profiles = 0;
};

/// Throws ValidationError when `profiles` is empty.
RealismStats realism_stats(const std::vector<Eigen::VectorXd>& profiles, double eps_div = 1e-6);

/// Per-constraint-class violation tallies of fast profiles against a
/// polytope, counted row by row beyond feas_tol. Profiles longer than one
/// window are checked window by window (windows are independent).
struct ViolationCounts {
  long box_lower = 0;
  long box_upper = 0;
  long ramp_upper = 0;
  long ramp_lower = 0;
  long total() const { return box_lower + box_upper + ramp_upper + ramp_lower; }
};

ViolationCounts count_violations(const std::vector<Eigen::VectorXd>& profiles,
                                 const qp::RampBoxPolytope& polytope, double feas_tol = 1e-8);

struct ReportThresholds {
  double ks_max = 0.15;
  long max_violations = 0;
};

struct ValidationReport {
  double ks = 0.0;
  RealismStats generated;
  std::optional<RealismStats> ground_truth;
  ViolationCounts violations;
  long n_generated_slow = 0;
  long n_real_slow = 0;
  ReportThresholds thresholds;
  bool ks_pass = false;
  bool violations_pass = false;
  bool pass() const { return ks_pass && violations_pass; }
};

/// Assembles the full evaluation: KS between generated and real aggregated
/// values, realism statistics, and exact violation counts of the fast
/// profiles against the polytope.
ValidationReport build_report(const std::vector<Eigen::VectorXd>& generated_fast,
                              const std::vector<double>& generated_slow,
                              const std::vector<double>& real_slow,
                              const qp::RampBoxPolytope& polytope,
                              const std::vector<Eigen::VectorXd>* ground_truth_fast = nullptr,
                              ReportThresholds thresholds = {});

}  // namespace cgan::metrics
