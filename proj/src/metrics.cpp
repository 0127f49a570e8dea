#include "cgan/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cgan/errors.hpp"

namespace cgan::metrics {

Ecdf::Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
  if (sorted_.empty()) throw ValidationError("ecdf: empty sample");
  for (double v : sorted_)
    if (!std::isfinite(v)) throw ValidationError("ecdf: non-finite sample value");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double ks_distance(const Ecdf& a, const Ecdf& b) {
  // Both step functions only change at sample points, so the sup is attained
  // at one of them; walk the pooled sorted values.
  const auto& va = a.sorted();
  const auto& vb = b.sorted();
  const double na = static_cast<double>(va.size());
  const double nb = static_cast<double>(vb.size());
  std::size_t i = 0, j = 0;
  double ks = 0.0;
  while (i < va.size() || j < vb.size()) {
    double x;
    if (j >= vb.size() || (i < va.size() && va[i] <= vb[j]))
      x = va[i];
    else
      x = vb[j];
    while (i < va.size() && va[i] <= x) ++i;
    while (j < vb.size() && vb[j] <= x) ++j;
    ks = std::max(ks, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return ks;
}

std::optional<double> max_consecutive_change(const Eigen::VectorXd& profile, double eps_div) {
  if (profile.size() < 2) throw ValidationError("max_consecutive_change: need at least 2 samples");
  bool any = false;
  double worst = 0.0;
  for (Eigen::Index i = 1; i < profile.size(); ++i) {
    const double prev = profile(i - 1);
    if (prev <= eps_div) continue;
    any = true;
    worst = std::max(worst, 100.0 * std::abs(profile(i) - prev) / prev);
  }
  if (!any) return std::nullopt;
  return worst;
}

RealismStats realism_stats(const std::vector<Eigen::VectorXd>& profiles, double eps_div) {
  if (profiles.empty()) throw ValidationError("realism_stats: empty profile set");
  RealismStats st;
  st.n_profiles = static_cast<long>(profiles.size());
  for (const auto& p : profiles) {
    if (const auto change = max_consecutive_change(p, eps_div))
      st.max_change_pct = std::max(st.max_change_pct, *change);
    st.max_injection_kw = std::max(st.max_injection_kw, p.maxCoeff());
  }
  return st;
}

ViolationCounts count_violations(const std::vector<Eigen::VectorXd>& profiles,
                                 const qp::RampBoxPolytope& P, double feas_tol) {
  const int m = P.window_len;
  const double lo = P.lower_bound();
  const double hi = P.upper_bound();
  ViolationCounts counts;
  for (const auto& p : profiles) {
    if (p.size() % m != 0)
      throw ShapeError("count_violations: profile length must be a multiple of window_len");
    for (Eigen::Index w = 0; w < p.size() / m; ++w) {
      const auto z = p.segment(w * m, m);
      for (int i = 0; i < m; ++i) {
        if (z(i) < lo - feas_tol) ++counts.box_lower;
        if (z(i) > hi + feas_tol) ++counts.box_upper;
        if (i > 0) {
          if (z(i) - (1.0 + P.k3) * z(i - 1) > feas_tol) ++counts.ramp_upper;
          if ((1.0 - P.k3) * z(i - 1) - z(i) > feas_tol) ++counts.ramp_lower;
        }
      }
    }
  }
  return counts;
}

ValidationReport build_report(const std::vector<Eigen::VectorXd>& generated_fast,
                              const std::vector<double>& generated_slow,
                              const std::vector<double>& real_slow,
                              const qp::RampBoxPolytope& polytope,
                              const std::vector<Eigen::VectorXd>* ground_truth_fast,
                              ReportThresholds thresholds) {
  if (generated_fast.empty()) throw ValidationError("build_report: no generated profiles");
  ValidationReport report;
  report.thresholds = thresholds;
  report.ks = ks_distance(Ecdf(generated_slow), Ecdf(real_slow));
  report.generated = realism_stats(generated_fast);
  if (ground_truth_fast && !ground_truth_fast->empty())
    report.ground_truth = realism_stats(*ground_truth_fast);
  report.violations = count_violations(generated_fast, polytope);
  report.n_generated_slow = static_cast<long>(generated_slow.size());
  report.n_real_slow = static_cast<long>(real_slow.size());
  report.ks_pass = report.ks < thresholds.ks_max;
  report.violations_pass = report.violations.total() <= thresholds.max_violations;
  return report;
}

}  // namespace cgan::metrics
