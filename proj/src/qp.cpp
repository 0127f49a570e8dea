#include "cgan/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cgan/errors.hpp"

namespace cgan::qp {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Largest alpha in (0, 1] keeping v + alpha*dv >= 0 for strictly positive v.
double step_to_boundary(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

double scale_of(const VectorXd& a, const VectorXd& h) {
  return std::max({1.0, a.lpNorm<Eigen::Infinity>(), h.lpNorm<Eigen::Infinity>()});
}

SolverStats residual_stats(const VectorXd& z, const VectorXd& lambda, const VectorXd& a,
                           const MatrixXd& G, const VectorXd& h, int iterations) {
  SolverStats st;
  st.iterations = iterations;
  st.primal_residual = std::max(0.0, (G * z - h).maxCoeff());
  st.stationarity_residual =
      (2.0 * (z - a) + G.transpose() * lambda).lpNorm<Eigen::Infinity>();
  const VectorXd slack = (h - G * z).cwiseMax(0.0);
  st.max_complementarity = lambda.cwiseProduct(slack).lpNorm<Eigen::Infinity>();
  return st;
}

bool stats_ok(const SolverStats& st, const SolverConfig& cfg) {
  return st.primal_residual <= cfg.feas_tol && st.stationarity_residual <= cfg.stat_tol &&
         st.max_complementarity <= cfg.comp_tol;
}

void finish_analytic(QpSolution* sol, const VectorXd& a, const RampBoxPolytope& P,
                     const SolverConfig& cfg) {
  const MatrixXd G = P.constraint_matrix();
  const VectorXd h = P.constraint_bounds();
  sol->stats = residual_stats(sol->z_star, sol->duals, a, G, h, 0);
  sol->stats.polished = true;
  const VectorXd slack = h - G * sol->z_star;
  sol->active_mask.assign(static_cast<size_t>(G.rows()), false);
  for (Eigen::Index i = 0; i < G.rows(); ++i)
    sol->active_mask[static_cast<size_t>(i)] = slack(i) < cfg.active_tol;
}

// Projection when the box collapses to a single value c: every feasible point
// is the constant vector, so z* = c*1 and the box duals absorb the gradient.
QpSolution degenerate_box_solution(const VectorXd& a, const RampBoxPolytope& P,
                                   const SolverConfig& cfg) {
  const int m = P.window_len;
  const double c = 0.5 * (P.lower_bound() + P.upper_bound());
  QpSolution sol;
  sol.z_star = VectorXd::Constant(m, c);
  sol.duals = VectorXd::Zero(P.constraint_count());
  for (int i = 0; i < m; ++i) {
    const double g = 2.0 * (a(i) - c);  // stationarity: 2(c - a_i) - lo_i + up_i = 0
    if (g > 0.0)
      sol.duals(m + i) = g;  // pushing up against the upper bound
    else
      sol.duals(i) = -g;
  }
  finish_analytic(&sol, a, P, cfg);
  return sol;
}

// With a zero ramp tolerance every window is a constant vector, so the
// feasible set has no interior and the interior-point path is unusable.
// Project analytically: c* = clamp(mean(a), lo, hi), then recover duals by
// telescoping the stationarity residual through the ramp pairs.
QpSolution ramp_equality_solution(const VectorXd& a, const RampBoxPolytope& P,
                                  const SolverConfig& cfg) {
  const int m = P.window_len;
  const double lo = P.lower_bound();
  const double hi = P.upper_bound();
  const double c = std::clamp(a.mean(), lo, hi);

  QpSolution sol;
  sol.z_star = VectorXd::Constant(m, c);
  sol.duals = VectorXd::Zero(P.constraint_count());

  VectorXd g = 2.0 * (a.array() - c).matrix();  // required G^T lambda
  const double total = g.sum();
  if (total < 0.0) {
    const double beta = -total / m;  // uniform lower-box dual
    for (int i = 0; i < m; ++i) sol.duals(i) = beta;
    g.array() += beta;
  } else if (total > 0.0) {
    const double beta = total / m;
    for (int i = 0; i < m; ++i) sol.duals(m + i) = beta;
    g.array() -= beta;
  }
  // Net pair duals t_i solve t_i - t_{i+1} = g_i; split signs across the pair.
  double t = 0.0;
  for (int i = m - 1; i >= 1; --i) {
    t += g(i);
    if (t >= 0.0)
      sol.duals(2 * m + i - 1) = t;  // ramp-up row of pair i
    else
      sol.duals(3 * m - 2 + i) = -t;
  }
  finish_analytic(&sol, a, P, cfg);
  return sol;
}

void ensure_nonempty(const RampBoxPolytope& P) {
  const double lo = P.lower_bound();
  const double hi = P.upper_bound();
  if (lo > hi) throw EmptyPolytopeError("box is empty");
  if (P.window_len > 1 && P.k3 > 0.0 && hi < std::max(lo, 0.0))
    throw EmptyPolytopeError("no constant level satisfies both box and ramp constraints");
}

// Re-solves the projection as an equality-constrained problem on the rows the
// interior-point iterate identifies as active. Exact when the identification
// is right; the caller keeps the IPM iterate otherwise.
bool polish(const VectorXd& a, const MatrixXd& G, const VectorXd& h, const SolverConfig& cfg,
            const VectorXd& lambda, const VectorXd& slack, QpSolution* sol) {
  const Eigen::Index n = a.size();
  const Eigen::Index mc = G.rows();
  std::vector<int> active;
  for (Eigen::Index i = 0; i < mc; ++i) {
    if (lambda(i) > slack(i)) active.push_back(static_cast<int>(i));
  }

  VectorXd z = a;
  VectorXd duals = VectorXd::Zero(mc);
  if (!active.empty()) {
    const auto k = static_cast<Eigen::Index>(active.size());
    MatrixXd Ga(k, n);
    VectorXd ha(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      Ga.row(r) = G.row(active[static_cast<size_t>(r)]);
      ha(r) = h(active[static_cast<size_t>(r)]);
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Ga);
    const VectorXd correction = cod.solve(Ga * a - ha);  // min-norm step onto the face
    z = a - correction;
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> codT(MatrixXd(Ga.transpose()));
    VectorXd la = codT.solve(2.0 * (a - z));
    for (Eigen::Index r = 0; r < k; ++r) {
      if (la(r) < 0.0) {
        if (la(r) < -1e-9) return false;  // wrong active set
        la(r) = 0.0;
      }
      duals(active[static_cast<size_t>(r)]) = la(r);
    }
  }

  SolverStats st = residual_stats(z, duals, a, G, h, sol->stats.iterations);
  if (!stats_ok(st, cfg)) return false;
  st.polished = true;
  sol->z_star = z;
  sol->duals = duals;
  sol->stats = st;
  return true;
}

}  // namespace

Eigen::MatrixXd RampBoxPolytope::constraint_matrix() const {
  const int m = window_len;
  MatrixXd G = MatrixXd::Zero(constraint_count(), m);
  for (int i = 0; i < m; ++i) {
    G(i, i) = -1.0;     // -z_i <= -lo
    G(m + i, i) = 1.0;  // z_i <= hi
  }
  for (int i = 1; i < m; ++i) {
    G(2 * m + i - 1, i) = 1.0;  // z_i - (1+k3) z_{i-1} <= 0
    G(2 * m + i - 1, i - 1) = -(1.0 + k3);
    G(3 * m - 2 + i, i) = -1.0;  // (1-k3) z_{i-1} - z_i <= 0
    G(3 * m - 2 + i, i - 1) = 1.0 - k3;
  }
  return G;
}

Eigen::VectorXd RampBoxPolytope::constraint_bounds() const {
  const int m = window_len;
  VectorXd h = VectorXd::Zero(constraint_count());
  h.head(m).setConstant(-lower_bound());
  h.segment(m, m).setConstant(upper_bound());
  return h;
}

RampBoxPolytope build_polytope(double k1, double k2, double k3, double hist_min, double hist_max,
                               int window_len) {
  if (window_len < 1) throw ConfigError("window_len must be >= 1");
  if (!(std::isfinite(k1) && std::isfinite(k2) && std::isfinite(k3) && std::isfinite(hist_min) &&
        std::isfinite(hist_max)))
    throw ConfigError("polytope parameters must be finite");
  if (k1 < 0.0) throw ConfigError("k1 must be >= 0");
  if (k3 < 0.0) throw ConfigError("k3 must be >= 0");
  if (hist_min > hist_max) throw ConfigError("hist_min must not exceed hist_max");

  RampBoxPolytope P{k1, k2, k3, hist_min, hist_max, window_len};
  const double lo = P.lower_bound();
  const double hi = P.upper_bound();
  if (lo > hi)
    throw EmptyPolytopeError("box is empty: k1*hist_min = " + std::to_string(lo) +
                             " exceeds k2*hist_max = " + std::to_string(hi));
  if (window_len > 1 && k3 > 0.0) {
    // Ramp rows scale multiplicatively, so a window needs a constant feasible
    // level c with lo <= c <= hi and c >= 0.
    if (hi < std::max(lo, 0.0))
      throw EmptyPolytopeError("no constant level satisfies both box and ramp constraints");
  }
  return P;
}

QpSolution project(const VectorXd& a, const RampBoxPolytope& P, const SolverConfig& cfg) {
  const int m = P.window_len;
  if (a.size() != m) throw ShapeError("projection input length must equal window_len");
  if (!a.allFinite()) throw ValidationError("projection input must be finite");
  ensure_nonempty(P);

  const double lo = P.lower_bound();
  const double hi = P.upper_bound();
  const double span_scale = std::max({1.0, std::abs(lo), std::abs(hi)});
  if (hi - lo <= 1e-12 * span_scale) return degenerate_box_solution(a, P, cfg);
  if (m > 1 && P.k3 == 0.0) return ramp_equality_solution(a, P, cfg);

  const MatrixXd G = P.constraint_matrix();
  const VectorXd h = P.constraint_bounds();
  const Eigen::Index mc = G.rows();
  const double scale = scale_of(a, h);

  // Strictly interior start: the analytic center of the box is ramp-feasible.
  VectorXd z = a.cwiseMax(lo + 0.25 * (hi - lo)).cwiseMin(hi - 0.25 * (hi - lo));
  VectorXd s = (h - G * z).cwiseMax(0.05 * scale);
  VectorXd lambda = VectorXd::Constant(mc, 1.0);

  QpSolution sol;
  sol.z_star = z;
  sol.duals = lambda;

  int iter = 0;
  bool converged = false;
  for (; iter < cfg.max_iterations; ++iter) {
    const VectorXd r_d = 2.0 * (z - a) + G.transpose() * lambda;
    const VectorXd r_p = G * z + s - h;
    const VectorXd comp = lambda.cwiseProduct(s);
    SolverStats st = residual_stats(z, lambda, a, G, h, iter);
    if (stats_ok(st, cfg)) {
      converged = true;
      break;
    }

    const VectorXd d = lambda.cwiseQuotient(s);
    MatrixXd M = 2.0 * MatrixXd::Identity(m, m);
    M.noalias() += G.transpose() * d.asDiagonal() * G;
    Eigen::LLT<MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) break;

    auto solve_kkt = [&](const VectorXd& r_comp, VectorXd* dz, VectorXd* ds, VectorXd* dl) {
      const VectorXd rhs =
          -r_d - G.transpose() * ((lambda.cwiseProduct(r_p) - r_comp).cwiseQuotient(s));
      *dz = llt.solve(rhs);
      *ds = -r_p - G * (*dz);
      *dl = (-r_comp - lambda.cwiseProduct(*ds)).cwiseQuotient(s);
    };

    VectorXd dz_aff, ds_aff, dl_aff;
    solve_kkt(comp, &dz_aff, &ds_aff, &dl_aff);

    const double mu = comp.mean();
    const double alpha_p_aff = step_to_boundary(s, ds_aff);
    const double alpha_d_aff = step_to_boundary(lambda, dl_aff);
    const double mu_aff = (s + alpha_p_aff * ds_aff).dot(lambda + alpha_d_aff * dl_aff) /
                          static_cast<double>(mc);
    const double ratio = std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0);
    const double sigma = ratio * ratio * ratio;

    const VectorXd r_comp =
        comp + ds_aff.cwiseProduct(dl_aff) - VectorXd::Constant(mc, sigma * mu);
    VectorXd dz, ds, dl;
    solve_kkt(r_comp, &dz, &ds, &dl);

    const double tau = 0.995;
    const double alpha =
        std::min({1.0, tau * step_to_boundary(s, ds), tau * step_to_boundary(lambda, dl)});
    z += alpha * dz;
    s += alpha * ds;
    lambda += alpha * dl;
  }

  sol.z_star = z;
  sol.duals = lambda;
  sol.stats = residual_stats(z, lambda, a, G, h, iter);

  const VectorXd slack = (h - G * z).cwiseMax(0.0);
  const bool polished = polish(a, G, h, cfg, lambda, slack, &sol);
  if (!converged && !polished)
    throw NonconvergenceError("projection solver failed to converge", sol.stats);

  sol.active_mask.assign(static_cast<size_t>(mc), false);
  const VectorXd final_slack = h - G * sol.z_star;
  for (Eigen::Index i = 0; i < mc; ++i)
    sol.active_mask[static_cast<size_t>(i)] = final_slack(i) < cfg.active_tol;
  return sol;
}

std::vector<QpSolution> project_batch(const MatrixXd& a, const RampBoxPolytope& P,
                                      const SolverConfig& cfg) {
  std::vector<QpSolution> out;
  out.reserve(static_cast<size_t>(a.rows()));
  for (Eigen::Index r = 0; r < a.rows(); ++r) out.push_back(project(a.row(r).transpose(), P, cfg));
  return out;
}

Eigen::VectorXd qp_backward(const QpSolution& sol, const RampBoxPolytope& P,
                            const VectorXd& grad_out, const SolverConfig& /*cfg*/,
                            bool* degenerate) {
  const int m = P.window_len;
  if (grad_out.size() != m) throw ShapeError("qp_backward gradient length must equal window_len");
  const MatrixXd G = P.constraint_matrix();
  const VectorXd h = P.constraint_bounds();
  const Eigen::Index mc = G.rows();
  const VectorXd slack = (h - G * sol.z_star).cwiseMax(0.0);
  const VectorXd& lambda = sol.duals;

  // Differential KKT system in (dz, dlambda):
  //   2 dz + G^T dlambda             = 2 da
  //   lambda_i g_i^T dz - s_i dl_i   = 0
  // Each complementarity row is rescaled by its dominant coefficient so that
  // weakly active rows (lambda ~ s ~ 0) degrade to a solvable least-squares
  // system instead of an ill-conditioned one.
  const Eigen::Index dim = m + mc;
  MatrixXd K = MatrixXd::Zero(dim, dim);
  K.topLeftCorner(m, m) = 2.0 * MatrixXd::Identity(m, m);
  K.topRightCorner(m, mc) = G.transpose();
  for (Eigen::Index i = 0; i < mc; ++i) {
    const double w = 1.0 / std::max({lambda(i), slack(i), 1e-10});
    K.row(m + i).head(m) = (w * lambda(i)) * G.row(i);
    K(m + i, m + i) = -w * slack(i);
  }

  VectorXd rhs = VectorXd::Zero(dim);
  rhs.head(m) = grad_out;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(MatrixXd(K.transpose()));
  if (degenerate) *degenerate = cod.rank() < dim;
  const VectorXd y = cod.solve(rhs);
  return 2.0 * y.head(m);
}

}  // namespace cgan::qp
