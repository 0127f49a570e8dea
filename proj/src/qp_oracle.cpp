#include <Eigen/QR>

#include <limits>
#include <numeric>
#include <vector>

#include "cgan/errors.hpp"
#include "cgan/qp.hpp"

namespace cgan::qp {

// Reference projection by exhaustive active-set enumeration. The optimum is
// the equality-constrained projection onto some subset of at most window_len
// linearly independent rows, so trying every subset of that size and keeping
// the best feasible candidate is exact. Kept deliberately simple and separate
// from the iterative solver so the two can cross-check each other.
Eigen::VectorXd oracle_project(const Eigen::VectorXd& a, const RampBoxPolytope& P) {
  const int m = P.window_len;
  if (m > 8) throw std::invalid_argument("oracle_project: window_len > 8 is intractable");
  if (a.size() != m) throw ShapeError("oracle_project input length must equal window_len");

  const Eigen::MatrixXd G = P.constraint_matrix();
  const Eigen::VectorXd h = P.constraint_bounds();
  const int mc = static_cast<int>(G.rows());
  const double tol =
      1e-9 * std::max({1.0, a.lpNorm<Eigen::Infinity>(), h.lpNorm<Eigen::Infinity>()});

  double best_obj = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best;

  auto consider = [&](const std::vector<int>& subset) {
    Eigen::VectorXd z;
    if (subset.empty()) {
      z = a;
    } else {
      const auto k = static_cast<Eigen::Index>(subset.size());
      Eigen::MatrixXd Gs(k, m);
      Eigen::VectorXd hs(k);
      for (Eigen::Index r = 0; r < k; ++r) {
        Gs.row(r) = G.row(subset[static_cast<size_t>(r)]);
        hs(r) = h(subset[static_cast<size_t>(r)]);
      }
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Gs);
      z = a - cod.solve(Gs * a - hs);
    }
    if ((G * z - h).maxCoeff() > tol) return;
    const double obj = (z - a).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best = z;
    }
  };

  const int kmax = std::min(m, mc);
  std::vector<int> subset;
  consider(subset);
  for (int k = 1; k <= kmax; ++k) {
    subset.resize(static_cast<size_t>(k));
    std::iota(subset.begin(), subset.end(), 0);
    while (true) {
      consider(subset);
      int i = k - 1;
      while (i >= 0 && subset[static_cast<size_t>(i)] == mc - k + i) --i;
      if (i < 0) break;
      ++subset[static_cast<size_t>(i)];
      for (int j = i + 1; j < k; ++j)
        subset[static_cast<size_t>(j)] = subset[static_cast<size_t>(j - 1)] + 1;
    }
  }

  if (!best.size()) throw EmptyPolytopeError("oracle_project found no feasible candidate");
  return best;
}

}  // namespace cgan::qp
