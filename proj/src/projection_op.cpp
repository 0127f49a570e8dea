#include "cgan/projection_op.hpp"

#include <memory>
#include <vector>

#include "cgan/errors.hpp"

namespace cgan::qp {

ad::ValuePtr project_windows(const ad::ValuePtr& x, const RampBoxPolytope& polytope,
                             const SolverConfig& cfg, long* degenerate_windows) {
  const int m = polytope.window_len;
  if (x->cols() % m != 0)
    throw ShapeError("project_windows: column count must be a multiple of window_len");
  const Eigen::Index rows = x->rows();
  const Eigen::Index windows = x->cols() / m;

  auto solutions = std::make_shared<std::vector<QpSolution>>();
  solutions->reserve(static_cast<size_t>(rows * windows));
  ad::Matrix out(rows, x->cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index w = 0; w < windows; ++w) {
      QpSolution sol = project(x->data.block(r, w * m, 1, m).transpose(), polytope, cfg);
      out.block(r, w * m, 1, m) = sol.z_star.transpose();
      solutions->push_back(std::move(sol));
    }
  }

  auto node = std::make_shared<ad::Value>(std::move(out), "qp_project");
  node->parents = {x};
  node->backward_fn = [x, polytope, cfg, solutions, m, windows,
                       degenerate_windows](ad::Value& self) {
    for (Eigen::Index r = 0; r < self.rows(); ++r) {
      for (Eigen::Index w = 0; w < windows; ++w) {
        const Eigen::VectorXd g = self.grad.block(r, w * m, 1, m).transpose();
        bool degenerate = false;
        const QpSolution& sol = (*solutions)[static_cast<size_t>(r * windows + w)];
        const Eigen::VectorXd gin = qp_backward(sol, polytope, g, cfg, &degenerate);
        x->grad.block(r, w * m, 1, m) += gin.transpose();
        if (degenerate && degenerate_windows) ++*degenerate_windows;
      }
    }
  };
  return node;
}

}  // namespace cgan::qp
