#pragma once

#include "cgan/autodiff.hpp"
#include "cgan/qp.hpp"

namespace cgan::qp {

/// Graph op wrapping the projection. Every row of `x` is a profile whose
/// columns split into consecutive windows of P.window_len samples; each window
/// is projected independently in the forward pass, and the backward pass pulls
/// gradients through each window's implicit KKT derivative.
///
/// `degenerate_windows`, when given, accumulates how many windows had a rank
/// deficient derivative (their gradient is the least-squares one).
ad::ValuePtr project_windows(const ad::ValuePtr& x, const RampBoxPolytope& polytope,
                             const SolverConfig& cfg = {}, long* degenerate_windows = nullptr);

}  // namespace cgan::qp
