#pragma once

#include <string>

#include "hjblab/grid.hpp"
#include "hjblab/pde_solver.hpp"
#include "hjblab/problem.hpp"

namespace hjb {

/// Exponential substitution v = e^{-u}.  For the quadratic control family
/// with zero discount, u solves the nonlinear backward equation exactly when
/// v solves the linear one
///     dv/dt + b2 . Dv + 1/2 Tr[sigma sigma' D^2 v] - f2 v = 0,
/// v(T, x) = e^{-g(x)}, giving an independent second route to the same
/// solution.

/// Coefficient bundle of the linear backward equation for v.
struct LinearParabolicProblem {
    int dimension = 1;
    double horizon = 1.0;
    VectorMap b2;
    MatrixMap sigma;
    ScalarMap f2;
    /// Terminal datum for v: x -> e^{-g(x)}; strictly positive by
    /// construction wherever g is finite.
    TerminalMap v_terminal;
};

/// Extracts the linear-equation coefficients from a quadratic-family problem
/// with zero discount; throws TransformError otherwise.
LinearParabolicProblem to_linear(const HJBProblem& p);

/// Backward solve of the linear equation with the same monotone stencils as
/// the nonlinear route.  Artificial-boundary closure extrapolates v
/// log-linearly (the image of linear extrapolation of u): ghost values
/// v_edge^2 / v_inner are taken from the known layer, and implicit steps
/// re-solve once with ghosts refreshed from the predictor layer.  Every
/// solved layer must come out strictly positive and finite; a violation
/// throws TransformError naming the node (the inversion would fail there).
ValueFunction solve_linear(const LinearParabolicProblem& lp, const Grid& grid,
                           const SchemeConfig& cfg);

/// Nodewise v = e^{-u}.
ValueFunction transform(const ValueFunction& u);

/// Nodewise u = -log v; throws TransformError on a nonpositive or nonfinite
/// input value.
ValueFunction invert(const ValueFunction& v);

struct CrossCheckReport {
    /// Max |u_direct - u_transform| over core-box nodes, all layers.
    double sup_discrepancy = 0.0;
    /// Mean of the same absolute differences.
    double mean_discrepancy = 0.0;
    double core_fraction = 0.6;
    /// Control-truncation radius the direct route stabilized at.
    double truncation_radius = 0.0;
};

/// Runs both routes on the same grid — the nonlinear solver under
/// truncation escalation (radii R_0, 2 R_0, ... until stable within tol)
/// and the linear route followed by inversion — and reports their
/// discrepancy on the interior core box.
CrossCheckReport cross_check(const HJBProblem& p, const Grid& grid, const SchemeConfig& cfg,
                             double R_0, double tol);

/// CSV rows metric,value.
void write_discrepancy_csv(const CrossCheckReport& report, const std::string& path);

}  // namespace hjb
