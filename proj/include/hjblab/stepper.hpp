#pragma once

#include <cstddef>
#include <vector>

#include "hjblab/grid.hpp"

namespace hjb {

/// Per-node frozen coefficients for one backward time step of
///   dt w + 1/2 Tr[a D^2 w] + mu . Dw - kill w + source = 0.
/// All arrays are node-major over grid.n_nodes(): a holds d*d entries per
/// node (row-major, symmetric), mu holds d entries per node.
struct LayerCoefficients {
    std::vector<double> a;
    std::vector<double> mu;
    std::vector<double> kill;
    std::vector<double> source;

    explicit LayerCoefficients(const Grid& g)
        : a(g.n_nodes() * static_cast<std::size_t>(g.dim()) * g.dim(), 0.0),
          mu(g.n_nodes() * static_cast<std::size_t>(g.dim()), 0.0),
          kill(g.n_nodes(), 0.0),
          source(g.n_nodes(), 0.0) {}
};

/// Closure for stencil entries that fall outside the box.
enum class GhostPolicy {
    /// Substitute the linear-extrapolation ghost (second normal difference
    /// zero). Diffusion along the boundary-normal axis cancels exactly and
    /// one-sided drift differences collapse to the inward difference. The
    /// resulting boundary row can carry a negative neighbor weight when the
    /// drift points out of the box.
    linear,
    /// Use caller-supplied ghost values (StepSpec::ghost_values); their
    /// stencil weights are nonnegative, the contribution moves to the
    /// right-hand side, and every row stays an M-matrix row.
    values,
};

/// One backward step: produces the layer at t from the known layer at t+dt.
///
/// Explicit update:
///   w_new = carry w - dt kill w + dt sum_j wgt_j (w_j - w) + dt source
/// Implicit update solves
///   (1 + dt kill + dt sum_j wgt_j) w_new - dt sum_j wgt_j w_new_j
///     = carry w + dt (ghost terms) + dt source
/// with weights wgt_j assembled from central second differences (diagonal a),
/// the monotone 7-point splitting for off-diagonal a (requires row diagonal
/// dominance of a; violation throws SolverError naming the node; the
/// splitting is dropped at boundary nodes), and upwind first differences for
/// mu (direction from the sign of each component).
struct StepSpec {
    const Grid* grid = nullptr;
    double dt = 0.0;
    double carry = 1.0;  // factor on the known layer (discount placement)
    bool implicit = true;
    double tol_linear = 1e-12;
    int max_linear_iters = 20000;
    GhostPolicy ghosts = GhostPolicy::linear;
    /// Ghost values for GhostPolicy::values, indexed [node * 2d + 2*axis + side]
    /// with side 0 = low edge, 1 = high edge; only boundary entries are read.
    const std::vector<double>* ghost_values = nullptr;
};

/// Throws SolverError on: explicit stability violation (the per-node check
/// dt * sum of positive weights <= carry - dt*kill), loss of diagonal
/// dominance in the cross-term splitting, or a non-converged iterative
/// linear solve (the residual history is attached).
std::vector<double> backward_step(const StepSpec& spec, const LayerCoefficients& coef,
                                  const std::vector<double>& known_layer);

}  // namespace hjb
