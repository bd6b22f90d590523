#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hjblab/errors.hpp"
#include "hjblab/grid.hpp"
#include "hjblab/problem.hpp"

namespace hjb {

enum class TimeStepping {
    explicit_monotone,
    implicit_policy_iteration,
};

/// Numerical scheme knobs shared by the nonlinear and linearized solvers.
struct SchemeConfig {
    TimeStepping mode = TimeStepping::implicit_policy_iteration;
    int m_alpha = 8;            // control-mesh radii per axis (non-quadratic path)
    double tol_policy = 1e-10;  // policy-iteration stop, relative to value scale
    int max_sweeps = 200;       // policy iterations per layer
    double tol_linear = 1e-12;  // iterative linear-solve tolerance (d >= 2)
    int max_doublings = 12;     // truncation-escalation budget
    double core_fraction = 0.6; // interior core used for measured gradient bounds
};

/// Throws std::invalid_argument when any knob is out of range.
void check_scheme_config(const SchemeConfig& cfg);

/// Grid-sampled feedback law: one control vector per (time layer, node).
struct ControlField {
    Grid grid;
    std::vector<double> controls;  // [(layer * n_nodes + node) * d + component]

    ControlField() = default;
    explicit ControlField(const Grid& g)
        : grid(g),
          controls(static_cast<std::size_t>(g.n_layers()) * g.n_nodes() * g.dim(), 0.0) {}

    const double* at(int layer, std::size_t node) const {
        return controls.data() +
               (static_cast<std::size_t>(layer) * grid.n_nodes() + node) * grid.dim();
    }
    double* at(int layer, std::size_t node) {
        return controls.data() +
               (static_cast<std::size_t>(layer) * grid.n_nodes() + node) * grid.dim();
    }
};

/// Space-time evaluation of a control field: multilinear in space, linear in
/// time, per component; queries outside the box are clamped to it (the
/// feedback saturates at its boundary values). `out` receives d components.
void interpolate_control(const ControlField& f, double t, const std::vector<double>& x,
                         double* out);

/// One truncation-escalation stage.
struct TruncationStage {
    double radius;         // control-ball radius of this solve
    double sup_grad_core;  // measured sup |Du| on the interior core
    double delta_sup;      // sup-norm change vs. the previous stage (inf for the first)
};

struct TruncationTrace {
    std::vector<TruncationStage> stages;
    double final_radius = 0.0;
    bool converged = false;
};

/// Escalation that ran out of doublings; carries the partial trace.
class EscalationError : public SolverError {
public:
    EscalationError(const std::string& what, TruncationTrace trace,
                    std::vector<double> history)
        : SolverError(what, std::move(history)), trace_(std::move(trace)) {}
    const TruncationTrace& trace() const { return trace_; }

private:
    TruncationTrace trace_;
};

/// Minimum of  b1(t,x,a) . grad + f1(t,x,a)  over the truncated control set
/// (the problem's control set intersected with the centered ball of radius
/// radius), together with its minimizer.
struct HamiltonianMin {
    double value;
    std::vector<double> argmin;
};

/// Quadratic family: exact closed form (-|sigma' grad|^2 / 2 at -sigma' grad,
/// projected onto the ball when |sigma' grad| > radius). Other families:
/// exhaustive search over a polar control mesh (m_alpha radii, uniform
/// directions; supported for d <= 3). Ties are broken by smallest |a|, then
/// lexicographic order. Throws SolverError when a coefficient evaluates
/// nonfinite.
HamiltonianMin hamiltonian_min(const HJBProblem& p, double t, const std::vector<double>& x,
                               const std::vector<double>& grad, double radius, int m_alpha);

/// Worst-case distance from any point of the truncated control set to the
/// search mesh of hamiltonian_min: zero for the quadratic closed form.
/// Certificates use it as the discretization allowance on control norms.
double control_mesh_resolution(const HJBProblem& p, double radius, int m_alpha);

/// One backward step from the known layer at t + dt to time t.
struct StepResult {
    std::vector<double> values;    // layer at t
    std::vector<double> controls;  // minimizers at t, node-major, d per node
};

/// Produces the layer at t from u_next (the layer at t + dt) with control
/// radius R. Explicit mode freezes the control at the gradient of u_next and
/// evaluates coefficients at t + dt; implicit mode runs policy iteration at
/// time t (freeze control, solve the linear system, re-minimize) until the
/// value change is at most tol_policy * value scale. The discount enters as
/// the factor (1 + c dt) on the known layer in both modes. Throws SolverError
/// (with the residual history) when policy iteration exceeds max_sweeps, and
/// on explicit-stability or monotonicity failures from the step engine.
StepResult step_backward(const HJBProblem& p, const Grid& grid,
                         const std::vector<double>& u_next, double t, double R,
                         const SchemeConfig& cfg);

struct SolveResult {
    ValueFunction value;
    ControlField control;
};

/// Backward sweep over all layers: terminal layer set to g at the nodes
/// exactly, then n_t steps of step_backward; the control field is synthesized
/// from the solved values so it agrees with synthesize_feedback.
SolveResult solve(const HJBProblem& p, const Grid& grid, double R, const SchemeConfig& cfg);

struct EscalationResult {
    ValueFunction value;
    ControlField control;
    TruncationTrace trace;
};

/// Re-solves with control radii R_0, 2 R_0, 4 R_0, ... until the sup-norm
/// change between consecutive solutions is at most tol * value scale AND the
/// current radius is at least control_bound_radius(p.constants, measured
/// sup |Du| on the core). Throws EscalationError with the partial trace when
/// cfg.max_doublings is exhausted.
EscalationResult solve_with_truncation_escalation(const HJBProblem& p, const Grid& grid,
                                                  double R_0, double tol,
                                                  const SchemeConfig& cfg);

/// Per-node Hamiltonian minimizers for a stored value function, using
/// gradient_at on every (layer, node).
ControlField synthesize_feedback(const HJBProblem& p, const ValueFunction& u, double R,
                                 int m_alpha);

/// Serialize a control field: header t,x_1..x_d,alpha_1..alpha_d; rows
/// time-major then lexicographic, floats at 17 significant digits.
void write_control_csv(const ControlField& f, const std::string& path);

/// Serialize an escalation trace: header stage,radius,sup_grad,delta_sup.
void write_trace_csv(const TruncationTrace& trace, const std::string& path);

}  // namespace hjb
