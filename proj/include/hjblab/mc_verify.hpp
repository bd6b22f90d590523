#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hjblab/grid.hpp"
#include "hjblab/pde_solver.hpp"
#include "hjblab/problem.hpp"

namespace hjb {

/// Independent check of the PDE solution against its definition as the value
/// of a control problem: simulate the controlled diffusion under a feedback
/// law and average the running-plus-terminal cost.

struct SimulationConfig {
    long long n_paths = 100000;
    double dt_sim = 1.0 / 256.0;
    std::uint64_t seed = 2024;
    /// Simulate paths in antithetic pairs (the pair shares draws, one path
    /// negates them); n_paths must then be even and the standard error is
    /// computed over pair averages.
    bool antithetic = false;
    /// Discretization allowance added to 3 standard errors in verify_value.
    double allowance = 0.0;
    /// Constant policies the synthesized feedback must not lose against.
    std::vector<std::vector<double>> baselines;
};

struct CostEstimate {
    double mean = 0.0;
    /// Sample standard deviation of the per-path (or per-pair) costs divided
    /// by the square root of their count.
    double std_error = 0.0;
    long long n_paths = 0;
    double t0 = 0.0;
    std::vector<double> x0;
    /// Fraction of paths that left the policy's interpolation box at least
    /// once (0 for constant policies, which need no box).
    double exit_fraction = 0.0;
};

/// Euler scheme X <- X + [b1(s,X,a) + b2(s,X)] dt + sigma(s,X) sqrt(dt) xi
/// from (t0, x0) to the horizon; cost accumulates
/// sum e^{c(s - t0)} [f1(s,X,a) + f2(s,X)] dt at left endpoints plus the
/// undiscounted terminal g(X_T).  Paths are independent reproducible streams
/// (the stream state hashes the seed and path index together); sums use a
/// fixed-order pairwise reduction, so the
/// estimate is bitwise reproducible regardless of scheduling.  The feedback
/// is interpolated from the field and frozen at the box edge once a path
/// exits (clamped queries); exits are counted, not fatal.  A nonfinite state
/// throws SolverError naming the path and step.
CostEstimate simulate_cost(const HJBProblem& p, const ControlField& policy, double t0,
                           const std::vector<double>& x0, const SimulationConfig& cfg);

/// Same scheme under a constant-in-(t,x) control.
CostEstimate simulate_cost(const HJBProblem& p, const std::vector<double>& constant_policy,
                           double t0, const std::vector<double>& x0,
                           const SimulationConfig& cfg);

struct BaselineCheck {
    std::vector<double> alpha;
    double mean = 0.0;
    double std_error = 0.0;
    /// Feedback cost <= baseline cost within 3 combined standard errors.
    bool pass = false;
};

struct PointCheck {
    double t = 0.0;
    std::vector<double> x;
    double u_pde = 0.0;
    double v_mc = 0.0;
    double std_error = 0.0;
    double exit_fraction = 0.0;
    /// |v_mc - u_pde| <= 3 std_error + allowance.
    bool value_match = false;
    std::vector<BaselineCheck> baselines;
    bool pass = false;
};

struct VerificationReport {
    std::vector<PointCheck> points;
    bool all_pass = false;
};

struct VerifyPoint {
    double t = 0.0;
    std::vector<double> x;
};

/// For each query point: simulate the cost under the synthesized feedback,
/// compare with the interpolated PDE value within 3 standard errors plus the
/// configured allowance, and require the feedback cost to be no worse than
/// each configured constant baseline within 3 combined standard errors.
VerificationReport verify_value(const HJBProblem& p, const ValueFunction& u,
                                const ControlField& field,
                                const std::vector<VerifyPoint>& points,
                                const SimulationConfig& cfg);

/// CSV rows t,x_1..x_d,u_pde,v_mc,stderr,verdict.
void write_verification_csv(const VerificationReport& report, const std::string& path);

}  // namespace hjb
