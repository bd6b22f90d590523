#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace hjb {

/// Declared regularity/growth constants for a problem instance.
///
/// The inequalities they promise (audited by validate_assumptions):
///   |b1(t,x,a) - b1(t,y,a)| <= L_b (1+|a|) |x-y|,  |b1(t,x,a)| <= L_b (1+|a|)
///   |b2(t,x)  - b2(t,y)|  <= L_b |x-y|,            |b2(t,x)|  <= L_b (1+|x|)
///   |f1(t,x,a) - f1(t,y,a)| <= L_f1 |x-y|
///   c_f1 |a|^2 - c_f1_prime <= f1(t,x,a) <= C_f1 |a|^2 + C_f1_prime
///   |f2(t,x) - f2(t,y)| <= L_f2(t) |x-y|,          |f2(t,x)| <= L_f2(t) (1+|x|)
///   |sigma(t,x) - sigma(t,y)| <= L_sigma |x-y|^(1/2)
///   |g(x) - g(y)| <= L_g |x-y|
///   xi' sigma sigma'(t,x) xi >= eta_sigma |xi|^2
///   |argmin_a [b1.p + f1]| <= L_A (1 + |p|)
struct RegularityConstants {
    double L_b = 0.0;
    double L_f1 = 0.0;
    double c_f1 = 0.0;
    double c_f1_prime = 0.0;
    double C_f1 = 0.0;
    double C_f1_prime = 0.0;
    std::function<double(double)> L_f2;  // t -> instantaneous source Lipschitz bound
    double L_f2_integral = 0.0;          // integral of L_f2 over [0, T]
    double L_sigma = 0.0;
    double L_g = 0.0;
    double eta_sigma = 0.0;  // ellipticity floor, strictly positive
    double L_A = 0.0;        // feedback-norm slope
};

/// Validate the constants block: all entries finite and nonnegative,
/// eta_sigma > 0, c_f1 <= C_f1, and L_f2_integral consistent with Simpson
/// quadrature of L_f2 over [0, horizon] (relative tolerance 1e-6).
/// Throws std::invalid_argument naming the violated condition.
void check_constants(const RegularityConstants& k, double horizon);

/// Admissible control set: the whole space or a centered closed ball.
struct ControlSet {
    bool bounded = false;
    double radius = std::numeric_limits<double>::infinity();
};

using VectorMap = std::function<void(double, const double*, double*)>;        // (t,x) -> R^d
using MatrixMap = std::function<void(double, const double*, double*)>;        // (t,x) -> d x d row-major
using ControlVectorMap =
    std::function<void(double, const double*, const double*, double*)>;       // (t,x,a) -> R^d
using ControlScalarMap = std::function<double(double, const double*, const double*)>;
using ScalarMap = std::function<double(double, const double*)>;
using TerminalMap = std::function<double(const double*)>;

/// Parabolic terminal-value problem
///   dt u + c u + 1/2 Tr[sigma sigma' D^2 u]
///     + inf_a [ (b1(t,x,a) + b2(t,x)) . Du + f1(t,x,a) ] + f2(t,x) = 0,
///   u(T, x) = g(x),
/// solved backward from the terminal layer. Immutable after construction;
/// coefficient callables must be reentrant (shared across threads).
struct HJBProblem {
    int dimension = 0;
    double horizon = 0.0;   // T
    double discount = 0.0;  // c (zero-order coefficient)
    ControlVectorMap b1;
    VectorMap b2;
    MatrixMap sigma;
    ControlScalarMap f1;
    ScalarMap f2;
    TerminalMap g;
    ControlSet control_set;
    RegularityConstants constants;
    std::string family_tag;  // "quadratic" or "custom"

    /// True when b1 = sigma' a and f1 = |a|^2 / 2, so the Hamiltonian
    /// minimization has the closed form -|sigma' p|^2 / 2 at a = -sigma' p.
    bool quadratic = false;
};

/// Evaluate sigma sigma' at (t, x) into `out` (row-major d x d).
void sigma_sigma_t(const HJBProblem& p, double t, const double* x, double* out);

/// ---- Built-in parametric coefficient families -----------------------------

/// x -> M pi(x) + offset, with pi the projection onto the centered ball of
/// radius clamp_radius (identity when the radius is infinite).
struct AffineMapSpec {
    std::vector<double> matrix;  // d x d row-major
    std::vector<double> offset;  // size d
    double clamp_radius = std::numeric_limits<double>::infinity();
};

enum class SigmaMode {
    constant,     // sigma = scale * Id
    sqrt_growth,  // sigma = scale * sqrt(1 + min(|x|, clamp)) * Id (clamp finite)
};

struct SigmaSpec {
    double scale = 1.0;
    SigmaMode mode = SigmaMode::constant;
    double clamp_radius = std::numeric_limits<double>::infinity();
};

enum class ScalarMode {
    affine,     // slope * clamp(x_1) + offset
    norm,       // slope * min(|x|, clamp) + offset
    abs_first,  // slope * min(|x_1|, clamp) + offset
};

struct ScalarSpec {
    ScalarMode mode = ScalarMode::affine;
    double slope = 0.0;
    double offset = 0.0;
    double clamp_radius = std::numeric_limits<double>::infinity();
};

/// Lipschitz constant of the scalar family (|slope| for every mode).
double scalar_spec_lipschitz(const ScalarSpec& s);
/// Evaluate the scalar family at x.
double scalar_spec_eval(const ScalarSpec& s, const double* x, int d);

/// Build the quadratic-cost problem instance
///   b1 = sigma' a, f1 = |a|^2 / 2, control set = whole space,
/// with coefficients drawn from the parametric families above and the
/// constants block derived from the family parameters. The resulting
/// Hamiltonian minimum is -|sigma' p|^2/2 + b2 . p (plus the f2 source
/// handled separately) and the feedback law is a = -sigma' Du.
///
/// Throws std::invalid_argument for: nonfinite parameters, d < 1,
/// T <= 0, sigma scale <= 0 (ellipticity floor would vanish),
/// sqrt_growth sigma without a finite clamp radius, or spec sizes
/// inconsistent with d.
HJBProblem quadratic_problem(int d, double T, double c, const AffineMapSpec& b2_spec,
                             const SigmaSpec& sigma_spec, const ScalarSpec& f2_spec,
                             const ScalarSpec& g_spec);

/// One audited inequality: empirical extreme vs declared constant.
struct AssumptionCheck {
    std::string name;   // which inequality was audited
    double estimated;   // empirical extreme over the sample set
    double declared;    // declared threshold
    double margin;      // signed distance to the slackened threshold; >= 0 passes
    bool floor;         // true when declared is a lower bound (ellipticity)
    bool pass;
};

/// Sampling audit of the declared constants.
struct AssumptionReport {
    std::vector<AssumptionCheck> checks;
    int n_samples = 0;
    std::uint64_t seed = 0;
    double slack = 0.0;
    bool all_pass = false;
    /// Nonempty when a coefficient evaluated to a nonfinite value; names the
    /// coefficient and the sample point. Forces all_pass = false.
    std::string hard_failure;
};

/// Estimate each declared constant by the empirical supremum quotient over
/// n_samples random (t, x, y, alpha) tuples with x, y in the centered box of
/// half-width box_radius, and compare against the declared value with
/// multiplicative slack (default 5%). Sample i is fully determined by
/// (seed, i), so estimates with the same seed are monotone in n_samples.
/// Upper-bound checks pass iff estimated <= declared * (1 + slack); the
/// ellipticity floor passes iff estimated >= declared * (1 - slack).
AssumptionReport validate_assumptions(const HJBProblem& p, int n_samples, double box_radius,
                                      std::uint64_t seed, double slack = 0.05);

/// Escalation target radius for control truncation: L_A * (1 + grad_bound).
/// Throws std::invalid_argument for nonfinite or negative grad_bound.
double control_bound_radius(const RegularityConstants& k, double grad_bound);

}  // namespace hjb
