#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hjblab/grid.hpp"
#include "hjblab/pde_solver.hpp"
#include "hjblab/problem.hpp"

namespace hjb {

/// Measured quantitative certificates on a computed value function.  All
/// spatial scans except the growth envelope are restricted to an interior
/// core box (|x_i - center_i| <= fraction * R_x on every axis) so that
/// artificial-boundary effects do not pollute the measurements.

/// Flat indices (lexicographic) of the nodes inside the core box.
std::vector<std::size_t> core_box_nodes(const Grid& g, double fraction);

/// Largest gradient norm over core-box nodes across all time layers.
double sup_gradient(const ValueFunction& u, double core_fraction);

/// Largest same-time secant quotient |u(t,x) - u(t,y)| / |x - y| over node
/// pairs inside the core box.  All pairs are scanned when the per-layer pair
/// count is at most 2e4; otherwise the scan uses `n_pairs` seeded random
/// pairs plus every nearest-neighbor pair (adjacent core nodes dominate the
/// gradient-scale quotient).
double lipschitz_quotient(const ValueFunction& u, int n_pairs, std::uint64_t seed,
                          double core_fraction);

/// Largest value of u(t,x) - u(t,y) - K_tilde * |x - y| over the same pair
/// sample as lipschitz_quotient.  Non-positive (up to nodal roundoff)
/// whenever K_tilde dominates the measured Lipschitz quotient.
double deteriorated_check(const ValueFunction& u, double K_tilde, int n_pairs,
                          std::uint64_t seed, double core_fraction);

/// Linear-growth envelope coefficient: max over ALL nodes and layers of
/// |u| / (1 + |x|).
double growth_envelope(const ValueFunction& u);

/// Feedback-size margin: min over all nodes and layers of
/// L_A (1 + |Du|) - |alpha|.  The certificate passes when the margin is no
/// worse than minus the control-mesh resolution.
double control_norm_certificate(const ControlField& field, const ValueFunction& u,
                                double L_A);

/// Default certificate ceiling derived from the declared problem constants:
/// 1.25 * (L_g + integral of L_f2) * exp(L_b * horizon).
double default_certificate_bound(const RegularityConstants& k, double horizon);

struct CertificateConfig {
    double core_fraction = 0.6;
    int n_pairs = 4000;
    std::uint64_t seed = 2024;
    /// Ceilings for the measured constants; NaN means "use
    /// default_certificate_bound(constants, horizon)".
    double grad_bound = std::numeric_limits<double>::quiet_NaN();
    double lipschitz_bound = std::numeric_limits<double>::quiet_NaN();
    double growth_bound = std::numeric_limits<double>::quiet_NaN();
    /// Slack granted to the control-size certificate (resolution of the
    /// control search mesh; 0 when minimization is exact).
    double control_mesh = 0.0;
};

struct CertificateEntry {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    /// True when the check is value <= threshold, false for value >= threshold.
    bool upper_bound = true;
    bool pass = false;
};

struct CertificateReport {
    double sup_grad = 0.0;
    double lipschitz = 0.0;
    double growth_L = 0.0;
    double K_tilde = 0.0;
    double M_tilde = 0.0;
    double control_margin = 0.0;
    bool has_control = false;
    double core_fraction = 0.6;
    std::vector<CertificateEntry> entries;
    bool all_pass = false;
};

/// Measures every certificate on `u` (and `field` when non-null) and renders
/// verdicts against the configured or defaulted ceilings.  The deteriorated
/// check uses K_tilde = the gradient ceiling, so its margin must be
/// non-positive up to nodal roundoff whenever the Lipschitz certificate holds.
CertificateReport build_certificates(const ValueFunction& u, const ControlField* field,
                                     const RegularityConstants& k, double horizon,
                                     const CertificateConfig& cfg);

/// CSV report: certificate,value,threshold,verdict,core_fraction.
void write_certificates_csv(const CertificateReport& report, const std::string& path);

}  // namespace hjb
