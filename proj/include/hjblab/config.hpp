#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hjblab/estimates.hpp"
#include "hjblab/grid.hpp"
#include "hjblab/mc_verify.hpp"
#include "hjblab/pde_solver.hpp"
#include "hjblab/problem.hpp"

namespace hjb {

/// Experiment description parsed from a strict INI file.
///
/// Sections and keys (all optional unless noted; unknown sections or keys are
/// fatal so experiment files stay drift-proof):
///
///   [problem]  family (quadratic), dimension, horizon, discount,
///              b2.matrix (d*d comma list), b2.offset (d comma list), b2.clamp,
///              sigma.scale, sigma.mode (constant|sqrt_growth), sigma.clamp,
///              f2.mode (affine|norm|abs_first), f2.slope, f2.offset, f2.clamp,
///              g.mode, g.slope, g.offset, g.clamp
///   [grid]     R_x, n_x, n_t, center (d comma list), ladder
///   [solver]   mode (implicit|explicit), m_alpha, tol_policy, max_sweeps,
///              tol_linear, R0_control, tol_truncation, max_doublings,
///              cross_check, cross_check_tol
///   [mc]       n_paths, dt_sim, seed, antithetic, allowance,
///              baselines (semicolon-separated comma vectors)
///   [certificates] core_fraction, n_pairs, seed, grad_bound, lipschitz_bound,
///              growth_bound, uniformity
///   [output]   dir
///
/// Values are scalars, comma-separated vectors, or semicolon-separated vector
/// lists; comment lines start with '#' or ';' (full-line only, since ';'
/// separates vectors inside values).  Unset tolerances resolve to
/// grid-derived defaults: dt_sim -> grid dt, mc allowance -> 2(h+dt),
/// cross_check_tol -> 3(h+dt).
struct ExperimentConfig {
    // [problem]
    std::string family = "quadratic";
    int dimension = 1;
    double horizon = 1.0;
    double discount = 0.0;
    AffineMapSpec b2;
    SigmaSpec sigma;
    ScalarSpec f2;
    ScalarSpec g;

    // [grid]
    double R_x = 4.0;
    int n_x = 129;
    int n_t = 256;
    std::vector<double> center;  // resolved to zeros(dimension)
    int ladder = 2;

    // [solver]
    SchemeConfig scheme;  // core_fraction mirrored from [certificates]
    double R0_control = 0.25;
    double tol_truncation = 1e-6;
    bool cross_check = true;
    double cross_check_tol = std::numeric_limits<double>::quiet_NaN();

    // [mc]
    SimulationConfig mc;

    // [certificates]
    CertificateConfig cert;
    double uniformity = 0.05;

    // [output]
    std::string out_dir = "out";

    /// FNV-1a hash of the raw config bytes, recorded in the manifest.
    std::uint64_t config_hash = 0;
};

/// Parses and validates config text; `origin` labels diagnostics
/// ("file.ini:12: ...").  Throws ConfigError on unknown keys, type errors, or
/// contradictory settings (e.g. cross_check with a nonzero discount).
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

/// Reads the file and delegates to parse_config_text.
ExperimentConfig parse_config_file(const std::string& path);

/// Instantiates the configured problem family with its derived constants.
HJBProblem build_problem(const ExperimentConfig& cfg);

/// Builds the configured grid.
Grid build_grid(const ExperimentConfig& cfg);

/// Writes every resolved parameter plus the config hash as key,value rows.
void write_manifest_csv(const ExperimentConfig& cfg, const std::string& path);

}  // namespace hjb
