#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "hjblab/config.hpp"

namespace hjb {

/// Batch front end: each command reads an experiment config, runs one
/// workflow, writes CSV tables under the output directory, and returns a
/// fixed exit code (see ExitCode in errors.hpp) for CI composition.

struct CliOptions {
    std::string command;      // solve | certify | verify | ladder | lemmas
    std::string config_path;  // required except for lemmas
    std::string u_csv;        // certify: value-function CSV to audit
    std::string out_dir;      // nonempty overrides [output] dir
    bool has_seed = false;
    std::uint64_t seed = 0;  // overrides [mc] and [certificates] seeds
    bool quiet = false;
    long long lemma_instances = 10000;
    std::uint64_t lemma_seed = 20240817;
};

/// Dispatches one command and maps every failure onto the exit-code
/// vocabulary; diagnostics go to err, progress to log.
int run_cli(const CliOptions& opt, std::ostream& log, std::ostream& err);

/// Solve under truncation escalation; writes u.csv, controls.csv,
/// truncation_trace.csv, manifest.csv.  Exit 0, or 2 with the partial trace
/// when escalation fails to stabilize.
int cmd_solve(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err);

/// Audit an existing value-function CSV against the declared grid and
/// constants; writes certificates.csv, manifest.csv.  Exit 0 iff every
/// certificate passes, else 1.
int cmd_certify(const ExperimentConfig& cfg, const std::string& u_csv, std::ostream& log,
                std::ostream& err);

/// Solve, then verify against the stochastic-control definition at rule
/// points (and against the exponential-substitution route when enabled);
/// writes verify.csv and colehopf.csv plus the solve outputs.  Exit 0, 3 on a
/// Monte Carlo mismatch, 4 on a route disagreement.
int cmd_verify(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err);

/// Solve across the refinement x box ladder and compare the measured
/// gradient bounds; writes ladder.csv, manifest.csv.  Exit 0 iff the relative
/// spread stays within the configured uniformity bound, else 1.
int cmd_ladder(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err);

/// Run the matrix-inequality property suites (trace bound d<=8, doubling
/// bound d<=6, `instances` generated cases each) plus the worked examples.
/// Exit 0 iff no violations.
int cmd_lemmas(long long instances, std::uint64_t seed, std::ostream& log);

}  // namespace hjb
