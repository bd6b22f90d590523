#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hjb {

/// Process exit codes shared by the CLI and the batch front end.
/// Fixed vocabulary so CI pipelines can compose on them.
enum ExitCode : int {
    exit_ok = 0,              // all checks passed
    exit_certificate = 1,     // a measured certificate failed its threshold
    exit_escalation = 2,      // control-truncation escalation did not converge
    exit_mc = 3,              // Monte Carlo vs PDE comparison out of allowance
    exit_crosscheck = 4,      // nonlinear vs transform route disagreement
    exit_config = 64,         // config parse/validation error
    exit_data = 65,           // data file schema/content mismatch
};

/// Config parse or validation failure (unknown key, bad type, missing section...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

/// Data file (CSV) schema or content mismatch.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

/// Numerical solver failure. Carries the residual/stage history that led to it
/// so callers can attach diagnostics (policy-iteration residuals, escalation trace).
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what_arg, std::vector<double> history = {})
        : std::runtime_error(what_arg), history_(std::move(history)) {}

    const std::vector<double>& history() const { return history_; }

private:
    std::vector<double> history_;
};

/// Requested transform is not defined for the given problem
/// (e.g. exponential substitution outside the quadratic family or with discounting).
class TransformError : public std::runtime_error {
public:
    explicit TransformError(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

}  // namespace hjb
