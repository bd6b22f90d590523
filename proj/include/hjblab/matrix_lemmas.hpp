#pragma once

#include <cstdint>
#include <vector>

namespace hjb {

/// Dense symmetric matrix with packed storage: each unordered index pair is
/// stored exactly once, so symmetry is a structural invariant, not a runtime
/// property that can drift.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;

    /// Zero matrix of dimension d (d >= 1).
    explicit SymmetricMatrix(int d);

    /// m * Id.
    static SymmetricMatrix scaled_identity(int d, double m);

    /// From a full row-major d*d array; off-diagonal pairs must agree to within
    /// |a_ij - a_ji| <= 1e-12 * max(1, |a_ij|), else throws std::invalid_argument.
    static SymmetricMatrix from_rows(int d, const std::vector<double>& rows);

    int dim() const { return d_; }

    /// Entry accessors; (i, j) and (j, i) alias the same storage.
    double operator()(int i, int j) const { return packed_[pack_index(i, j)]; }
    double& operator()(int i, int j) { return packed_[pack_index(i, j)]; }

    double trace() const;

    /// Frobenius norm; the "scale" used by tolerance checks.
    double frobenius_norm() const;

    /// Tr[A B] via the symmetric-entry sum (exact pairing, no full products).
    static double trace_product(const SymmetricMatrix& a, const SymmetricMatrix& b);

    SymmetricMatrix operator+(const SymmetricMatrix& rhs) const;
    SymmetricMatrix operator-(const SymmetricMatrix& rhs) const;
    SymmetricMatrix scaled(double s) const;

private:
    std::size_t pack_index(int i, int j) const;

    int d_ = 0;
    std::vector<double> packed_;  // upper triangle, row by row
};

/// All eigenvalues, ascending, via cyclic Jacobi rotations.
/// Sweeps run until every off-diagonal entry is below 1e-12 * ||matrix||_F.
/// Intended for the small dimensions used here (d <= ~20); throws SolverError
/// if the sweep cap (50) is ever hit, which does not happen at these sizes.
std::vector<double> eigenvalues(const SymmetricMatrix& m);

double smallest_eigenvalue(const SymmetricMatrix& m);
double largest_eigenvalue(const SymmetricMatrix& m);

/// Result of one inequality evaluation: both sides plus the verdict
/// holds = (lhs <= rhs + 1e-10 * scale), scale = max(1, |lhs|, |rhs|).
struct MatrixBoundResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// Trace comparison bound: for symmetric A >= m*Id and B <= M*Id with m, M >= 0,
///   Tr[A B] <= m Tr[B] + M (Tr[A] - d m).
/// Preconditions are verified through the eigenvalue oracle with tolerance
/// 1e-10 * scale; a violation throws std::invalid_argument naming the failing
/// side and the offending eigenvalue.
MatrixBoundResult trace_product_bound(const SymmetricMatrix& a, const SymmetricMatrix& b,
                                      double m, double big_m);

/// Doubling matrix bound: for symmetric A, X, Y and C, m > 0 such that the
/// 2d x 2d block matrix
///   [[C A + m Id - X, -C A], [-C A, C A + m Id - Y]]
/// is positive semidefinite (checked via its smallest eigenvalue, tolerance
/// -1e-10 * scale),
///   lambda_max(X - Y) <= sqrt(2) (2m + 2C + lambda_max(X + Y)).
/// A hypothesis violation throws std::invalid_argument reporting the block
/// matrix's smallest eigenvalue.
MatrixBoundResult doubling_matrix_bound(const SymmetricMatrix& a, const SymmetricMatrix& x,
                                        const SymmetricMatrix& y, double c, double m);

/// Assemble the doubling-bound hypothesis block matrix (exposed for tests).
SymmetricMatrix doubling_hypothesis_block(const SymmetricMatrix& a, const SymmetricMatrix& x,
                                          const SymmetricMatrix& y, double c, double m);

/// One generated instance for the doubling bound property suite.
struct DoublingInstance {
    SymmetricMatrix a;
    SymmetricMatrix x;
    SymmetricMatrix y;
    double c = 0.0;
    double m = 0.0;
};

/// Deterministic instance generator for the doubling bound.
///
/// Draws A positive semidefinite with largest eigenvalue normalized to <= 1,
/// draws symmetric X0, Y0 (sign-flipped together when lambda_max(X0+Y0) <
/// |lambda_min(X0+Y0)|, so the pair's sum is spectrally top-heavy), then
/// shrinks (X0, Y0) by the largest scale in (0, 4] that keeps the hypothesis
/// block matrix positive semidefinite, found by bisection against the
/// smallest-eigenvalue oracle. Every emitted tuple satisfies the hypothesis by
/// construction and re-verifies against doubling_matrix_bound's precondition.
/// Fixed seed => identical sequence.
std::vector<DoublingInstance> generate_hypothesis_instances(int d, int n, std::uint64_t seed);

/// One generated instance for the trace bound property suite:
/// A = m Id + (PSD sample), B = M Id - (PSD sample), with m, M >= 0.
struct TraceInstance {
    SymmetricMatrix a;
    SymmetricMatrix b;
    double m = 0.0;
    double big_m = 0.0;
};

/// Deterministic instance generator for the trace bound (same construction
/// the property suite and the CLI `lemmas` command run on).
std::vector<TraceInstance> generate_trace_instances(int d, int n, std::uint64_t seed);

}  // namespace hjb
