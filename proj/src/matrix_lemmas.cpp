#include "hjblab/matrix_lemmas.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hjblab/errors.hpp"
#include "hjblab/rng.hpp"

namespace hjb {

SymmetricMatrix::SymmetricMatrix(int d) {
    if (d < 1) throw std::invalid_argument("SymmetricMatrix: dimension must be >= 1");
    d_ = d;
    packed_.assign(static_cast<std::size_t>(d) * (d + 1) / 2, 0.0);
}

SymmetricMatrix SymmetricMatrix::scaled_identity(int d, double m) {
    SymmetricMatrix out(d);
    for (int i = 0; i < d; ++i) out(i, i) = m;
    return out;
}

SymmetricMatrix SymmetricMatrix::from_rows(int d, const std::vector<double>& rows) {
    if (rows.size() != static_cast<std::size_t>(d) * d)
        throw std::invalid_argument("SymmetricMatrix::from_rows: need d*d entries");
    SymmetricMatrix out(d);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            double upper = rows[static_cast<std::size_t>(i) * d + j];
            double lower = rows[static_cast<std::size_t>(j) * d + i];
            if (std::abs(upper - lower) > 1e-12 * std::max(1.0, std::abs(upper)))
                throw std::invalid_argument("SymmetricMatrix::from_rows: input is not symmetric");
            out(i, j) = upper;
        }
    }
    return out;
}

std::size_t SymmetricMatrix::pack_index(int i, int j) const {
    if (i < 0 || j < 0 || i >= d_ || j >= d_)
        throw std::out_of_range("SymmetricMatrix: index out of range");
    if (i > j) std::swap(i, j);
    // row i of the upper triangle starts after i full rows of shrinking length
    return static_cast<std::size_t>(i) * (2 * d_ - i - 1) / 2 + j;
}

double SymmetricMatrix::trace() const {
    double t = 0.0;
    for (int i = 0; i < d_; ++i) t += (*this)(i, i);
    return t;
}

double SymmetricMatrix::frobenius_norm() const {
    double s = 0.0;
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) s += (*this)(i, j) * (*this)(i, j);
    return std::sqrt(s);
}

double SymmetricMatrix::trace_product(const SymmetricMatrix& a, const SymmetricMatrix& b) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("trace_product: dimension mismatch");
    // Tr[AB] = sum_ij A_ij B_ij for symmetric A, B.
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        s += a(i, i) * b(i, i);
        for (int j = i + 1; j < a.dim(); ++j) s += 2.0 * a(i, j) * b(i, j);
    }
    return s;
}

SymmetricMatrix SymmetricMatrix::operator+(const SymmetricMatrix& rhs) const {
    if (d_ != rhs.d_) throw std::invalid_argument("SymmetricMatrix: dimension mismatch");
    SymmetricMatrix out(d_);
    for (std::size_t k = 0; k < packed_.size(); ++k) out.packed_[k] = packed_[k] + rhs.packed_[k];
    return out;
}

SymmetricMatrix SymmetricMatrix::operator-(const SymmetricMatrix& rhs) const {
    if (d_ != rhs.d_) throw std::invalid_argument("SymmetricMatrix: dimension mismatch");
    SymmetricMatrix out(d_);
    for (std::size_t k = 0; k < packed_.size(); ++k) out.packed_[k] = packed_[k] - rhs.packed_[k];
    return out;
}

SymmetricMatrix SymmetricMatrix::scaled(double s) const {
    SymmetricMatrix out(d_);
    for (std::size_t k = 0; k < packed_.size(); ++k) out.packed_[k] = packed_[k] * s;
    return out;
}

std::vector<double> eigenvalues(const SymmetricMatrix& m) {
    const int d = m.dim();
    // Work on a full copy; rotations are cheap at these sizes.
    std::vector<double> a(static_cast<std::size_t>(d) * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a[static_cast<std::size_t>(i) * d + j] = m(i, j);

    auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * d + j]; };

    const double tol = 1e-12 * std::max(m.frobenius_norm(), 1e-300);
    const int max_sweeps = 50;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) off = std::max(off, std::abs(at(i, j)));
        if (off <= tol) {
            std::vector<double> eig(d);
            for (int i = 0; i < d; ++i) eig[i] = at(i, i);
            std::sort(eig.begin(), eig.end());
            return eig;
        }
        // One cyclic sweep of all (p, q) pairs.
        for (int p = 0; p < d - 1; ++p) {
            for (int q = p + 1; q < d; ++q) {
                double apq = at(p, q);
                if (std::abs(apq) <= tol * 1e-3) continue;
                double app = at(p, p), aqq = at(q, q);
                double theta = 0.5 * (aqq - app) / apq;
                // Stable rotation: t = sign(theta) / (|theta| + sqrt(theta^2 + 1)).
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < d; ++k) {
                    double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    throw SolverError("eigenvalues: cyclic Jacobi did not converge in 50 sweeps");
}

double smallest_eigenvalue(const SymmetricMatrix& m) { return eigenvalues(m).front(); }

double largest_eigenvalue(const SymmetricMatrix& m) { return eigenvalues(m).back(); }

namespace {

double verdict_scale(double lhs, double rhs) {
    return std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

}  // namespace

MatrixBoundResult trace_product_bound(const SymmetricMatrix& a, const SymmetricMatrix& b,
                                      double m, double big_m) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("trace_product_bound: dimension mismatch");
    if (!(m >= 0.0) || !(big_m >= 0.0) || !std::isfinite(m) || !std::isfinite(big_m))
        throw std::invalid_argument("trace_product_bound: m and M must be finite and >= 0");

    const double tol_a = 1e-10 * std::max(1.0, a.frobenius_norm());
    const double tol_b = 1e-10 * std::max(1.0, b.frobenius_norm());
    double min_a = smallest_eigenvalue(a);
    if (min_a < m - tol_a) {
        std::ostringstream msg;
        msg << "trace_product_bound: A >= m*Id fails, smallest eigenvalue " << min_a
            << " < m = " << m;
        throw std::invalid_argument(msg.str());
    }
    double max_b = largest_eigenvalue(b);
    if (max_b > big_m + tol_b) {
        std::ostringstream msg;
        msg << "trace_product_bound: B <= M*Id fails, largest eigenvalue " << max_b
            << " > M = " << big_m;
        throw std::invalid_argument(msg.str());
    }

    MatrixBoundResult out;
    out.lhs = SymmetricMatrix::trace_product(a, b);
    out.rhs = m * b.trace() + big_m * (a.trace() - a.dim() * m);
    out.holds = out.lhs <= out.rhs + 1e-10 * verdict_scale(out.lhs, out.rhs);
    return out;
}

SymmetricMatrix doubling_hypothesis_block(const SymmetricMatrix& a, const SymmetricMatrix& x,
                                          const SymmetricMatrix& y, double c, double m) {
    const int d = a.dim();
    if (x.dim() != d || y.dim() != d)
        throw std::invalid_argument("doubling_hypothesis_block: dimension mismatch");
    SymmetricMatrix block(2 * d);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            double ca = c * a(i, j);
            double id = (i == j) ? m : 0.0;
            block(i, j) = ca + id - x(i, j);
            block(d + i, d + j) = ca + id - y(i, j);
        }
        for (int j = 0; j < d; ++j) block(i, d + j) = -c * a(i, j);
    }
    return block;
}

MatrixBoundResult doubling_matrix_bound(const SymmetricMatrix& a, const SymmetricMatrix& x,
                                        const SymmetricMatrix& y, double c, double m) {
    if (!(c > 0.0) || !(m > 0.0) || !std::isfinite(c) || !std::isfinite(m))
        throw std::invalid_argument("doubling_matrix_bound: C and m must be finite and > 0");

    SymmetricMatrix block = doubling_hypothesis_block(a, x, y, c, m);
    double min_eig = smallest_eigenvalue(block);
    if (min_eig < -1e-10 * std::max(1.0, block.frobenius_norm())) {
        std::ostringstream msg;
        msg << "doubling_matrix_bound: hypothesis block matrix is not PSD, "
            << "smallest eigenvalue " << min_eig;
        throw std::invalid_argument(msg.str());
    }

    MatrixBoundResult out;
    out.lhs = largest_eigenvalue(x - y);
    out.rhs = std::sqrt(2.0) * (2.0 * m + 2.0 * c + largest_eigenvalue(x + y));
    out.holds = out.lhs <= out.rhs + 1e-10 * verdict_scale(out.lhs, out.rhs);
    return out;
}

namespace {

SymmetricMatrix random_symmetric(int d, double half_width, SplitMix64& rng) {
    SymmetricMatrix out(d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) out(i, j) = rng.next_uniform(-half_width, half_width);
    return out;
}

/// G^T G for G with uniform entries: PSD by construction.
SymmetricMatrix random_psd(int d, double half_width, SplitMix64& rng) {
    std::vector<double> g(static_cast<std::size_t>(d) * d);
    for (double& v : g) v = rng.next_uniform(-half_width, half_width);
    SymmetricMatrix out(d);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k)
                s += g[static_cast<std::size_t>(k) * d + i] * g[static_cast<std::size_t>(k) * d + j];
            out(i, j) = s;
        }
    }
    return out;
}

}  // namespace

std::vector<DoublingInstance> generate_hypothesis_instances(int d, int n, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("generate_hypothesis_instances: d must be >= 1");
    if (n < 0) throw std::invalid_argument("generate_hypothesis_instances: n must be >= 0");

    std::vector<DoublingInstance> out;
    out.reserve(static_cast<std::size_t>(n));
    SplitMix64 rng(seed);

    for (int k = 0; k < n; ++k) {
        DoublingInstance inst;
        inst.a = random_psd(d, 1.0, rng);
        // Normalize so the quadratic form xi^T A xi stays within |xi|^2.
        double top = largest_eigenvalue(inst.a);
        if (top > 1.0) inst.a = inst.a.scaled(1.0 / top);
        inst.c = rng.next_uniform(0.1, 3.0);
        inst.m = rng.next_uniform(0.05, 2.0);

        SymmetricMatrix x0 = random_symmetric(d, 2.0, rng);
        SymmetricMatrix y0 = random_symmetric(d, 2.0, rng);
        // Keep the pair's sum spectrally top-heavy; flipping both signs
        // preserves the admissible-scale structure of the hypothesis.
        SymmetricMatrix sum = x0 + y0;
        if (largest_eigenvalue(sum) < -smallest_eigenvalue(sum)) {
            x0 = x0.scaled(-1.0);
            y0 = y0.scaled(-1.0);
        }

        auto block_psd = [&](double s) {
            SymmetricMatrix block =
                doubling_hypothesis_block(inst.a, x0.scaled(s), y0.scaled(s), inst.c, inst.m);
            return smallest_eigenvalue(block) >= 0.0;
        };

        // Scale zero always satisfies the hypothesis (the block is then
        // C [[A,-A],[-A,A]] + m I >= m I); the admissible scales form an
        // interval starting at 0 because the block's smallest eigenvalue is
        // concave along the scale, so bisection is sound.
        const double s_max = 4.0;
        double scale;
        if (block_psd(s_max)) {
            scale = s_max;
        } else {
            double lo = 0.0, hi = s_max;
            for (int iter = 0; iter < 60; ++iter) {
                double mid = 0.5 * (lo + hi);
                if (block_psd(mid))
                    lo = mid;
                else
                    hi = mid;
            }
            scale = lo * 0.999;  // small safety margin inside the PSD interval
        }
        inst.x = x0.scaled(scale);
        inst.y = y0.scaled(scale);
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<TraceInstance> generate_trace_instances(int d, int n, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("generate_trace_instances: d must be >= 1");
    if (n < 0) throw std::invalid_argument("generate_trace_instances: n must be >= 0");

    std::vector<TraceInstance> out;
    out.reserve(static_cast<std::size_t>(n));
    SplitMix64 rng(seed);
    for (int k = 0; k < n; ++k) {
        TraceInstance inst;
        inst.m = rng.next_uniform(0.0, 2.0);
        inst.big_m = rng.next_uniform(0.0, 2.0);
        SymmetricMatrix up = random_psd(d, 1.0, rng);
        SymmetricMatrix down = random_psd(d, 1.0, rng);
        inst.a = SymmetricMatrix::scaled_identity(d, inst.m) + up;
        inst.b = SymmetricMatrix::scaled_identity(d, inst.big_m) - down;
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace hjb
