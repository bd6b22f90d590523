#include "hjblab/stepper.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hjblab/errors.hpp"

namespace hjb {

namespace {

/// Sparse layer operator L w (node) = sum_j w_j (w(j) - w(node))
/// + ghost_w (ghost - w(node)), rows assembled per node.
struct AssembledSystem {
    int cap = 0;                    // max neighbors per row
    std::vector<std::size_t> nbr;   // [node*cap + k]
    std::vector<double> w;          // matching weights (may be negative at outflow boundary)
    std::vector<int> cnt;           // neighbors used per node
    std::vector<double> wsum;       // signed sum of neighbor weights per node
    std::vector<double> ghost_w;    // total ghost weight per node (>= 0)
    std::vector<double> ghost_rhs;  // sum of ghost weight * ghost value per node
};

void assemble(const StepSpec& spec, const LayerCoefficients& coef, AssembledSystem& sys) {
    const Grid& g = *spec.grid;
    const int d = g.dim();
    const std::size_t nn = g.n_nodes();
    const double h = g.h();
    const double inv_2h2 = 1.0 / (2.0 * h * h);
    const double inv_h = 1.0 / h;

    if (spec.ghosts == GhostPolicy::values) {
        if (spec.ghost_values == nullptr ||
            spec.ghost_values->size() != nn * static_cast<std::size_t>(2 * d))
            throw std::invalid_argument(
                "backward_step: GhostPolicy::values needs a ghost table of size n_nodes * 2d");
    }

    sys.cap = 2 * d + d * (d - 1);
    sys.nbr.assign(nn * sys.cap, 0);
    sys.w.assign(nn * sys.cap, 0.0);
    sys.cnt.assign(nn, 0);
    sys.wsum.assign(nn, 0.0);
    sys.ghost_w.assign(nn, 0.0);
    sys.ghost_rhs.assign(nn, 0.0);

    std::vector<int> idx(d);
    std::vector<double> ew_low(d), ew_high(d);
    for (std::size_t node = 0; node < nn; ++node) {
        g.node_index(node, idx.data());
        const double* a = coef.a.data() + node * static_cast<std::size_t>(d) * d;
        const double* mu = coef.mu.data() + node * static_cast<std::size_t>(d);
        double* wrow = sys.w.data() + node * sys.cap;
        std::size_t* nrow = sys.nbr.data() + node * sys.cap;
        int cnt = 0;
        auto push = [&](std::size_t j, double weight) {
            nrow[cnt] = j;
            wrow[cnt] = weight;
            ++cnt;
            sys.wsum[node] += weight;
        };
        auto add_ghost = [&](int axis, int side, double weight) {
            sys.ghost_w[node] += weight;
            sys.ghost_rhs[node] +=
                weight * (*spec.ghost_values)[node * 2 * d + 2 * axis + side];
        };

        // Row diagonal dominance of a (needed by the cross-term splitting).
        for (int k = 0; k < d; ++k) {
            double off = 0.0;
            for (int l = 0; l < d; ++l)
                if (l != k) off += std::fabs(a[k * d + l]);
            if (off > 0.0) {
                const double scale = std::max(1.0, std::fabs(a[k * d + k]) + off);
                if (a[k * d + k] - off < -1e-12 * scale) {
                    std::ostringstream os;
                    os << "backward_step: diffusion matrix is not diagonally dominant at node "
                       << node << " (axis " << k << ": diagonal " << a[k * d + k]
                       << " < off-diagonal sum " << off
                       << "); the monotone cross-term splitting does not apply";
                    throw SolverError(os.str(), {});
                }
            }
        }

        // Diagonal diffusion.
        for (int k = 0; k < d; ++k) {
            const double wd = a[k * d + k] * inv_2h2;
            const bool low = idx[k] == 0;
            const bool high = idx[k] == g.n_x - 1;
            ew_low[k] = 0.0;
            ew_high[k] = 0.0;
            if (!low && !high) {
                ew_low[k] = wd;
                ew_high[k] = wd;
            } else if (spec.ghosts == GhostPolicy::values) {
                if (low) {
                    ew_high[k] = wd;
                    add_ghost(k, 0, wd);
                } else {
                    ew_low[k] = wd;
                    add_ghost(k, 1, wd);
                }
            }
            // GhostPolicy::linear: the diffusion along a boundary-normal axis
            // cancels against the extrapolated ghost, contributing nothing.
        }

        // Monotone 7-point splitting of cross terms (interior pairs only).
        for (int k = 0; k < d; ++k) {
            if (idx[k] == 0 || idx[k] == g.n_x - 1) continue;
            for (int l = k + 1; l < d; ++l) {
                if (idx[l] == 0 || idx[l] == g.n_x - 1) continue;
                const double q = 0.5 * (a[k * d + l] + a[l * d + k]);
                if (q == 0.0) continue;
                const double r = std::fabs(q) * inv_2h2;
                ew_low[k] -= r;
                ew_high[k] -= r;
                ew_low[l] -= r;
                ew_high[l] -= r;
                const std::size_t sk = g.stride(k), sl = g.stride(l);
                if (q > 0.0) {
                    push(node + sk + sl, r);
                    push(node - sk - sl, r);
                } else {
                    push(node + sk - sl, r);
                    push(node - sk + sl, r);
                }
            }
        }
        // Roundoff guard: dominance was verified above, so any residual
        // negative edge weight is noise.
        for (int k = 0; k < d; ++k) {
            if (ew_low[k] < 0.0 && ew_low[k] > -1e-12) ew_low[k] = 0.0;
            if (ew_high[k] < 0.0 && ew_high[k] > -1e-12) ew_high[k] = 0.0;
        }

        // Upwind drift.
        for (int k = 0; k < d; ++k) {
            const double m = mu[k];
            const bool low = idx[k] == 0;
            const bool high = idx[k] == g.n_x - 1;
            if (!low && !high) {
                if (m >= 0.0)
                    ew_high[k] += m * inv_h;
                else
                    ew_low[k] += -m * inv_h;
            } else if (spec.ghosts == GhostPolicy::linear) {
                // One-sided differences collapse to the inward difference
                // under the linear ghost; outflow makes the weight negative.
                if (low)
                    ew_high[k] += m * inv_h;
                else
                    ew_low[k] += -m * inv_h;
            } else {
                if (low) {
                    if (m >= 0.0)
                        ew_high[k] += m * inv_h;
                    else
                        add_ghost(k, 0, -m * inv_h);
                } else {
                    if (m < 0.0)
                        ew_low[k] += -m * inv_h;
                    else
                        add_ghost(k, 1, m * inv_h);
                }
            }
        }

        for (int k = 0; k < d; ++k) {
            const std::size_t s = g.stride(k);
            if (idx[k] > 0 && ew_low[k] != 0.0) push(node - s, ew_low[k]);
            if (idx[k] < g.n_x - 1 && ew_high[k] != 0.0) push(node + s, ew_high[k]);
        }
        sys.cnt[node] = cnt;
    }
}

std::vector<double> solve_tridiagonal(const AssembledSystem& sys, const std::vector<double>& diag,
                                      const std::vector<double>& rhs, double dt) {
    const std::size_t n = diag.size();
    std::vector<double> lower(n, 0.0), upper(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < sys.cnt[i]; ++k) {
            const std::size_t j = sys.nbr[i * sys.cap + k];
            const double off = -dt * sys.w[i * sys.cap + k];
            if (j + 1 == i)
                lower[i] += off;
            else if (j == i + 1)
                upper[i] += off;
            else
                throw SolverError("backward_step: unexpected non-tridiagonal entry in d=1", {});
        }
    }
    std::vector<double> c(n, 0.0), x(n, 0.0);
    double piv = diag[0];
    if (std::fabs(piv) < 1e-300) throw SolverError("backward_step: zero pivot in direct solve", {});
    c[0] = upper[0] / piv;
    x[0] = rhs[0] / piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = diag[i] - lower[i] * c[i - 1];
        if (std::fabs(piv) < 1e-300)
            throw SolverError("backward_step: zero pivot in direct solve", {});
        c[i] = upper[i] / piv;
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / piv;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
    return x;
}

std::vector<double> solve_jacobi(const StepSpec& spec, const AssembledSystem& sys,
                                 const std::vector<double>& diag, const std::vector<double>& rhs,
                                 const std::vector<double>& guess) {
    const std::size_t n = diag.size();
    const double dt = spec.dt;
    std::vector<double> x = guess, next(n, 0.0);
    std::vector<double> history;
    for (int it = 0; it < spec.max_linear_iters; ++it) {
        double delta = 0.0, xmax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = rhs[i];
            for (int k = 0; k < sys.cnt[i]; ++k)
                acc += dt * sys.w[i * sys.cap + k] * x[sys.nbr[i * sys.cap + k]];
            next[i] = acc / diag[i];
            delta = std::max(delta, std::fabs(next[i] - x[i]));
            xmax = std::max(xmax, std::fabs(next[i]));
        }
        x.swap(next);
        history.push_back(delta);
        if (delta <= spec.tol_linear * std::max(1.0, xmax)) return x;
    }
    throw SolverError("backward_step: iterative linear solve did not reach tolerance " +
                          std::to_string(spec.tol_linear) + " within " +
                          std::to_string(spec.max_linear_iters) + " sweeps",
                      history);
}

}  // namespace

std::vector<double> backward_step(const StepSpec& spec, const LayerCoefficients& coef,
                                  const std::vector<double>& known_layer) {
    if (spec.grid == nullptr) throw std::invalid_argument("backward_step: grid must be set");
    const Grid& g = *spec.grid;
    const std::size_t nn = g.n_nodes();
    if (known_layer.size() != nn)
        throw std::invalid_argument("backward_step: layer size does not match grid");
    if (!(spec.dt > 0.0)) throw std::invalid_argument("backward_step: dt must be positive");
    const double dt = spec.dt;

    AssembledSystem sys;
    assemble(spec, coef, sys);

    if (!spec.implicit) {
        std::vector<double> out(nn, 0.0);
        for (std::size_t i = 0; i < nn; ++i) {
            const double center =
                spec.carry - dt * (coef.kill[i] + sys.wsum[i] + sys.ghost_w[i]);
            if (center < -1e-12 * std::max(1.0, std::fabs(spec.carry))) {
                std::ostringstream os;
                os << "backward_step: explicit stability restriction violated at node " << i
                   << ": dt * (sum of stencil weights + kill) = "
                   << dt * (coef.kill[i] + sys.wsum[i] + sys.ghost_w[i]) << " exceeds carry "
                   << spec.carry << " (need dt <= h^2 / (d max|a| + h max|drift|))";
                throw SolverError(os.str(), {});
            }
            double acc = center * known_layer[i] + dt * (sys.ghost_rhs[i] + coef.source[i]);
            for (int k = 0; k < sys.cnt[i]; ++k)
                acc += dt * sys.w[i * sys.cap + k] * known_layer[sys.nbr[i * sys.cap + k]];
            out[i] = acc;
        }
        return out;
    }

    std::vector<double> diag(nn, 0.0), rhs(nn, 0.0);
    for (std::size_t i = 0; i < nn; ++i) {
        diag[i] = 1.0 + dt * (coef.kill[i] + sys.wsum[i] + sys.ghost_w[i]);
        if (diag[i] <= 1e-12)
            throw SolverError(
                "backward_step: implicit diagonal vanished at node " + std::to_string(i) +
                    " (zero-order removal rate too negative for this dt)",
                {});
        rhs[i] = spec.carry * known_layer[i] + dt * (sys.ghost_rhs[i] + coef.source[i]);
    }
    if (g.dim() == 1) return solve_tridiagonal(sys, diag, rhs, dt);
    return solve_jacobi(spec, sys, diag, rhs, known_layer);
}

}  // namespace hjb
