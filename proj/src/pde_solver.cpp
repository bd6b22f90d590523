#include "hjblab/pde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hjblab/estimates.hpp"
#include "hjblab/stepper.hpp"

namespace hjb {

void check_scheme_config(const SchemeConfig& cfg) {
    if (cfg.m_alpha < 1)
        throw std::invalid_argument("check_scheme_config: m_alpha must be >= 1");
    if (!(cfg.tol_policy > 0.0) || !std::isfinite(cfg.tol_policy))
        throw std::invalid_argument("check_scheme_config: tol_policy must be positive");
    if (cfg.max_sweeps < 1)
        throw std::invalid_argument("check_scheme_config: max_sweeps must be >= 1");
    if (!(cfg.tol_linear > 0.0) || !std::isfinite(cfg.tol_linear))
        throw std::invalid_argument("check_scheme_config: tol_linear must be positive");
    if (cfg.max_doublings < 0)
        throw std::invalid_argument("check_scheme_config: max_doublings must be >= 0");
    if (!(cfg.core_fraction > 0.0) || cfg.core_fraction > 1.0)
        throw std::invalid_argument("check_scheme_config: core_fraction must be in (0, 1]");
}

void interpolate_control(const ControlField& f, double t, const std::vector<double>& x,
                         double* out) {
    const Grid& g = f.grid;
    const int d = g.dim();
    if (static_cast<int>(x.size()) != d)
        throw std::invalid_argument("interpolate_control: query dimension mismatch");

    // Clamped locate: queries outside the box saturate at the boundary.
    auto locate = [](double q, double lo, double step, int n, int* cell, double* w) {
        double s = (q - lo) / step;
        if (s < 0.0) s = 0.0;
        const double s_max = static_cast<double>(n - 1);
        if (s > s_max) s = s_max;
        int c = static_cast<int>(s);
        if (c > n - 2) c = n - 2;
        *cell = c;
        *w = s - static_cast<double>(c);
    };

    int t_cell;
    double t_w;
    locate(t, 0.0, g.dt(), g.n_layers(), &t_cell, &t_w);

    int cell_buf[8];
    double w_buf[8];
    std::vector<int> cell_heap;
    std::vector<double> w_heap;
    int* cell = cell_buf;
    double* w = w_buf;
    if (d > 8) {
        cell_heap.resize(d);
        w_heap.resize(d);
        cell = cell_heap.data();
        w = w_heap.data();
    }
    for (int axis = 0; axis < d; ++axis)
        locate(x[axis], g.center[axis] - g.R_x, g.h(), g.n_x, &cell[axis], &w[axis]);

    for (int i = 0; i < d; ++i) out[i] = 0.0;
    const std::size_t corners = std::size_t{1} << d;
    for (int tl = 0; tl < 2; ++tl) {
        const double tw = tl ? t_w : 1.0 - t_w;
        if (tw == 0.0) continue;
        for (std::size_t corner = 0; corner < corners; ++corner) {
            double weight = tw;
            std::size_t flat = 0;
            for (int axis = 0; axis < d; ++axis) {
                const int bit = static_cast<int>((corner >> (d - 1 - axis)) & 1u);
                weight *= bit ? w[axis] : (1.0 - w[axis]);
                flat = flat * static_cast<std::size_t>(g.n_x) +
                       static_cast<std::size_t>(cell[axis] + bit);
            }
            if (weight == 0.0) continue;
            const double* a = f.at(t_cell + tl, flat);
            for (int i = 0; i < d; ++i) out[i] += weight * a[i];
        }
    }
}

namespace {

double sup_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

std::string point_string(double t, const double* x, int d) {
    std::ostringstream os;
    os << "t=" << t << ", x=(";
    for (int i = 0; i < d; ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

/// Uniform unit directions for the polar control mesh.
std::vector<double> mesh_directions(int d, int m_alpha) {
    std::vector<double> dirs;
    if (d == 1) {
        dirs = {1.0, -1.0};
    } else if (d == 2) {
        const int n_dir = 4 * m_alpha;
        dirs.reserve(2 * static_cast<std::size_t>(n_dir));
        for (int j = 0; j < n_dir; ++j) {
            const double theta = 2.0 * M_PI * j / n_dir;
            dirs.push_back(std::cos(theta));
            dirs.push_back(std::sin(theta));
        }
    } else if (d == 3) {
        // Fibonacci sphere.
        const int n_dir = 4 * m_alpha * m_alpha;
        const double golden = M_PI * (3.0 - std::sqrt(5.0));
        dirs.reserve(3 * static_cast<std::size_t>(n_dir));
        for (int j = 0; j < n_dir; ++j) {
            const double z = 1.0 - 2.0 * (j + 0.5) / n_dir;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double theta = golden * j;
            dirs.push_back(r * std::cos(theta));
            dirs.push_back(r * std::sin(theta));
            dirs.push_back(z);
        }
    } else {
        throw SolverError(
            "hamiltonian_min: the polar control mesh supports d <= 3; "
            "only the quadratic closed form is available in higher dimension",
            {});
    }
    return dirs;
}

}  // namespace

HamiltonianMin hamiltonian_min(const HJBProblem& p, double t, const std::vector<double>& x,
                               const std::vector<double>& grad, double radius, int m_alpha) {
    const int d = p.dimension;
    if (static_cast<int>(x.size()) != d || static_cast<int>(grad.size()) != d)
        throw std::invalid_argument("hamiltonian_min: dimension mismatch");
    if (!(radius > 0.0)) throw std::invalid_argument("hamiltonian_min: radius must be positive");
    if (m_alpha < 1) throw std::invalid_argument("hamiltonian_min: m_alpha must be >= 1");
    const double r_eff =
        p.control_set.bounded ? std::min(radius, p.control_set.radius) : radius;

    if (p.quadratic) {
        // b1 . grad = a . (sigma' grad) and f1 = |a|^2/2, so the minimum over
        // |a| <= r_eff is attained along -sigma' grad.
        std::vector<double> s(static_cast<std::size_t>(d) * d);
        p.sigma(t, x.data(), s.data());
        std::vector<double> q(d);
        double q_norm_sq = 0.0;
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += s[j * d + i] * grad[j];
            if (!std::isfinite(acc))
                throw SolverError("hamiltonian_min: sigma evaluated nonfinite at " +
                                      point_string(t, x.data(), d),
                                  {});
            q[i] = acc;
            q_norm_sq += acc * acc;
        }
        const double q_norm = std::sqrt(q_norm_sq);
        HamiltonianMin out;
        out.argmin.resize(d);
        if (q_norm <= r_eff) {
            for (int i = 0; i < d; ++i) out.argmin[i] = -q[i];
            out.value = -0.5 * q_norm_sq;
        } else {
            const double scale = r_eff / q_norm;
            for (int i = 0; i < d; ++i) out.argmin[i] = -scale * q[i];
            out.value = -r_eff * q_norm + 0.5 * r_eff * r_eff;
        }
        return out;
    }

    const std::vector<double> dirs = mesh_directions(d, m_alpha);
    const std::size_t n_dir = dirs.size() / static_cast<std::size_t>(d);
    std::vector<double> alpha(d, 0.0), b1(d), best_alpha(d, 0.0);
    auto evaluate = [&](const std::vector<double>& a) {
        p.b1(t, x.data(), a.data(), b1.data());
        double v = p.f1(t, x.data(), a.data());
        for (int i = 0; i < d; ++i) v += b1[i] * grad[i];
        if (!std::isfinite(v))
            throw SolverError("hamiltonian_min: coefficient evaluated nonfinite at " +
                                  point_string(t, x.data(), d),
                              {});
        return v;
    };
    double best = evaluate(alpha);  // a = 0 is always a candidate
    double best_norm = 0.0;
    for (std::size_t jd = 0; jd < n_dir; ++jd) {
        for (int ir = 1; ir <= m_alpha; ++ir) {
            const double r = r_eff * ir / m_alpha;
            for (int i = 0; i < d; ++i) alpha[i] = r * dirs[jd * d + i];
            const double v = evaluate(alpha);
            bool take = v < best;
            if (!take && v == best) {
                if (r < best_norm)
                    take = true;
                else if (r == best_norm)
                    take = std::lexicographical_compare(alpha.begin(), alpha.end(),
                                                        best_alpha.begin(), best_alpha.end());
            }
            if (take) {
                best = v;
                best_norm = r;
                best_alpha = alpha;
            }
        }
    }
    return HamiltonianMin{best, best_alpha};
}

double control_mesh_resolution(const HJBProblem& p, double radius, int m_alpha) {
    if (p.quadratic) return 0.0;
    const int d = p.dimension;
    const double r_eff =
        p.control_set.bounded ? std::min(radius, p.control_set.radius) : radius;
    const double radial = r_eff / m_alpha;
    if (d == 1) return radial;
    if (d == 2) return radial + r_eff * M_PI / (4 * m_alpha);
    return radial + 2.0 * r_eff * std::sqrt(M_PI / (4.0 * m_alpha * m_alpha));
}

namespace {

/// Per-node Hamiltonian minimizers for one layer (controls node-major).
std::vector<double> minimize_layer(const HJBProblem& p, const Grid& grid,
                                   const double* layer_values, double t, double R, int m_alpha) {
    const int d = grid.dim();
    const std::size_t nn = grid.n_nodes();
    std::vector<double> controls(nn * static_cast<std::size_t>(d));
    std::vector<double> x(d);
    for (std::size_t node = 0; node < nn; ++node) {
        grid.node_coords(node, x.data());
        const std::vector<double> grad = gradient_of_layer(grid, layer_values, node);
        const HamiltonianMin hm = hamiltonian_min(p, t, x, grad, R, m_alpha);
        for (int i = 0; i < d; ++i) controls[node * d + i] = hm.argmin[i];
    }
    return controls;
}

/// Frozen-policy coefficients at time t: a = sigma sigma', mu = b1 + b2,
/// source = f1 + f2, no zero-order term (the discount rides on the carry).
LayerCoefficients assemble_hjb(const HJBProblem& p, const Grid& grid, double t,
                               const std::vector<double>& controls) {
    const int d = grid.dim();
    const std::size_t nn = grid.n_nodes();
    LayerCoefficients coef(grid);
    std::vector<double> x(d), b2(d), b1(d);
    for (std::size_t node = 0; node < nn; ++node) {
        grid.node_coords(node, x.data());
        const double* alpha = controls.data() + node * d;
        sigma_sigma_t(p, t, x.data(), coef.a.data() + node * static_cast<std::size_t>(d) * d);
        p.b2(t, x.data(), b2.data());
        p.b1(t, x.data(), alpha, b1.data());
        double* mu = coef.mu.data() + node * static_cast<std::size_t>(d);
        for (int i = 0; i < d; ++i) mu[i] = b1[i] + b2[i];
        coef.source[node] = p.f1(t, x.data(), alpha) + p.f2(t, x.data());
        bool finite = std::isfinite(coef.source[node]);
        for (int i = 0; i < d && finite; ++i) finite = std::isfinite(mu[i]);
        for (int i = 0; i < d * d && finite; ++i)
            finite = std::isfinite(coef.a[node * static_cast<std::size_t>(d) * d + i]);
        if (!finite)
            throw SolverError("step_backward: coefficient evaluated nonfinite at " +
                                  point_string(t, x.data(), d),
                              {});
    }
    return coef;
}

}  // namespace

StepResult step_backward(const HJBProblem& p, const Grid& grid,
                         const std::vector<double>& u_next, double t, double R,
                         const SchemeConfig& cfg) {
    check_scheme_config(cfg);
    if (grid.dim() != p.dimension)
        throw std::invalid_argument("step_backward: grid/problem dimension mismatch");
    if (u_next.size() != grid.n_nodes())
        throw std::invalid_argument("step_backward: layer size does not match grid");
    if (!(R > 0.0) || !std::isfinite(R))
        throw std::invalid_argument("step_backward: control radius must be positive");
    for (double v : u_next)
        if (!std::isfinite(v))
            throw std::invalid_argument("step_backward: u_next must be finite everywhere");

    const double dt = grid.dt();
    const double carry = 1.0 + p.discount * dt;

    StepSpec spec;
    spec.grid = &grid;
    spec.dt = dt;
    spec.carry = carry;
    spec.tol_linear = cfg.tol_linear;
    spec.ghosts = GhostPolicy::linear;

    if (cfg.mode == TimeStepping::explicit_monotone) {
        const double t_next = t + dt;
        spec.implicit = false;
        const std::vector<double> frozen =
            minimize_layer(p, grid, u_next.data(), t_next, R, cfg.m_alpha);
        const LayerCoefficients coef = assemble_hjb(p, grid, t_next, frozen);
        StepResult out;
        out.values = backward_step(spec, coef, u_next);
        out.controls = minimize_layer(p, grid, out.values.data(), t, R, cfg.m_alpha);
        return out;
    }

    spec.implicit = true;
    std::vector<double> u_guess = u_next;
    std::vector<double> controls = minimize_layer(p, grid, u_next.data(), t, R, cfg.m_alpha);
    std::vector<double> history;
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        const LayerCoefficients coef = assemble_hjb(p, grid, t, controls);
        std::vector<double> u_new = backward_step(spec, coef, u_next);
        double delta = 0.0;
        for (std::size_t i = 0; i < u_new.size(); ++i)
            delta = std::max(delta, std::fabs(u_new[i] - u_guess[i]));
        history.push_back(delta);
        controls = minimize_layer(p, grid, u_new.data(), t, R, cfg.m_alpha);
        u_guess.swap(u_new);
        if (delta <= cfg.tol_policy * std::max(1.0, sup_abs(u_guess)))
            return StepResult{std::move(u_guess), std::move(controls)};
    }
    throw SolverError("step_backward: policy iteration did not converge within " +
                          std::to_string(cfg.max_sweeps) + " sweeps at t = " + std::to_string(t),
                      history);
}

SolveResult solve(const HJBProblem& p, const Grid& grid, double R, const SchemeConfig& cfg) {
    check_scheme_config(cfg);
    if (grid.dim() != p.dimension)
        throw std::invalid_argument("solve: grid/problem dimension mismatch");
    if (std::fabs(grid.T - p.horizon) > 1e-12 * std::max(1.0, p.horizon))
        throw std::invalid_argument("solve: grid horizon does not match the problem horizon");
    if (!(R > 0.0) || !std::isfinite(R))
        throw std::invalid_argument("solve: control radius must be positive");

    ValueFunction u(grid);
    const std::size_t nn = grid.n_nodes();
    std::vector<double> x(grid.dim());
    for (std::size_t node = 0; node < nn; ++node) {
        grid.node_coords(node, x.data());
        const double gv = p.g(x.data());
        if (!std::isfinite(gv))
            throw SolverError("solve: terminal datum evaluated nonfinite at " +
                                  point_string(grid.T, x.data(), grid.dim()),
                              {});
        u.at(grid.n_t, node) = gv;
    }

    std::vector<double> layer(nn);
    for (int l = grid.n_t - 1; l >= 0; --l) {
        const double* next = u.layer(l + 1);
        layer.assign(next, next + nn);
        StepResult sr = step_backward(p, grid, layer, grid.time_at(l), R, cfg);
        std::copy(sr.values.begin(), sr.values.end(), u.layer(l));
    }

    ControlField field = synthesize_feedback(p, u, R, cfg.m_alpha);
    return SolveResult{std::move(u), std::move(field)};
}

EscalationResult solve_with_truncation_escalation(const HJBProblem& p, const Grid& grid,
                                                  double R_0, double tol,
                                                  const SchemeConfig& cfg) {
    check_scheme_config(cfg);
    if (!(R_0 > 0.0) || !std::isfinite(R_0))
        throw std::invalid_argument("solve_with_truncation_escalation: R_0 must be positive");
    if (!(tol > 0.0) || !std::isfinite(tol))
        throw std::invalid_argument("solve_with_truncation_escalation: tol must be positive");

    TruncationTrace trace;
    std::vector<double> deltas;
    SolveResult prev, cur;
    double last_radius = R_0;
    for (int stage = 0; stage <= cfg.max_doublings; ++stage) {
        const double R = R_0 * std::ldexp(1.0, stage);
        last_radius = R;
        cur = solve(p, grid, R, cfg);
        const double K = sup_gradient(cur.value, cfg.core_fraction);
        double delta = std::numeric_limits<double>::infinity();
        if (stage > 0) {
            delta = 0.0;
            for (std::size_t i = 0; i < cur.value.values.size(); ++i)
                delta = std::max(delta,
                                 std::fabs(cur.value.values[i] - prev.value.values[i]));
            deltas.push_back(delta);
        }
        trace.stages.push_back(TruncationStage{R, K, delta});
        if (stage > 0) {
            const double scale = std::max(1.0, sup_abs(cur.value.values));
            const double threshold = control_bound_radius(p.constants, K);
            if (delta <= tol * scale && R >= threshold * (1.0 - 1e-12)) {
                trace.final_radius = R;
                trace.converged = true;
                return EscalationResult{std::move(cur.value), std::move(cur.control),
                                        std::move(trace)};
            }
        }
        prev = std::move(cur);
    }
    trace.final_radius = last_radius;
    trace.converged = false;
    throw EscalationError(
        "solve_with_truncation_escalation: no stabilization within " +
            std::to_string(cfg.max_doublings) + " doublings from R_0 = " + std::to_string(R_0),
        std::move(trace), std::move(deltas));
}

ControlField synthesize_feedback(const HJBProblem& p, const ValueFunction& u, double R,
                                 int m_alpha) {
    const Grid& grid = u.grid;
    if (grid.dim() != p.dimension)
        throw std::invalid_argument("synthesize_feedback: grid/problem dimension mismatch");
    for (double v : u.values)
        if (!std::isfinite(v))
            throw std::invalid_argument("synthesize_feedback: value function must be finite");
    ControlField field(grid);
    for (int l = 0; l < grid.n_layers(); ++l) {
        const std::vector<double> controls =
            minimize_layer(p, grid, u.layer(l), grid.time_at(l), R, m_alpha);
        std::copy(controls.begin(), controls.end(),
                  field.controls.begin() +
                      static_cast<std::size_t>(l) * grid.n_nodes() * grid.dim());
    }
    return field;
}

void write_control_csv(const ControlField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_control_csv: cannot open " + path + " for writing");
    const Grid& g = f.grid;
    const int d = g.dim();
    out << "t";
    for (int i = 0; i < d; ++i) out << ",x_" << (i + 1);
    for (int i = 0; i < d; ++i) out << ",alpha_" << (i + 1);
    out << "\n";
    std::vector<double> coords(d);
    for (int l = 0; l < g.n_layers(); ++l) {
        const double t = g.time_at(l);
        for (std::size_t node = 0; node < g.n_nodes(); ++node) {
            g.node_coords(node, coords.data());
            out << format_float(t);
            for (int i = 0; i < d; ++i) out << ',' << format_float(coords[i]);
            const double* a = f.at(l, node);
            for (int i = 0; i < d; ++i) out << ',' << format_float(a[i]);
            out << '\n';
        }
    }
    if (!out) throw DataError("write_control_csv: write failure on " + path);
}

void write_trace_csv(const TruncationTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_trace_csv: cannot open " + path + " for writing");
    out << "stage,radius,sup_grad,delta_sup\n";
    for (std::size_t i = 0; i < trace.stages.size(); ++i) {
        const TruncationStage& s = trace.stages[i];
        out << i << ',' << format_float(s.radius) << ',' << format_float(s.sup_grad_core) << ','
            << format_float(s.delta_sup) << '\n';
    }
    if (!out) throw DataError("write_trace_csv: write failure on " + path);
}

}  // namespace hjb
