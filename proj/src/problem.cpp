#include "hjblab/problem.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "hjblab/matrix_lemmas.hpp"
#include "hjblab/rng.hpp"

namespace hjb {

namespace {

double norm2(const double* v, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

/// Project x onto the centered closed ball of radius r (identity for r = inf).
void clamp_to_ball(const double* x, int d, double r, double* out) {
    const double n = norm2(x, d);
    const double scale = (std::isfinite(r) && n > r) ? r / n : 1.0;
    for (int i = 0; i < d; ++i) out[i] = scale * x[i];
}

/// Operator norm of a general d x d matrix via the top eigenvalue of M M'.
double op_norm(const std::vector<double>& m, int d) {
    SymmetricMatrix mmt(d);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += m[i * d + k] * m[j * d + k];
            mmt(i, j) = s;
        }
    }
    const double top = largest_eigenvalue(mmt);
    return top > 0.0 ? std::sqrt(top) : 0.0;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string("quadratic_problem: ") + what +
                                    " must be finite");
    }
}

}  // namespace

void check_constants(const RegularityConstants& k, double horizon) {
    const struct {
        const char* name;
        double value;
    } scalars[] = {
        {"L_b", k.L_b},           {"L_f1", k.L_f1},
        {"c_f1", k.c_f1},         {"c_f1_prime", k.c_f1_prime},
        {"C_f1", k.C_f1},         {"C_f1_prime", k.C_f1_prime},
        {"L_f2_integral", k.L_f2_integral}, {"L_sigma", k.L_sigma},
        {"L_g", k.L_g},           {"eta_sigma", k.eta_sigma},
        {"L_A", k.L_A},
    };
    for (const auto& s : scalars) {
        if (!std::isfinite(s.value) || s.value < 0.0) {
            throw std::invalid_argument(std::string("check_constants: ") + s.name +
                                        " must be finite and nonnegative");
        }
    }
    if (!(k.eta_sigma > 0.0))
        throw std::invalid_argument("check_constants: eta_sigma must be strictly positive");
    if (k.c_f1 > k.C_f1)
        throw std::invalid_argument("check_constants: coercivity sandwich needs c_f1 <= C_f1");
    if (!k.L_f2)
        throw std::invalid_argument("check_constants: L_f2 callable must be set");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("check_constants: horizon must be positive and finite");

    // Composite Simpson quadrature of L_f2 over [0, horizon].
    const int n = 200;  // even
    const double dh = horizon / n;
    double acc = k.L_f2(0.0) + k.L_f2(horizon);
    for (int i = 1; i < n; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * k.L_f2(i * dh);
    const double quad = acc * dh / 3.0;
    if (!std::isfinite(quad))
        throw std::invalid_argument("check_constants: L_f2 evaluated nonfinite on [0, T]");
    const double tol = 1e-6 * std::max(1.0, std::fabs(quad));
    if (std::fabs(quad - k.L_f2_integral) > tol) {
        std::ostringstream os;
        os << "check_constants: L_f2_integral = " << k.L_f2_integral
           << " disagrees with quadrature " << quad << " beyond tolerance " << tol;
        throw std::invalid_argument(os.str());
    }
}

void sigma_sigma_t(const HJBProblem& p, double t, const double* x, double* out) {
    const int d = p.dimension;
    std::vector<double> s(static_cast<std::size_t>(d) * d);
    p.sigma(t, x, s.data());
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) acc += s[i * d + k] * s[j * d + k];
            out[i * d + j] = acc;
        }
    }
}

double scalar_spec_lipschitz(const ScalarSpec& s) { return std::fabs(s.slope); }

double scalar_spec_eval(const ScalarSpec& s, const double* x, int d) {
    switch (s.mode) {
        case ScalarMode::affine: {
            double z = x[0];
            if (std::isfinite(s.clamp_radius)) {
                z = std::min(std::max(z, -s.clamp_radius), s.clamp_radius);
            }
            return s.slope * z + s.offset;
        }
        case ScalarMode::norm: {
            const double n = norm2(x, d);
            return s.slope * std::min(n, s.clamp_radius) + s.offset;
        }
        case ScalarMode::abs_first: {
            const double n = std::fabs(x[0]);
            return s.slope * std::min(n, s.clamp_radius) + s.offset;
        }
    }
    throw std::logic_error("scalar_spec_eval: unknown mode");
}

HJBProblem quadratic_problem(int d, double T, double c, const AffineMapSpec& b2_spec,
                             const SigmaSpec& sigma_spec, const ScalarSpec& f2_spec,
                             const ScalarSpec& g_spec) {
    if (d < 1) throw std::invalid_argument("quadratic_problem: dimension must be >= 1");
    require_finite(T, "horizon");
    if (!(T > 0.0)) throw std::invalid_argument("quadratic_problem: horizon must be positive");
    require_finite(c, "discount");
    if (b2_spec.matrix.size() != static_cast<std::size_t>(d) * d)
        throw std::invalid_argument("quadratic_problem: b2 matrix must be d x d");
    if (b2_spec.offset.size() != static_cast<std::size_t>(d))
        throw std::invalid_argument("quadratic_problem: b2 offset must have size d");
    for (double v : b2_spec.matrix) require_finite(v, "b2 matrix entry");
    for (double v : b2_spec.offset) require_finite(v, "b2 offset entry");
    if (!(b2_spec.clamp_radius > 0.0))
        throw std::invalid_argument("quadratic_problem: b2 clamp radius must be positive");
    require_finite(sigma_spec.scale, "sigma scale");
    if (!(sigma_spec.scale > 0.0))
        throw std::invalid_argument(
            "quadratic_problem: sigma scale must be positive (ellipticity floor)");
    if (sigma_spec.mode == SigmaMode::sqrt_growth &&
        !(std::isfinite(sigma_spec.clamp_radius) && sigma_spec.clamp_radius > 0.0))
        throw std::invalid_argument(
            "quadratic_problem: sqrt_growth sigma needs a finite positive clamp radius");
    for (const ScalarSpec* s : {&f2_spec, &g_spec}) {
        require_finite(s->slope, "scalar spec slope");
        require_finite(s->offset, "scalar spec offset");
        if (!(s->clamp_radius > 0.0))
            throw std::invalid_argument("quadratic_problem: scalar clamp radius must be positive");
    }

    HJBProblem p;
    p.dimension = d;
    p.horizon = T;
    p.discount = c;
    p.family_tag = "quadratic";
    p.quadratic = true;
    p.control_set = ControlSet{};  // whole space

    const AffineMapSpec b2s = b2_spec;
    p.b2 = [b2s, d](double, const double* x, double* out) {
        std::vector<double> z(d);
        clamp_to_ball(x, d, b2s.clamp_radius, z.data());
        for (int i = 0; i < d; ++i) {
            double acc = b2s.offset[i];
            for (int j = 0; j < d; ++j) acc += b2s.matrix[i * d + j] * z[j];
            out[i] = acc;
        }
    };

    const SigmaSpec ss = sigma_spec;
    p.sigma = [ss, d](double, const double* x, double* out) {
        double factor = ss.scale;
        if (ss.mode == SigmaMode::sqrt_growth) {
            factor *= std::sqrt(1.0 + std::min(norm2(x, d), ss.clamp_radius));
        }
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) out[i * d + j] = (i == j) ? factor : 0.0;
    };

    const MatrixMap sigma_fn = p.sigma;
    p.b1 = [sigma_fn, d](double t, const double* x, const double* a, double* out) {
        double stack_m[64];
        std::vector<double> heap_m;
        double* m = stack_m;
        if (d > 8) {
            heap_m.resize(static_cast<std::size_t>(d) * d);
            m = heap_m.data();
        }
        sigma_fn(t, x, m);
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += m[j * d + i] * a[j];
            out[i] = acc;
        }
    };

    p.f1 = [d](double, const double*, const double* a) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += a[i] * a[i];
        return 0.5 * s;
    };

    const ScalarSpec f2s = f2_spec;
    p.f2 = [f2s, d](double, const double* x) { return scalar_spec_eval(f2s, x, d); };
    const ScalarSpec gs = g_spec;
    p.g = [gs, d](const double* x) { return scalar_spec_eval(gs, x, d); };

    const double m_norm = op_norm(b2_spec.matrix, d);
    const double off_norm = norm2(b2_spec.offset.data(), d);
    const bool growing = sigma_spec.mode == SigmaMode::sqrt_growth;
    const double sigma_sup =
        growing ? sigma_spec.scale * std::sqrt(1.0 + sigma_spec.clamp_radius) : sigma_spec.scale;
    const double sigma_lip = growing ? 0.5 * sigma_spec.scale : 0.0;

    RegularityConstants k;
    k.L_b = std::max({m_norm, off_norm, sigma_sup, sigma_lip});
    k.L_f1 = 0.0;
    k.c_f1 = 0.5;
    k.C_f1 = 0.5;
    k.c_f1_prime = 0.01;
    k.C_f1_prime = 0.01;
    const double lf2 = std::max(scalar_spec_lipschitz(f2_spec), std::fabs(f2_spec.offset));
    k.L_f2 = [lf2](double) { return lf2; };
    k.L_f2_integral = lf2 * T;
    k.L_sigma = growing ? sigma_spec.scale : 0.0;
    k.L_g = scalar_spec_lipschitz(g_spec);
    k.eta_sigma = sigma_spec.scale * sigma_spec.scale;
    k.L_A = sigma_sup;
    p.constants = k;
    check_constants(p.constants, T);
    return p;
}

namespace {

/// Sampling-audit accumulator for one inequality.
struct SupCheck {
    const char* name;
    double declared;
    double estimated = 0.0;
    void observe(double quotient) { estimated = std::max(estimated, quotient); }
};

std::string point_string(double t, const double* x, int d) {
    std::ostringstream os;
    os << "t=" << t << ", x=(";
    for (int i = 0; i < d; ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

}  // namespace

AssumptionReport validate_assumptions(const HJBProblem& p, int n_samples, double box_radius,
                                      std::uint64_t seed, double slack) {
    if (n_samples < 2)
        throw std::invalid_argument("validate_assumptions: n_samples must be >= 2");
    if (!(box_radius > 0.0) || !std::isfinite(box_radius))
        throw std::invalid_argument("validate_assumptions: box_radius must be positive");
    if (!(slack >= 0.0) || !std::isfinite(slack))
        throw std::invalid_argument("validate_assumptions: slack must be nonnegative");
    check_constants(p.constants, p.horizon);
    const int d = p.dimension;
    const RegularityConstants& k = p.constants;

    AssumptionReport report;
    report.n_samples = n_samples;
    report.seed = seed;
    report.slack = slack;

    SupCheck b1_lip{"b1_lipschitz_in_x", k.L_b};
    SupCheck b1_growth{"b1_growth", k.L_b};
    SupCheck b2_lip{"b2_lipschitz", k.L_b};
    SupCheck b2_growth{"b2_growth", k.L_b};
    SupCheck f1_lip{"f1_lipschitz_in_x", k.L_f1};
    SupCheck coer_lo{"f1_coercivity_lower", k.c_f1_prime};
    SupCheck coer_hi{"f1_coercivity_upper", k.C_f1_prime};
    SupCheck f2_lip{"f2_lipschitz", 0.0};
    SupCheck f2_growth{"f2_growth", 0.0};
    SupCheck sig_holder{"sigma_half_holder", k.L_sigma};
    SupCheck g_lip{"g_lipschitz", k.L_g};
    SupCheck feedback{"feedback_norm_slope", k.L_A};
    SupCheck quad_structure{"quadratic_structure", 0.0};
    double ellipticity_min = std::numeric_limits<double>::infinity();
    double lf2_declared = std::numeric_limits<double>::infinity();

    const double alpha_box =
        p.control_set.bounded ? std::min(p.control_set.radius, 10.0) : 10.0;

    std::vector<double> x(d), y(d), alpha(d), bx(d), by(d), buf(d);
    std::vector<double> sx(static_cast<std::size_t>(d) * d), sy(static_cast<std::size_t>(d) * d);

    auto fail_hard = [&](const char* coeff, double t, const double* at) {
        report.hard_failure = std::string(coeff) + " evaluated to a nonfinite value at " +
                              point_string(t, at, d);
    };

    for (int i = 0; i < n_samples && report.hard_failure.empty(); ++i) {
        SplitMix64 rng = SplitMix64::for_path(seed, static_cast<std::uint64_t>(i));
        const double t = rng.next_uniform(0.0, p.horizon);
        for (int j = 0; j < d; ++j) x[j] = rng.next_uniform(-box_radius, box_radius);
        for (int j = 0; j < d; ++j) y[j] = rng.next_uniform(-box_radius, box_radius);
        for (int j = 0; j < d; ++j) alpha[j] = rng.next_normal();
        const double dir_norm = norm2(alpha.data(), d);
        const double a_len = rng.next_uniform(0.0, alpha_box);
        for (int j = 0; j < d; ++j)
            alpha[j] = dir_norm > 1e-12 ? alpha[j] / dir_norm * a_len : (j == 0 ? a_len : 0.0);
        const double a_norm = norm2(alpha.data(), d);
        const double dxy = [&] {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += (x[j] - y[j]) * (x[j] - y[j]);
            return std::sqrt(s);
        }();
        const double x_norm = norm2(x.data(), d);

        auto finite_vec = [&](const double* v) {
            for (int j = 0; j < d; ++j)
                if (!std::isfinite(v[j])) return false;
            return true;
        };
        auto diff_norm = [&](const double* u, const double* v) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += (u[j] - v[j]) * (u[j] - v[j]);
            return std::sqrt(s);
        };

        // Drift, controlled part.
        p.b1(t, x.data(), alpha.data(), bx.data());
        if (!finite_vec(bx.data())) { fail_hard("b1", t, x.data()); break; }
        p.b1(t, y.data(), alpha.data(), by.data());
        if (!finite_vec(by.data())) { fail_hard("b1", t, y.data()); break; }
        b1_growth.observe(norm2(bx.data(), d) / (1.0 + a_norm));
        if (dxy > 1e-9) b1_lip.observe(diff_norm(bx.data(), by.data()) / ((1.0 + a_norm) * dxy));

        // Drift, uncontrolled part.
        p.b2(t, x.data(), bx.data());
        if (!finite_vec(bx.data())) { fail_hard("b2", t, x.data()); break; }
        p.b2(t, y.data(), by.data());
        if (!finite_vec(by.data())) { fail_hard("b2", t, y.data()); break; }
        b2_growth.observe(norm2(bx.data(), d) / (1.0 + x_norm));
        if (dxy > 1e-9) b2_lip.observe(diff_norm(bx.data(), by.data()) / dxy);

        // Controlled running cost.
        const double f1x = p.f1(t, x.data(), alpha.data());
        if (!std::isfinite(f1x)) { fail_hard("f1", t, x.data()); break; }
        const double f1y = p.f1(t, y.data(), alpha.data());
        if (!std::isfinite(f1y)) { fail_hard("f1", t, y.data()); break; }
        if (dxy > 1e-9) f1_lip.observe(std::fabs(f1x - f1y) / dxy);
        coer_lo.observe(k.c_f1 * a_norm * a_norm - f1x);
        coer_hi.observe(f1x - k.C_f1 * a_norm * a_norm);

        // Source term.
        const double f2x = p.f2(t, x.data());
        if (!std::isfinite(f2x)) { fail_hard("f2", t, x.data()); break; }
        const double f2y = p.f2(t, y.data());
        if (!std::isfinite(f2y)) { fail_hard("f2", t, y.data()); break; }
        if (dxy > 1e-9) f2_lip.observe(std::fabs(f2x - f2y) / dxy);
        f2_growth.observe(std::fabs(f2x) / (1.0 + x_norm));
        const double lf2_t = k.L_f2(t);
        if (!std::isfinite(lf2_t)) { fail_hard("L_f2", t, x.data()); break; }
        lf2_declared = std::min(lf2_declared, lf2_t);

        // Diffusion.
        p.sigma(t, x.data(), sx.data());
        for (double v : sx)
            if (!std::isfinite(v)) { fail_hard("sigma", t, x.data()); break; }
        if (!report.hard_failure.empty()) break;
        p.sigma(t, y.data(), sy.data());
        for (double v : sy)
            if (!std::isfinite(v)) { fail_hard("sigma", t, y.data()); break; }
        if (!report.hard_failure.empty()) break;
        if (dxy > 1e-9) {
            std::vector<double> delta(sx.size());
            for (std::size_t m = 0; m < sx.size(); ++m) delta[m] = sx[m] - sy[m];
            sig_holder.observe(op_norm(delta, d) / std::sqrt(dxy));
        }
        {
            SymmetricMatrix a(d);
            for (int r = 0; r < d; ++r) {
                for (int cidx = r; cidx < d; ++cidx) {
                    double acc = 0.0;
                    for (int q = 0; q < d; ++q) acc += sx[r * d + q] * sx[cidx * d + q];
                    a(r, cidx) = acc;
                }
            }
            ellipticity_min = std::min(ellipticity_min, smallest_eigenvalue(a));
        }

        // Terminal cost.
        const double gx = p.g(x.data());
        if (!std::isfinite(gx)) { fail_hard("g", 0.0, x.data()); break; }
        const double gy = p.g(y.data());
        if (!std::isfinite(gy)) { fail_hard("g", 0.0, y.data()); break; }
        if (dxy > 1e-9) g_lip.observe(std::fabs(gx - gy) / dxy);

        // Closed-form feedback and structural identities of the quadratic family.
        if (p.quadratic) {
            p.sigma(t, x.data(), sx.data());
            for (int r = 0; r < d; ++r) {
                double acc = 0.0;
                for (int q = 0; q < d; ++q) acc += sx[q * d + r] * alpha[q];
                buf[r] = acc;  // sigma' alpha
            }
            feedback.observe(norm2(buf.data(), d) / (1.0 + a_norm));
            p.b1(t, x.data(), alpha.data(), bx.data());
            quad_structure.observe(diff_norm(bx.data(), buf.data()));
            quad_structure.observe(std::fabs(f1x - 0.5 * a_norm * a_norm));
        }
    }

    f2_lip.declared = lf2_declared;
    f2_growth.declared = lf2_declared;

    auto push = [&](const SupCheck& c) {
        AssumptionCheck out;
        out.name = c.name;
        out.estimated = c.estimated;
        out.declared = c.declared;
        out.floor = false;
        out.margin = c.declared * (1.0 + slack) - c.estimated;
        out.pass = out.margin >= 0.0;
        report.checks.push_back(out);
    };
    push(b1_lip);
    push(b1_growth);
    push(b2_lip);
    push(b2_growth);
    push(f1_lip);
    push(coer_lo);
    push(coer_hi);
    push(f2_lip);
    push(f2_growth);
    push(sig_holder);
    push(g_lip);
    {
        AssumptionCheck out;
        out.name = "ellipticity_floor";
        out.estimated = ellipticity_min;
        out.declared = k.eta_sigma;
        out.floor = true;
        out.margin = ellipticity_min - k.eta_sigma * (1.0 - slack);
        out.pass = out.margin >= 0.0;
        report.checks.push_back(out);
    }
    if (p.quadratic) {
        push(feedback);
        push(quad_structure);
    }

    report.all_pass = report.hard_failure.empty();
    for (const AssumptionCheck& c : report.checks) report.all_pass = report.all_pass && c.pass;
    return report;
}

double control_bound_radius(const RegularityConstants& k, double grad_bound) {
    if (!std::isfinite(grad_bound) || grad_bound < 0.0)
        throw std::invalid_argument(
            "control_bound_radius: grad_bound must be finite and nonnegative");
    return k.L_A * (1.0 + grad_bound);
}

}  // namespace hjb
