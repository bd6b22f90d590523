#include "hjblab/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hjblab/errors.hpp"
#include "hjblab/rng.hpp"

namespace hjb {

namespace {

void check_core_fraction(double f) {
    if (!(f > 0.0) || f > 1.0)
        throw std::invalid_argument("core fraction must lie in (0, 1]");
}

/// Axis index range [lo, hi] of nodes inside the core box (same on every
/// axis because the grid is a cube).
void core_axis_range(const Grid& g, double fraction, int* lo, int* hi) {
    const double limit = fraction * g.R_x * (1.0 + 1e-12) + 1e-300;
    int a = g.n_x, b = -1;
    for (int i = 0; i < g.n_x; ++i) {
        const double offset = std::fabs(g.axis_coord(0, i) - g.center[0]);
        if (offset <= limit) {
            a = std::min(a, i);
            b = std::max(b, i);
        }
    }
    if (b < a) {
        // Degenerate fraction: fall back to the center node.
        a = b = (g.n_x - 1) / 2;
    }
    *lo = a;
    *hi = b;
}

}  // namespace

std::vector<std::size_t> core_box_nodes(const Grid& g, double fraction) {
    check_core_fraction(fraction);
    int lo, hi;
    core_axis_range(g, fraction, &lo, &hi);
    const int d = g.dim();
    const int m = hi - lo + 1;
    std::size_t count = 1;
    for (int axis = 0; axis < d; ++axis) count *= static_cast<std::size_t>(m);
    std::vector<std::size_t> nodes;
    nodes.reserve(count);
    std::vector<int> idx(d, lo);
    while (true) {
        std::size_t flat = 0;
        for (int axis = 0; axis < d; ++axis)
            flat = flat * static_cast<std::size_t>(g.n_x) + static_cast<std::size_t>(idx[axis]);
        nodes.push_back(flat);
        int axis = d - 1;
        while (axis >= 0) {
            if (++idx[axis] <= hi) break;
            idx[axis] = lo;
            --axis;
        }
        if (axis < 0) break;
    }
    return nodes;
}

namespace {

struct NodePair {
    std::size_t a;
    std::size_t b;
    double dist;
};

/// Same-time pair sample shared by the Lipschitz and deteriorated scans:
/// all core pairs when that stays small, otherwise seeded random pairs plus
/// every axis-adjacent core pair.
std::vector<NodePair> sample_pairs(const Grid& g, double fraction, int n_pairs,
                                   std::uint64_t seed) {
    const std::vector<std::size_t> nodes = core_box_nodes(g, fraction);
    const std::size_t m = nodes.size();
    const int d = g.dim();
    std::vector<double> xa(d), xb(d);
    auto distance = [&](std::size_t na, std::size_t nb) {
        g.node_coords(na, xa.data());
        g.node_coords(nb, xb.data());
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += (xa[i] - xb[i]) * (xa[i] - xb[i]);
        return std::sqrt(s);
    };

    std::vector<NodePair> pairs;
    if (m < 2) return pairs;
    const double all_count = 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
    if (all_count <= 2e4) {
        pairs.reserve(static_cast<std::size_t>(all_count));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j)
                pairs.push_back({nodes[i], nodes[j], distance(nodes[i], nodes[j])});
        return pairs;
    }

    int lo, hi;
    core_axis_range(g, fraction, &lo, &hi);
    std::vector<int> idx(d);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t rem = nodes[i];
        for (int axis = d - 1; axis >= 0; --axis) {
            idx[axis] = static_cast<int>(rem % static_cast<std::size_t>(g.n_x));
            rem /= static_cast<std::size_t>(g.n_x);
        }
        for (int axis = 0; axis < d; ++axis) {
            if (idx[axis] + 1 > hi) continue;
            const std::size_t nb = nodes[i] + g.stride(axis);
            pairs.push_back({nodes[i], nb, g.h()});
        }
    }
    SplitMix64 rng(seed);
    int drawn = 0;
    while (drawn < n_pairs) {
        const std::size_t i = static_cast<std::size_t>(rng.next_u64() % m);
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % m);
        if (i == j) continue;
        pairs.push_back({nodes[i], nodes[j], distance(nodes[i], nodes[j])});
        ++drawn;
    }
    return pairs;
}

}  // namespace

double sup_gradient(const ValueFunction& u, double core_fraction) {
    check_core_fraction(core_fraction);
    const Grid& g = u.grid;
    const std::vector<std::size_t> nodes = core_box_nodes(g, core_fraction);
    double best = 0.0;
    for (int l = 0; l < g.n_layers(); ++l) {
        const double* layer = u.layer(l);
        for (std::size_t node : nodes) {
            const std::vector<double> grad = gradient_of_layer(g, layer, node);
            double s = 0.0;
            for (double c : grad) s += c * c;
            best = std::max(best, std::sqrt(s));
        }
    }
    return best;
}

double lipschitz_quotient(const ValueFunction& u, int n_pairs, std::uint64_t seed,
                          double core_fraction) {
    if (n_pairs < 1) throw std::invalid_argument("lipschitz_quotient: n_pairs must be >= 1");
    check_core_fraction(core_fraction);
    const Grid& g = u.grid;
    const std::vector<NodePair> pairs = sample_pairs(g, core_fraction, n_pairs, seed);
    double best = 0.0;
    for (int l = 0; l < g.n_layers(); ++l) {
        const double* layer = u.layer(l);
        for (const NodePair& p : pairs)
            best = std::max(best, std::fabs(layer[p.a] - layer[p.b]) / p.dist);
    }
    return best;
}

double deteriorated_check(const ValueFunction& u, double K_tilde, int n_pairs,
                          std::uint64_t seed, double core_fraction) {
    if (K_tilde < 0.0) throw std::invalid_argument("deteriorated_check: K_tilde must be >= 0");
    if (n_pairs < 1) throw std::invalid_argument("deteriorated_check: n_pairs must be >= 1");
    check_core_fraction(core_fraction);
    const Grid& g = u.grid;
    const std::vector<NodePair> pairs = sample_pairs(g, core_fraction, n_pairs, seed);
    double best = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < g.n_layers(); ++l) {
        const double* layer = u.layer(l);
        for (const NodePair& p : pairs)
            best = std::max(best, std::fabs(layer[p.a] - layer[p.b]) - K_tilde * p.dist);
    }
    if (pairs.empty()) best = 0.0;
    return best;
}

double growth_envelope(const ValueFunction& u) {
    const Grid& g = u.grid;
    const int d = g.dim();
    std::vector<double> x(d);
    // |x| per node is layer-independent; precompute the denominators.
    std::vector<double> denom(g.n_nodes());
    for (std::size_t node = 0; node < g.n_nodes(); ++node) {
        g.node_coords(node, x.data());
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += x[i] * x[i];
        denom[node] = 1.0 + std::sqrt(s);
    }
    double best = 0.0;
    for (int l = 0; l < g.n_layers(); ++l) {
        const double* layer = u.layer(l);
        for (std::size_t node = 0; node < g.n_nodes(); ++node)
            best = std::max(best, std::fabs(layer[node]) / denom[node]);
    }
    return best;
}

double control_norm_certificate(const ControlField& field, const ValueFunction& u,
                                double L_A) {
    if (L_A < 0.0)
        throw std::invalid_argument("control_norm_certificate: L_A must be >= 0");
    const Grid& g = u.grid;
    const Grid& gf = field.grid;
    const bool same = gf.n_x == g.n_x && gf.n_t == g.n_t && gf.R_x == g.R_x &&
                      gf.T == g.T && gf.center == g.center;
    if (!same)
        throw std::invalid_argument(
            "control_norm_certificate: control field and value function use different grids");
    const int d = g.dim();
    double margin = std::numeric_limits<double>::infinity();
    for (int l = 0; l < g.n_layers(); ++l) {
        const double* layer = u.layer(l);
        for (std::size_t node = 0; node < g.n_nodes(); ++node) {
            const std::vector<double> grad = gradient_of_layer(g, layer, node);
            double gs = 0.0;
            for (double c : grad) gs += c * c;
            const double* a = field.at(l, node);
            double as = 0.0;
            for (int i = 0; i < d; ++i) as += a[i] * a[i];
            margin = std::min(margin, L_A * (1.0 + std::sqrt(gs)) - std::sqrt(as));
        }
    }
    return margin;
}

double default_certificate_bound(const RegularityConstants& k, double horizon) {
    return 1.25 * (k.L_g + k.L_f2_integral) * std::exp(k.L_b * horizon);
}

CertificateReport build_certificates(const ValueFunction& u, const ControlField* field,
                                     const RegularityConstants& k, double horizon,
                                     const CertificateConfig& cfg) {
    check_core_fraction(cfg.core_fraction);
    if (cfg.n_pairs < 1)
        throw std::invalid_argument("build_certificates: n_pairs must be >= 1");
    const double fallback = default_certificate_bound(k, horizon);
    auto pick = [&](double v) { return std::isnan(v) ? fallback : v; };
    const double grad_bound = pick(cfg.grad_bound);
    const double lip_bound = pick(cfg.lipschitz_bound);
    const double growth_bound = pick(cfg.growth_bound);

    CertificateReport rep;
    rep.core_fraction = cfg.core_fraction;
    rep.sup_grad = sup_gradient(u, cfg.core_fraction);
    rep.lipschitz = lipschitz_quotient(u, cfg.n_pairs, cfg.seed, cfg.core_fraction);
    rep.growth_L = growth_envelope(u);
    rep.K_tilde = grad_bound;
    rep.M_tilde = deteriorated_check(u, rep.K_tilde, cfg.n_pairs, cfg.seed, cfg.core_fraction);

    double scale = 1.0;
    for (double v : u.values) scale = std::max(scale, std::fabs(v));
    const double roundoff = 1e-9 * scale;

    rep.entries.push_back({"sup_grad", rep.sup_grad, grad_bound, true,
                           rep.sup_grad <= grad_bound});
    rep.entries.push_back({"lipschitz_quotient", rep.lipschitz, lip_bound, true,
                           rep.lipschitz <= lip_bound});
    rep.entries.push_back({"growth_envelope", rep.growth_L, growth_bound, true,
                           rep.growth_L <= growth_bound});
    rep.entries.push_back({"deteriorated_margin", rep.M_tilde, roundoff, true,
                           rep.M_tilde <= roundoff});
    if (field != nullptr) {
        rep.has_control = true;
        rep.control_margin = control_norm_certificate(*field, u, k.L_A);
        rep.entries.push_back({"control_margin", rep.control_margin, -cfg.control_mesh,
                               false, rep.control_margin >= -cfg.control_mesh});
    }
    rep.all_pass = true;
    for (const CertificateEntry& e : rep.entries) rep.all_pass = rep.all_pass && e.pass;
    return rep;
}

void write_certificates_csv(const CertificateReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_certificates_csv: cannot open " + path + " for writing");
    out << "certificate,value,threshold,verdict,core_fraction\n";
    for (const CertificateEntry& e : report.entries) {
        out << e.name << ',' << format_float(e.value) << ',' << format_float(e.threshold)
            << ',' << (e.pass ? "pass" : "fail") << ',' << format_float(report.core_fraction)
            << '\n';
    }
    if (!out) throw DataError("write_certificates_csv: write failure on " + path);
}

}  // namespace hjb
