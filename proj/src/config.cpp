#include "hjblab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "hjblab/errors.hpp"
#include "hjblab/rng.hpp"

namespace hjb {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

struct ParseContext {
    std::string origin;
    int line = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
    }

    double number(const std::string& key, const std::string& value) const {
        try {
            std::size_t used = 0;
            const double v = std::stod(value, &used);
            if (used != value.size()) fail("trailing characters in value for '" + key + "'");
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail("cannot parse '" + value + "' as a number for '" + key + "'");
        }
    }

    int integer(const std::string& key, const std::string& value) const {
        const double v = number(key, value);
        if (v != std::floor(v) || std::fabs(v) > 2147483647.0)
            fail("'" + key + "' must be an integer");
        return static_cast<int>(v);
    }

    long long long_integer(const std::string& key, const std::string& value) const {
        const double v = number(key, value);
        if (v != std::floor(v) || std::fabs(v) > 9.0e15)
            fail("'" + key + "' must be an integer");
        return static_cast<long long>(v);
    }

    std::uint64_t unsigned_integer(const std::string& key, const std::string& value) const {
        const long long v = long_integer(key, value);
        if (v < 0) fail("'" + key + "' must be nonnegative");
        return static_cast<std::uint64_t>(v);
    }

    bool boolean(const std::string& key, const std::string& value) const {
        if (value == "true" || value == "yes" || value == "1") return true;
        if (value == "false" || value == "no" || value == "0") return false;
        fail("'" + key + "' must be a boolean (true/false)");
    }

    std::vector<double> vector(const std::string& key, const std::string& value) const {
        std::vector<double> out;
        std::stringstream ss(value);
        std::string piece;
        while (std::getline(ss, piece, ',')) {
            piece = trim(piece);
            if (piece.empty()) fail("empty component in vector value for '" + key + "'");
            out.push_back(number(key, piece));
        }
        if (out.empty()) fail("empty vector value for '" + key + "'");
        return out;
    }

    std::vector<std::vector<double>> vector_list(const std::string& key,
                                                 const std::string& value) const {
        std::vector<std::vector<double>> out;
        std::stringstream ss(value);
        std::string piece;
        while (std::getline(ss, piece, ';')) {
            piece = trim(piece);
            if (piece.empty()) fail("empty vector in list value for '" + key + "'");
            out.push_back(vector(key, piece));
        }
        if (out.empty()) fail("empty list value for '" + key + "'");
        return out;
    }
};

[[noreturn]] void fail_at(const std::string& origin, const std::string& msg) {
    throw ConfigError(origin + ": " + msg);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    // The simulation struct carries usable standalone defaults; here "unset"
    // must be distinguishable so the grid-derived resolution below can fire.
    cfg.mc.dt_sim = std::numeric_limits<double>::quiet_NaN();
    cfg.mc.allowance = std::numeric_limits<double>::quiet_NaN();
    ParseContext ctx{origin, 0};
    std::string section;
    std::set<std::string> seen;

    std::stringstream stream(text);
    std::string raw;
    while (std::getline(stream, raw)) {
        ++ctx.line;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') ctx.fail("malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            static const std::set<std::string> known = {"problem", "grid",         "solver",
                                                        "mc",      "certificates", "output"};
            if (known.find(section) == known.end())
                ctx.fail("unknown section '" + section + "'");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) ctx.fail("expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) ctx.fail("empty key");
        if (value.empty()) ctx.fail("empty value for '" + key + "'");
        if (section.empty()) ctx.fail("key '" + key + "' appears before any section header");
        const std::string full = section + "." + key;
        if (!seen.insert(full).second) ctx.fail("duplicate key '" + full + "'");

        if (section == "problem") {
            if (key == "family") {
                cfg.family = value;
            } else if (key == "dimension") {
                cfg.dimension = ctx.integer(key, value);
            } else if (key == "horizon") {
                cfg.horizon = ctx.number(key, value);
            } else if (key == "discount") {
                cfg.discount = ctx.number(key, value);
            } else if (key == "b2.matrix") {
                cfg.b2.matrix = ctx.vector(key, value);
            } else if (key == "b2.offset") {
                cfg.b2.offset = ctx.vector(key, value);
            } else if (key == "b2.clamp") {
                cfg.b2.clamp_radius = ctx.number(key, value);
            } else if (key == "sigma.scale") {
                cfg.sigma.scale = ctx.number(key, value);
            } else if (key == "sigma.mode") {
                if (value == "constant")
                    cfg.sigma.mode = SigmaMode::constant;
                else if (value == "sqrt_growth")
                    cfg.sigma.mode = SigmaMode::sqrt_growth;
                else
                    ctx.fail("sigma.mode must be constant or sqrt_growth");
            } else if (key == "sigma.clamp") {
                cfg.sigma.clamp_radius = ctx.number(key, value);
            } else if (key == "f2.mode" || key == "g.mode") {
                ScalarSpec& s = key[0] == 'f' ? cfg.f2 : cfg.g;
                if (value == "affine")
                    s.mode = ScalarMode::affine;
                else if (value == "norm")
                    s.mode = ScalarMode::norm;
                else if (value == "abs_first")
                    s.mode = ScalarMode::abs_first;
                else
                    ctx.fail(key + " must be affine, norm, or abs_first");
            } else if (key == "f2.slope" || key == "g.slope") {
                (key[0] == 'f' ? cfg.f2 : cfg.g).slope = ctx.number(key, value);
            } else if (key == "f2.offset" || key == "g.offset") {
                (key[0] == 'f' ? cfg.f2 : cfg.g).offset = ctx.number(key, value);
            } else if (key == "f2.clamp" || key == "g.clamp") {
                (key[0] == 'f' ? cfg.f2 : cfg.g).clamp_radius = ctx.number(key, value);
            } else {
                ctx.fail("unknown key 'problem." + key + "'");
            }
        } else if (section == "grid") {
            if (key == "R_x") {
                cfg.R_x = ctx.number(key, value);
            } else if (key == "n_x") {
                cfg.n_x = ctx.integer(key, value);
            } else if (key == "n_t") {
                cfg.n_t = ctx.integer(key, value);
            } else if (key == "center") {
                cfg.center = ctx.vector(key, value);
            } else if (key == "ladder") {
                cfg.ladder = ctx.integer(key, value);
            } else {
                ctx.fail("unknown key 'grid." + key + "'");
            }
        } else if (section == "solver") {
            if (key == "mode") {
                if (value == "implicit")
                    cfg.scheme.mode = TimeStepping::implicit_policy_iteration;
                else if (value == "explicit")
                    cfg.scheme.mode = TimeStepping::explicit_monotone;
                else
                    ctx.fail("solver.mode must be implicit or explicit");
            } else if (key == "m_alpha") {
                cfg.scheme.m_alpha = ctx.integer(key, value);
            } else if (key == "tol_policy") {
                cfg.scheme.tol_policy = ctx.number(key, value);
            } else if (key == "max_sweeps") {
                cfg.scheme.max_sweeps = ctx.integer(key, value);
            } else if (key == "tol_linear") {
                cfg.scheme.tol_linear = ctx.number(key, value);
            } else if (key == "R0_control") {
                cfg.R0_control = ctx.number(key, value);
            } else if (key == "tol_truncation") {
                cfg.tol_truncation = ctx.number(key, value);
            } else if (key == "max_doublings") {
                cfg.scheme.max_doublings = ctx.integer(key, value);
            } else if (key == "cross_check") {
                cfg.cross_check = ctx.boolean(key, value);
            } else if (key == "cross_check_tol") {
                cfg.cross_check_tol = ctx.number(key, value);
            } else {
                ctx.fail("unknown key 'solver." + key + "'");
            }
        } else if (section == "mc") {
            if (key == "n_paths") {
                cfg.mc.n_paths = ctx.long_integer(key, value);
            } else if (key == "dt_sim") {
                cfg.mc.dt_sim = ctx.number(key, value);
            } else if (key == "seed") {
                cfg.mc.seed = ctx.unsigned_integer(key, value);
            } else if (key == "antithetic") {
                cfg.mc.antithetic = ctx.boolean(key, value);
            } else if (key == "allowance") {
                cfg.mc.allowance = ctx.number(key, value);
            } else if (key == "baselines") {
                cfg.mc.baselines = ctx.vector_list(key, value);
            } else {
                ctx.fail("unknown key 'mc." + key + "'");
            }
        } else if (section == "certificates") {
            if (key == "core_fraction") {
                cfg.cert.core_fraction = ctx.number(key, value);
            } else if (key == "n_pairs") {
                cfg.cert.n_pairs = ctx.integer(key, value);
            } else if (key == "seed") {
                cfg.cert.seed = ctx.unsigned_integer(key, value);
            } else if (key == "grad_bound") {
                cfg.cert.grad_bound = ctx.number(key, value);
            } else if (key == "lipschitz_bound") {
                cfg.cert.lipschitz_bound = ctx.number(key, value);
            } else if (key == "growth_bound") {
                cfg.cert.growth_bound = ctx.number(key, value);
            } else if (key == "uniformity") {
                cfg.uniformity = ctx.number(key, value);
            } else {
                ctx.fail("unknown key 'certificates." + key + "'");
            }
        } else if (section == "output") {
            if (key == "dir") {
                cfg.out_dir = value;
            } else {
                ctx.fail("unknown key 'output." + key + "'");
            }
        }
    }

    // Semantic validation (line numbers no longer apply).
    if (cfg.family != "quadratic")
        fail_at(origin, "unsupported problem family '" + cfg.family + "'");
    if (cfg.dimension < 1 || cfg.dimension > 8)
        fail_at(origin, "dimension must lie in [1, 8]");
    if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon))
        fail_at(origin, "horizon must be positive");
    if (!std::isfinite(cfg.discount)) fail_at(origin, "discount must be finite");
    if (!(cfg.R_x > 0.0) || !std::isfinite(cfg.R_x)) fail_at(origin, "R_x must be positive");
    if (cfg.n_x < 3) fail_at(origin, "n_x must be >= 3");
    if (cfg.n_t < 1) fail_at(origin, "n_t must be >= 1");
    if (cfg.ladder < 1) fail_at(origin, "ladder must be >= 1");
    if (cfg.center.empty()) cfg.center.assign(static_cast<std::size_t>(cfg.dimension), 0.0);
    if (static_cast<int>(cfg.center.size()) != cfg.dimension)
        fail_at(origin, "center must list one coordinate per dimension");
    if (!(cfg.R0_control > 0.0) || !std::isfinite(cfg.R0_control))
        fail_at(origin, "R0_control must be positive");
    if (!(cfg.tol_truncation > 0.0) || !std::isfinite(cfg.tol_truncation))
        fail_at(origin, "tol_truncation must be positive");
    if (cfg.cross_check && cfg.discount != 0.0)
        fail_at(origin,
                "cross_check requires a zero discount (the exponential substitution "
                "does not apply otherwise); set solver.cross_check = false");
    if (cfg.mc.n_paths < 1) fail_at(origin, "mc.n_paths must be >= 1");
    if (cfg.mc.antithetic && cfg.mc.n_paths % 2 != 0)
        fail_at(origin, "mc.n_paths must be even when antithetic pairing is on");
    for (const std::vector<double>& b : cfg.mc.baselines)
        if (static_cast<int>(b.size()) != cfg.dimension)
            fail_at(origin, "each mc baseline must list one control component per dimension");
    if (!(cfg.uniformity > 0.0)) fail_at(origin, "uniformity must be positive");

    cfg.scheme.core_fraction = cfg.cert.core_fraction;
    try {
        check_scheme_config(cfg.scheme);
    } catch (const std::invalid_argument& e) {
        fail_at(origin, e.what());
    }

    // Grid-derived defaults.
    const double h = 2.0 * cfg.R_x / (cfg.n_x - 1);
    const double dt = cfg.horizon / cfg.n_t;
    if (std::isnan(cfg.mc.dt_sim)) cfg.mc.dt_sim = dt;
    if (!(cfg.mc.dt_sim > 0.0)) fail_at(origin, "mc.dt_sim must be positive");
    if (cfg.mc.dt_sim > dt * (1.0 + 1e-12))
        fail_at(origin, "mc.dt_sim must not exceed the grid time step");
    if (std::isnan(cfg.mc.allowance)) cfg.mc.allowance = 2.0 * (h + dt);
    if (cfg.mc.allowance < 0.0) fail_at(origin, "mc.allowance must be >= 0");
    if (std::isnan(cfg.cross_check_tol)) cfg.cross_check_tol = 3.0 * (h + dt);
    if (!(cfg.cross_check_tol > 0.0)) fail_at(origin, "cross_check_tol must be positive");

    cfg.config_hash = fnv1a_hash(std::span<const char>(text.data(), text.size()));
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

HJBProblem build_problem(const ExperimentConfig& cfg) {
    return quadratic_problem(cfg.dimension, cfg.horizon, cfg.discount, cfg.b2, cfg.sigma,
                             cfg.f2, cfg.g);
}

Grid build_grid(const ExperimentConfig& cfg) {
    return build_grid(cfg.center, cfg.R_x, cfg.n_x, cfg.n_t, cfg.horizon);
}

namespace {

std::string join(const std::vector<double>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += format_float(v[i]);
    }
    return out;
}

const char* scalar_mode_name(ScalarMode m) {
    switch (m) {
        case ScalarMode::affine: return "affine";
        case ScalarMode::norm: return "norm";
        case ScalarMode::abs_first: return "abs_first";
    }
    return "?";
}

}  // namespace

void write_manifest_csv(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_manifest_csv: cannot open " + path + " for writing");
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(cfg.config_hash));
    out << "key,value\n";
    out << "config_hash," << hash << '\n';
    out << "problem.family," << cfg.family << '\n';
    out << "problem.dimension," << cfg.dimension << '\n';
    out << "problem.horizon," << format_float(cfg.horizon) << '\n';
    out << "problem.discount," << format_float(cfg.discount) << '\n';
    out << "problem.b2.matrix," << (cfg.b2.matrix.empty() ? "0" : join(cfg.b2.matrix, ';'))
        << '\n';
    out << "problem.b2.offset," << (cfg.b2.offset.empty() ? "0" : join(cfg.b2.offset, ';'))
        << '\n';
    out << "problem.b2.clamp," << format_float(cfg.b2.clamp_radius) << '\n';
    out << "problem.sigma.scale," << format_float(cfg.sigma.scale) << '\n';
    out << "problem.sigma.mode,"
        << (cfg.sigma.mode == SigmaMode::constant ? "constant" : "sqrt_growth") << '\n';
    out << "problem.sigma.clamp," << format_float(cfg.sigma.clamp_radius) << '\n';
    out << "problem.f2.mode," << scalar_mode_name(cfg.f2.mode) << '\n';
    out << "problem.f2.slope," << format_float(cfg.f2.slope) << '\n';
    out << "problem.f2.offset," << format_float(cfg.f2.offset) << '\n';
    out << "problem.f2.clamp," << format_float(cfg.f2.clamp_radius) << '\n';
    out << "problem.g.mode," << scalar_mode_name(cfg.g.mode) << '\n';
    out << "problem.g.slope," << format_float(cfg.g.slope) << '\n';
    out << "problem.g.offset," << format_float(cfg.g.offset) << '\n';
    out << "problem.g.clamp," << format_float(cfg.g.clamp_radius) << '\n';
    out << "grid.R_x," << format_float(cfg.R_x) << '\n';
    out << "grid.n_x," << cfg.n_x << '\n';
    out << "grid.n_t," << cfg.n_t << '\n';
    out << "grid.center," << join(cfg.center, ';') << '\n';
    out << "grid.ladder," << cfg.ladder << '\n';
    out << "solver.mode,"
        << (cfg.scheme.mode == TimeStepping::implicit_policy_iteration ? "implicit"
                                                                       : "explicit")
        << '\n';
    out << "solver.m_alpha," << cfg.scheme.m_alpha << '\n';
    out << "solver.tol_policy," << format_float(cfg.scheme.tol_policy) << '\n';
    out << "solver.max_sweeps," << cfg.scheme.max_sweeps << '\n';
    out << "solver.tol_linear," << format_float(cfg.scheme.tol_linear) << '\n';
    out << "solver.R0_control," << format_float(cfg.R0_control) << '\n';
    out << "solver.tol_truncation," << format_float(cfg.tol_truncation) << '\n';
    out << "solver.max_doublings," << cfg.scheme.max_doublings << '\n';
    out << "solver.cross_check," << (cfg.cross_check ? "true" : "false") << '\n';
    out << "solver.cross_check_tol," << format_float(cfg.cross_check_tol) << '\n';
    out << "mc.n_paths," << cfg.mc.n_paths << '\n';
    out << "mc.dt_sim," << format_float(cfg.mc.dt_sim) << '\n';
    out << "mc.seed," << cfg.mc.seed << '\n';
    out << "mc.antithetic," << (cfg.mc.antithetic ? "true" : "false") << '\n';
    out << "mc.allowance," << format_float(cfg.mc.allowance) << '\n';
    std::string base;
    for (std::size_t i = 0; i < cfg.mc.baselines.size(); ++i) {
        if (i) base += ';';
        base += join(cfg.mc.baselines[i], ' ');
    }
    out << "mc.baselines," << base << '\n';
    out << "certificates.core_fraction," << format_float(cfg.cert.core_fraction) << '\n';
    out << "certificates.n_pairs," << cfg.cert.n_pairs << '\n';
    out << "certificates.seed," << cfg.cert.seed << '\n';
    out << "certificates.grad_bound," << format_float(cfg.cert.grad_bound) << '\n';
    out << "certificates.lipschitz_bound," << format_float(cfg.cert.lipschitz_bound) << '\n';
    out << "certificates.growth_bound," << format_float(cfg.cert.growth_bound) << '\n';
    out << "certificates.uniformity," << format_float(cfg.uniformity) << '\n';
    out << "output.dir," << cfg.out_dir << '\n';
    if (!out) throw DataError("write_manifest_csv: write failure on " + path);
}

}  // namespace hjb
