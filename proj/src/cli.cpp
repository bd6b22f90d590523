#include "hjblab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include "hjblab/cole_hopf.hpp"
#include "hjblab/errors.hpp"
#include "hjblab/estimates.hpp"
#include "hjblab/matrix_lemmas.hpp"
#include "hjblab/mc_verify.hpp"
#include "hjblab/pde_solver.hpp"

namespace hjb {

namespace {

std::string out_path(const ExperimentConfig& cfg, const char* name) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

/// The five standard query points: start of the horizon, offsets along the
/// first axis at 0 and +-{0.4, 0.8} of the core half-width.
std::vector<VerifyPoint> rule_points(const ExperimentConfig& cfg) {
    const double half = cfg.cert.core_fraction * cfg.R_x;
    std::vector<VerifyPoint> points;
    for (double frac : {0.0, 0.4, -0.4, 0.8, -0.8}) {
        VerifyPoint q;
        q.t = 0.0;
        q.x = cfg.center;
        q.x[0] += frac * half;
        points.push_back(std::move(q));
    }
    return points;
}

}  // namespace

int cmd_solve(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err) {
    const HJBProblem p = build_problem(cfg);
    const Grid grid = build_grid(cfg);
    write_manifest_csv(cfg, out_path(cfg, "manifest.csv"));
    EscalationResult esc;
    try {
        esc = solve_with_truncation_escalation(p, grid, cfg.R0_control, cfg.tol_truncation,
                                               cfg.scheme);
    } catch (const EscalationError& e) {
        write_trace_csv(e.trace(), out_path(cfg, "truncation_trace.csv"));
        err << "solve: " << e.what() << "\n";
        return exit_escalation;
    }
    write_value_csv(esc.value, out_path(cfg, "u.csv"));
    write_control_csv(esc.control, out_path(cfg, "controls.csv"));
    write_trace_csv(esc.trace, out_path(cfg, "truncation_trace.csv"));
    log << "solve: stabilized at control radius " << esc.trace.final_radius << " after "
        << esc.trace.stages.size() << " stage(s); outputs in " << cfg.out_dir << "\n";
    return exit_ok;
}

int cmd_certify(const ExperimentConfig& cfg, const std::string& u_csv, std::ostream& log,
                std::ostream& err) {
    const Grid grid = build_grid(cfg);
    const ValueFunction u = read_value_csv(grid, u_csv);
    const HJBProblem p = build_problem(cfg);
    write_manifest_csv(cfg, out_path(cfg, "manifest.csv"));
    const CertificateReport rep =
        build_certificates(u, nullptr, p.constants, p.horizon, cfg.cert);
    write_certificates_csv(rep, out_path(cfg, "certificates.csv"));
    for (const CertificateEntry& e : rep.entries)
        log << "certify: " << e.name << " = " << e.value << " vs "
            << (e.upper_bound ? "<= " : ">= ") << e.threshold << " -> "
            << (e.pass ? "pass" : "FAIL") << "\n";
    if (!rep.all_pass) {
        err << "certify: at least one certificate failed; see certificates.csv\n";
        return exit_certificate;
    }
    return exit_ok;
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err) {
    const HJBProblem p = build_problem(cfg);
    const Grid grid = build_grid(cfg);
    write_manifest_csv(cfg, out_path(cfg, "manifest.csv"));
    EscalationResult esc;
    try {
        esc = solve_with_truncation_escalation(p, grid, cfg.R0_control, cfg.tol_truncation,
                                               cfg.scheme);
    } catch (const EscalationError& e) {
        write_trace_csv(e.trace(), out_path(cfg, "truncation_trace.csv"));
        err << "verify: " << e.what() << "\n";
        return exit_escalation;
    }
    write_value_csv(esc.value, out_path(cfg, "u.csv"));
    write_control_csv(esc.control, out_path(cfg, "controls.csv"));
    write_trace_csv(esc.trace, out_path(cfg, "truncation_trace.csv"));

    const VerificationReport rep =
        verify_value(p, esc.value, esc.control, rule_points(cfg), cfg.mc);
    write_verification_csv(rep, out_path(cfg, "verify.csv"));
    for (const PointCheck& pc : rep.points) {
        log << "verify: t=" << pc.t << " x1=" << pc.x[0] << " u_pde=" << pc.u_pde
            << " v_mc=" << pc.v_mc << " stderr=" << pc.std_error << " -> "
            << (pc.pass ? "pass" : "FAIL") << "\n";
    }

    bool cross_pass = true;
    if (cfg.cross_check) {
        const CrossCheckReport ch =
            cross_check(p, grid, cfg.scheme, cfg.R0_control, cfg.tol_truncation);
        write_discrepancy_csv(ch, out_path(cfg, "colehopf.csv"));
        cross_pass = ch.sup_discrepancy <= cfg.cross_check_tol;
        log << "verify: route discrepancy sup=" << ch.sup_discrepancy
            << " mean=" << ch.mean_discrepancy << " vs <= " << cfg.cross_check_tol << " -> "
            << (cross_pass ? "pass" : "FAIL") << "\n";
    }

    if (!rep.all_pass) {
        err << "verify: Monte Carlo comparison out of allowance; see verify.csv\n";
        return exit_mc;
    }
    if (!cross_pass) {
        err << "verify: solver routes disagree beyond tolerance; see colehopf.csv\n";
        return exit_crosscheck;
    }
    return exit_ok;
}

int cmd_ladder(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err) {
    if (cfg.ladder < 2)
        throw ConfigError("ladder: grid.ladder must be >= 2 to compare rungs");
    write_manifest_csv(cfg, out_path(cfg, "manifest.csv"));

    struct Rung {
        int n_x, n_t;
        double R_x, sup_grad, h, dt;
    };
    std::vector<Rung> rungs;
    for (int k = 0; k < cfg.ladder; ++k) {
        for (int j = 0; j < cfg.ladder; ++j) {
            const int scale = 1 << k;
            Rung r;
            r.n_x = cfg.n_x * scale;
            r.n_t = cfg.n_t * scale;
            r.R_x = cfg.R_x * std::ldexp(1.0, j);
            const Grid grid = hjb::build_grid(cfg.center, r.R_x, r.n_x, r.n_t, cfg.horizon);
            const HJBProblem p = build_problem(cfg);
            const EscalationResult esc = solve_with_truncation_escalation(
                p, grid, cfg.R0_control, cfg.tol_truncation, cfg.scheme);
            r.sup_grad = sup_gradient(esc.value, cfg.cert.core_fraction);
            r.h = grid.h();
            r.dt = grid.dt();
            rungs.push_back(r);
            log << "ladder: n_x=" << r.n_x << " n_t=" << r.n_t << " R_x=" << r.R_x
                << " sup_grad=" << r.sup_grad << "\n";
        }
    }

    std::ofstream out(out_path(cfg, "ladder.csv"));
    if (!out) throw DataError("ladder: cannot open ladder.csv for writing");
    out << "rung,n_x,n_t,R_x,sup_grad,h,dt\n";
    for (std::size_t i = 0; i < rungs.size(); ++i) {
        const Rung& r = rungs[i];
        out << i << ',' << r.n_x << ',' << r.n_t << ',' << format_float(r.R_x) << ','
            << format_float(r.sup_grad) << ',' << format_float(r.h) << ','
            << format_float(r.dt) << '\n';
    }
    if (!out) throw DataError("ladder: write failure on ladder.csv");

    double lo = rungs.front().sup_grad, hi = rungs.front().sup_grad;
    for (const Rung& r : rungs) {
        lo = std::min(lo, r.sup_grad);
        hi = std::max(hi, r.sup_grad);
    }
    const double spread = lo > 0.0 ? (hi - lo) / lo : (hi > 0.0 ? 1e300 : 0.0);
    log << "ladder: gradient-bound spread " << spread << " vs <= " << cfg.uniformity << "\n";
    if (spread > cfg.uniformity) {
        err << "ladder: measured gradient bound is not uniform across rungs\n";
        return exit_certificate;
    }
    return exit_ok;
}

int cmd_lemmas(long long instances, std::uint64_t seed, std::ostream& log) {
    if (instances < 0) throw ConfigError("lemmas: instances must be >= 0");
    long long trace_violations = 0, doubling_violations = 0;
    double max_ratio = 0.0;
    long long trace_total = 0, doubling_total = 0;

    for (int d = 1; d <= 8; ++d) {
        const long long base = instances / 8 + (d <= instances % 8 ? 1 : 0);
        const std::vector<TraceInstance> cases =
            generate_trace_instances(d, static_cast<int>(base), seed + static_cast<unsigned>(d));
        for (const TraceInstance& c : cases) {
            const MatrixBoundResult r = trace_product_bound(c.a, c.b, c.m, c.big_m);
            ++trace_total;
            if (!r.holds) ++trace_violations;
        }
    }
    for (int d = 1; d <= 6; ++d) {
        const long long base = instances / 6 + (d <= instances % 6 ? 1 : 0);
        const std::vector<DoublingInstance> cases = generate_hypothesis_instances(
            d, static_cast<int>(base), seed + 100 + static_cast<unsigned>(d));
        for (const DoublingInstance& c : cases) {
            const MatrixBoundResult r = doubling_matrix_bound(c.a, c.x, c.y, c.c, c.m);
            ++doubling_total;
            if (!r.holds) ++doubling_violations;
            if (r.rhs != 0.0) max_ratio = std::max(max_ratio, r.lhs / r.rhs);
        }
    }

    // Worked examples with exact expected values.
    bool examples_ok = true;
    {
        const MatrixBoundResult r = trace_product_bound(
            SymmetricMatrix::scaled_identity(2, 2.0), SymmetricMatrix::scaled_identity(2, -1.0),
            2.0, 0.0);
        examples_ok = examples_ok && r.lhs == -4.0 && r.rhs == -4.0 && r.holds;
    }
    {
        const MatrixBoundResult r = trace_product_bound(
            SymmetricMatrix::from_rows(2, {1, 0, 0, 3}),
            SymmetricMatrix::from_rows(2, {-1, 0, 0, -2}), 1.0, 0.0);
        examples_ok = examples_ok && r.lhs == -7.0 && r.rhs == -3.0 && r.holds;
    }
    {
        const MatrixBoundResult r = trace_product_bound(
            SymmetricMatrix::scaled_identity(2, 2.0),
            SymmetricMatrix::from_rows(2, {1, 0, 0, -1}), 2.0, 1.0);
        examples_ok = examples_ok && r.lhs == 0.0 && r.rhs == 0.0 && r.holds;
    }
    {
        const MatrixBoundResult r = doubling_matrix_bound(
            SymmetricMatrix::scaled_identity(1, 1.0), SymmetricMatrix::scaled_identity(1, 0.5),
            SymmetricMatrix::scaled_identity(1, 0.5), 1.0, 1.0);
        examples_ok =
            examples_ok && r.lhs == 0.0 && std::fabs(r.rhs - 5.0 * std::sqrt(2.0)) < 1e-12 &&
            r.holds;
    }

    log << "lemmas: trace bound " << trace_total << " instances (d<=8), violations "
        << trace_violations << "\n";
    log << "lemmas: doubling bound " << doubling_total << " instances (d<=6), violations "
        << doubling_violations << ", max lhs/rhs ratio " << max_ratio << "\n";
    log << "lemmas: worked examples " << (examples_ok ? "exact" : "MISMATCH") << "\n";
    return (trace_violations == 0 && doubling_violations == 0 && examples_ok)
               ? exit_ok
               : exit_certificate;
}

int run_cli(const CliOptions& opt, std::ostream& log, std::ostream& err) {
    try {
        if (opt.command == "lemmas") return cmd_lemmas(opt.lemma_instances, opt.lemma_seed, log);
        if (opt.config_path.empty())
            throw ConfigError("command '" + opt.command + "' needs --config PATH");
        ExperimentConfig cfg = parse_config_file(opt.config_path);
        if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
        if (opt.has_seed) {
            cfg.mc.seed = opt.seed;
            cfg.cert.seed = opt.seed;
        }
        if (opt.command == "solve") return cmd_solve(cfg, log, err);
        if (opt.command == "certify") {
            if (opt.u_csv.empty())
                throw ConfigError("certify needs --u PATH (the value-function CSV)");
            return cmd_certify(cfg, opt.u_csv, log, err);
        }
        if (opt.command == "verify") return cmd_verify(cfg, log, err);
        if (opt.command == "ladder") return cmd_ladder(cfg, log, err);
        throw ConfigError("unknown command '" + opt.command + "'");
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return exit_data;
    } catch (const EscalationError& e) {
        err << "solver error: " << e.what() << "\n";
        return exit_escalation;
    } catch (const TransformError& e) {
        err << "transform error: " << e.what() << "\n";
        return exit_crosscheck;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << "\n";
        return exit_escalation;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    }
}

}  // namespace hjb
