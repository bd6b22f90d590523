#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hjblab/cli.hpp"
#include "hjblab/cole_hopf.hpp"
#include "hjblab/config.hpp"
#include "hjblab/errors.hpp"
#include "hjblab/estimates.hpp"
#include "hjblab/grid.hpp"
#include "hjblab/matrix_lemmas.hpp"
#include "hjblab/mc_verify.hpp"
#include "hjblab/pde_solver.hpp"
#include "hjblab/problem.hpp"

// End-to-end gate: every numbered criterion below prints exactly one
// [PASS]/[FAIL] line; the process exits nonzero when any of them fails.
// All tolerances are written out literally next to the checks.

namespace {

using namespace hjb;

int g_detail_failures = 0;

// Always-on requirement: never compiled out in Release.
bool check(bool cond, const std::string& msg) {
    if (!cond) {
        std::cerr << "  [FAIL] " << msg << "\n";
        ++g_detail_failures;
    }
    return cond;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

AffineMapSpec zero_b2(int d) {
    AffineMapSpec s;
    s.matrix.assign(static_cast<std::size_t>(d) * d, 0.0);
    s.offset.assign(static_cast<std::size_t>(d), 0.0);
    return s;
}

/// d = 1, unit diffusion, zero drift/source, terminal u(T, x) = x.
/// Exact solution u(t, x) = x + (t - 1) / 2 with feedback -1 everywhere,
/// reproduced exactly by the affine-exact stencils.
HJBProblem affine_benchmark() {
    ScalarSpec f2;
    ScalarSpec g;
    g.slope = 1.0;
    return quadratic_problem(1, 1.0, 0.0, zero_b2(1), SigmaSpec{}, f2, g);
}

/// d = 1 with expanding clamped drift and a kinked running cost; no closed
/// form, used to probe the measured bounds away from the affine special case.
HJBProblem drifted_instance() {
    AffineMapSpec b2;
    b2.matrix = {0.5};
    b2.offset = {0.0};
    b2.clamp_radius = 6.0;
    ScalarSpec f2;
    f2.mode = ScalarMode::norm;
    f2.slope = 0.3;
    f2.offset = 0.1;
    f2.clamp_radius = 6.0;
    ScalarSpec g;
    g.slope = 1.0;
    return quadratic_problem(1, 1.0, 0.0, b2, SigmaSpec{}, f2, g);
}

double affine_exact(double t, double x) { return x + 0.5 * (t - 1.0); }

double sup_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

/// Max |u - exact| over core-box nodes, all time layers.
double sup_core_error_vs_affine(const ValueFunction& u, double core_fraction) {
    const Grid& g = u.grid;
    const std::vector<std::size_t> core = core_box_nodes(g, core_fraction);
    double err = 0.0;
    std::vector<double> x(g.dim());
    for (int l = 0; l < g.n_layers(); ++l) {
        const double t = g.time_at(l);
        for (std::size_t node : core) {
            g.node_coords(node, x.data());
            err = std::max(err, std::fabs(u.at(l, node) - affine_exact(t, x[0])));
        }
    }
    return err;
}

/// Count nodes (all layers) where |alpha| exceeds L_A (1 + |Du|) + slack.
long long control_envelope_violations(const ControlField& f, const ValueFunction& u,
                                      double L_A, double slack) {
    const Grid& g = u.grid;
    const int d = g.dim();
    long long violations = 0;
    for (int l = 0; l < g.n_layers(); ++l) {
        for (std::size_t node = 0; node < g.n_nodes(); ++node) {
            const double* a = f.at(l, node);
            double an = 0.0;
            for (int i = 0; i < d; ++i) an += a[i] * a[i];
            an = std::sqrt(an);
            const std::vector<double> grad = gradient_at(u, l, node);
            double gn = 0.0;
            for (double c : grad) gn += c * c;
            gn = std::sqrt(gn);
            if (an > L_A * (1.0 + gn) + slack) ++violations;
        }
    }
    return violations;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<missing:" + path + ">";
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Manifest rows minus the output-directory row (the only row that is
/// expected to differ when the same experiment writes to two directories).
std::string strip_output_dir_row(const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line))
        if (line.rfind("output.dir,", 0) != 0) {
            out += line;
            out += '\n';
        }
    return out;
}

int count_occurrences(const std::string& text, const std::string& needle) {
    int n = 0;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

}  // namespace

int main() {
    std::vector<std::pair<std::string, bool>> results;
    auto record = [&](const std::string& name, bool ok) {
        results.emplace_back(name, ok);
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << std::endl;
    };

    const SchemeConfig scheme;  // implicit policy iteration, defaults throughout
    const HJBProblem affine = affine_benchmark();
    const HJBProblem drifted = drifted_instance();

    // Solved once, reused by criteria 1, 3, 5, 6.
    const Grid grid129 = build_grid({0.0}, 4.0, 129, 256, 1.0);
    const double h129 = grid129.h(), dt129 = grid129.dt();

    EscalationResult affine_esc;
    double solve_seconds = 0.0;
    {
        const auto t0 = std::chrono::steady_clock::now();
        affine_esc = solve_with_truncation_escalation(affine, grid129, 0.25, 1e-6, scheme);
        solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                            .count();
    }

    // ---- 1. Core accuracy on the affine benchmark --------------------------
    {
        bool ok = true;
        const double bound = 2.0 * (h129 + dt129);  // = 0.1328125
        const double err = sup_core_error_vs_affine(affine_esc.value, 0.6);
        ok = check(err <= bound, "core error " + fmt(err) + " > 2(h+dt) = " + fmt(bound)) && ok;
        ok = check(solve_seconds < 60.0,
                   "solve took " + fmt(solve_seconds) + " s (budget 60 s)") &&
             ok;
        record("1. affine benchmark solved on the 129x256 box-4 grid: core error " + fmt(err) +
                   " <= " + fmt(bound) + " in " + fmt(solve_seconds) + " s",
               ok);
    }

    // ---- 2. Measured gradient bound is uniform in the mesh and the box -----
    EscalationResult drifted_129_r4;  // kept for criterion 6
    {
        bool ok = true;
        struct Setup {
            int n_x, n_t;
            double R_x;
        };
        const Setup setups[] = {{129, 256, 4.0}, {258, 512, 4.0}, {129, 256, 8.0},
                                {258, 512, 8.0}};
        std::string spreads;
        int which = 0;
        for (const HJBProblem* p : {&affine, &drifted}) {
            double lo = 0.0, hi = 0.0;
            bool first = true;
            for (const Setup& s : setups) {
                const Grid g = build_grid({0.0}, s.R_x, s.n_x, s.n_t, 1.0);
                EscalationResult esc =
                    solve_with_truncation_escalation(*p, g, 0.25, 1e-6, scheme);
                const double K = sup_gradient(esc.value, 0.6);
                ok = check(std::isfinite(K) && K > 0.0, "gradient bound not positive") && ok;
                if (first) {
                    lo = hi = K;
                    first = false;
                } else {
                    lo = std::min(lo, K);
                    hi = std::max(hi, K);
                }
                if (which == 1 && s.n_x == 129 && s.R_x == 4.0)
                    drifted_129_r4 = std::move(esc);
            }
            const double spread = (hi - lo) / lo;
            ok = check(spread <= 0.05, std::string("instance ") +
                                           (which == 0 ? "affine" : "drifted") + " spread " +
                                           fmt(spread) + " > 0.05") &&
                 ok;
            spreads += (which ? ", " : "") + fmt(spread);
            ++which;
        }
        record("2. sup|Du| spread across {1x,2x} mesh and {4,8} box half-widths <= 5% "
               "(measured " +
                   spreads + ")",
               ok);
    }

    // ---- 3. Stability under doubling the control-truncation radius ---------
    {
        bool ok = true;
        const SolveResult at_r = solve(affine, grid129, 2.0, scheme);
        const SolveResult at_2r = solve(affine, grid129, 4.0, scheme);
        double delta = 0.0;
        for (std::size_t i = 0; i < at_r.value.values.size(); ++i)
            delta = std::max(delta,
                             std::fabs(at_r.value.values[i] - at_2r.value.values[i]));
        const double scale = std::max(1.0, sup_abs(at_r.value.values));
        ok = check(delta <= 1e-6 * scale,
                   "radius doubling moved values by " + fmt(delta) + " > 1e-6 * " +
                       fmt(scale)) &&
             ok;
        record("3. re-solving with twice the stabilized control radius changes values by " +
                   fmt(delta) + " <= 1e-6 of the value scale",
               ok);
    }

    // ---- 4. Route agreement, shrinking under refinement ---------------------
    {
        bool ok = true;
        const CrossCheckReport coarse = cross_check(affine, grid129, scheme, 0.25, 1e-6);
        const double bound_coarse = 3.0 * (h129 + dt129);  // = 0.19921875
        ok = check(coarse.sup_discrepancy <= bound_coarse,
                   "coarse route gap " + fmt(coarse.sup_discrepancy) + " > 3(h+dt) = " +
                       fmt(bound_coarse)) &&
             ok;

        const Grid grid257 = build_grid({0.0}, 4.0, 257, 512, 1.0);  // h and dt both halve
        const CrossCheckReport fine = cross_check(affine, grid257, scheme, 0.25, 1e-6);
        const double bound_fine = 3.0 * (grid257.h() + grid257.dt());
        ok = check(fine.sup_discrepancy <= bound_fine,
                   "fine route gap " + fmt(fine.sup_discrepancy) + " > 3(h+dt) = " +
                       fmt(bound_fine)) &&
             ok;
        const bool shrank = fine.sup_discrepancy == 0.0 ||
                            coarse.sup_discrepancy / fine.sup_discrepancy >= 1.5;
        ok = check(shrank, "route gap shrank only " +
                               fmt(fine.sup_discrepancy > 0.0
                                       ? coarse.sup_discrepancy / fine.sup_discrepancy
                                       : 0.0) +
                               "x under mesh halving (need >= 1.5x)") &&
             ok;
        record("4. direct and exponential-substitution routes agree within 3(h+dt) (" +
                   fmt(coarse.sup_discrepancy) + " coarse, " + fmt(fine.sup_discrepancy) +
                   " fine, shrink >= 1.5x)",
               ok);
    }

    // ---- 5. Sampled control costs reproduce the solved values ---------------
    {
        bool ok = true;
        SimulationConfig mc;  // 100000 paths, dt 1/256, seed 2024
        mc.allowance = 2.0 * (h129 + dt129);
        std::vector<VerifyPoint> points;
        for (double x : {0.0, 0.96, -0.96, 1.92, -1.92})
            points.push_back(VerifyPoint{0.0, {x}});
        const VerificationReport rep =
            verify_value(affine, affine_esc.value, affine_esc.control, points, mc);
        for (const PointCheck& pc : rep.points)
            ok = check(pc.value_match, "sampled cost at x = " + fmt(pc.x[0]) + " is " +
                                           fmt(pc.v_mc) + " vs value " + fmt(pc.u_pde) +
                                           " (3 stderr + allowance exceeded)") &&
                 ok;

        const double u00 = interpolate(affine_esc.value, 0.0, {0.0});
        ok = check(std::fabs(u00 - (-0.5)) <= 1e-9,
                   "value at the origin is " + fmt(u00) + ", expected -0.5") &&
             ok;

        // Suboptimality gaps against two constant controls at the origin:
        // doing nothing costs 0 (gap 0.5); pushing with +1 costs 1.5 (gap 2).
        const PointCheck& origin = rep.points.front();
        const CostEstimate base0 = simulate_cost(affine, std::vector<double>{0.0}, 0.0,
                                                 {0.0}, mc);
        const CostEstimate base1 = simulate_cost(affine, std::vector<double>{1.0}, 0.0,
                                                 {0.0}, mc);
        const double gap0 = base0.mean - origin.v_mc;
        const double tol0 = 3.0 * std::sqrt(base0.std_error * base0.std_error +
                                            origin.std_error * origin.std_error);
        ok = check(std::fabs(gap0 - 0.5) <= tol0, "gap vs zero control " + fmt(gap0) +
                                                      " differs from 0.5 beyond " +
                                                      fmt(tol0)) &&
             ok;
        const double gap1 = base1.mean - origin.v_mc;
        const double tol1 = 3.0 * std::sqrt(base1.std_error * base1.std_error +
                                            origin.std_error * origin.std_error);
        ok = check(std::fabs(gap1 - 2.0) <= tol1, "gap vs unit control " + fmt(gap1) +
                                                      " differs from 2.0 beyond " +
                                                      fmt(tol1)) &&
             ok;
        record("5. 100000-path sampled costs match the solved values at the five standard "
               "points; origin value -0.5 and baseline gaps 0.5 / 2.0 reproduced",
               ok);
    }

    // ---- 6. Synthesized controls satisfy the norm envelope ------------------
    {
        bool ok = true;
        long long total = 0;
        int which = 0;
        for (const EscalationResult* esc : {&affine_esc, &drifted_129_r4}) {
            const HJBProblem& p = which == 0 ? affine : drifted;
            const double slack =
                control_mesh_resolution(p, esc->trace.final_radius, scheme.m_alpha);
            const long long v = control_envelope_violations(esc->control, esc->value,
                                                            p.constants.L_A, slack);
            total += v;
            ok = check(v == 0, std::string("instance ") +
                                   (which == 0 ? "affine" : "drifted") + ": " +
                                   std::to_string(v) + " node(s) break |alpha| <= L_A (1 + "
                                                       "|Du|) + mesh slack") &&
                 ok;
            const double margin =
                control_norm_certificate(esc->control, esc->value, p.constants.L_A);
            ok = check(margin >= -slack,
                       "control margin " + fmt(margin) + " below -" + fmt(slack)) &&
                 ok;
            ++which;
        }
        record("6. every synthesized control obeys the norm envelope (" +
                   std::to_string(total) + " violations over both instances)",
               ok);
    }

    // ---- 7. Matrix inequality suites and worked examples --------------------
    {
        bool ok = true;
        std::ostringstream lemma_log;
        const int code = cmd_lemmas(10000, 20240817, lemma_log);
        ok = check(code == 0, "property suites exited " + std::to_string(code)) && ok;
        ok = check(count_occurrences(lemma_log.str(), "violations 0") == 2,
                   "expected zero violations in both suites; log:\n" + lemma_log.str()) &&
             ok;

        // Hand-computed instances, checked for exact equality.
        {
            const MatrixBoundResult r = trace_product_bound(
                SymmetricMatrix::from_rows(2, {1, 0, 0, 3}),
                SymmetricMatrix::from_rows(2, {-1, 0, 0, -2}), 1.0, 0.0);
            ok = check(r.lhs == -7.0 && r.rhs == -3.0 && r.holds,
                       "diag(1,3) * diag(-1,-2): expected -7 <= -3, got " + fmt(r.lhs) +
                           " vs " + fmt(r.rhs)) &&
                 ok;
        }
        {
            const MatrixBoundResult r = trace_product_bound(
                SymmetricMatrix::scaled_identity(2, 2.0),
                SymmetricMatrix::from_rows(2, {1, 0, 0, -1}), 2.0, 1.0);
            ok = check(r.lhs == 0.0 && r.rhs == 0.0 && r.holds,
                       "2I * diag(1,-1): expected 0 <= 0, got " + fmt(r.lhs) + " vs " +
                           fmt(r.rhs)) &&
                 ok;
        }
        {
            const MatrixBoundResult r = doubling_matrix_bound(
                SymmetricMatrix::scaled_identity(1, 1.0),
                SymmetricMatrix::scaled_identity(1, 0.5),
                SymmetricMatrix::scaled_identity(1, 0.5), 1.0, 1.0);
            ok = check(r.lhs == 0.0 && std::fabs(r.rhs - 5.0 * std::sqrt(2.0)) < 1e-12 &&
                           r.holds,
                       "symmetric 1-d instance: expected 0 <= 5 sqrt(2), got " + fmt(r.lhs) +
                           " vs " + fmt(r.rhs)) &&
                 ok;
        }
        {
            // Outside the generator's envelope the inequality genuinely fails
            // even though the block hypothesis holds; the suite must report
            // that honestly rather than filtering it away.
            const MatrixBoundResult r = doubling_matrix_bound(
                SymmetricMatrix::scaled_identity(1, 1.0),
                SymmetricMatrix::scaled_identity(1, -10.0),
                SymmetricMatrix::scaled_identity(1, -30.0), 1.0, 1.0);
            ok = check(r.lhs == 20.0 && std::fabs(r.rhs + 36.0 * std::sqrt(2.0)) < 1e-12 &&
                           !r.holds,
                       "sign-unbalanced instance: expected 20 > -36 sqrt(2), got " +
                           fmt(r.lhs) + " vs " + fmt(r.rhs)) &&
                 ok;
        }
        record("7. matrix inequality property suites (10000 instances, seed 20240817) "
               "report zero violations; worked examples are exact",
               ok);
    }

    // ---- 8. Ordered terminal data produces ordered values -------------------
    {
        bool ok = true;
        struct Pair {
            HJBProblem lo, hi;
            Grid grid;
        };
        std::vector<Pair> pairs;

        {
            ScalarSpec f2;
            ScalarSpec g1, g2;
            g1.slope = 1.0;
            g2.slope = 1.0;
            g2.offset = 1.0;
            pairs.push_back({quadratic_problem(1, 1.0, 0.0, zero_b2(1), SigmaSpec{}, f2, g1),
                             quadratic_problem(1, 1.0, 0.0, zero_b2(1), SigmaSpec{}, f2, g2),
                             build_grid({0.0}, 4.0, 65, 64, 1.0)});
        }
        {
            AffineMapSpec b2;
            b2.matrix = {0.5};
            b2.offset = {0.0};
            b2.clamp_radius = 6.0;
            ScalarSpec f2;
            f2.mode = ScalarMode::norm;
            f2.slope = 0.3;
            f2.offset = 0.1;
            f2.clamp_radius = 6.0;
            ScalarSpec g1, g2;
            g1.mode = ScalarMode::norm;
            g1.slope = 0.8;
            g1.clamp_radius = 3.0;
            g2.mode = ScalarMode::norm;
            g2.slope = 1.0;
            g2.offset = 0.75;
            g2.clamp_radius = 3.0;
            pairs.push_back({quadratic_problem(1, 1.0, 0.0, b2, SigmaSpec{}, f2, g1),
                             quadratic_problem(1, 1.0, 0.0, b2, SigmaSpec{}, f2, g2),
                             build_grid({0.0}, 4.0, 65, 64, 1.0)});
        }
        {
            ScalarSpec f2;
            ScalarSpec g1, g2;
            g1.slope = 0.5;
            g2.slope = 1.0;
            g2.offset = 2.0;  // 0.5 x <= x + 2 for every |x| <= 2
            pairs.push_back({quadratic_problem(1, 1.0, 0.0, zero_b2(1), SigmaSpec{}, f2, g1),
                             quadratic_problem(1, 1.0, 0.0, zero_b2(1), SigmaSpec{}, f2, g2),
                             build_grid({0.0}, 2.0, 33, 32, 1.0)});
        }

        long long total = 0;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const SolveResult lo = solve(pairs[i].lo, pairs[i].grid, 4.0, scheme);
            const SolveResult hi = solve(pairs[i].hi, pairs[i].grid, 4.0, scheme);
            const double scale =
                std::max({1.0, sup_abs(lo.value.values), sup_abs(hi.value.values)});
            long long violations = 0;
            for (std::size_t k = 0; k < lo.value.values.size(); ++k)
                if (lo.value.values[k] > hi.value.values[k] + 1e-10 * scale) ++violations;
            total += violations;
            ok = check(violations == 0,
                       "pair " + std::to_string(i + 1) + ": " + std::to_string(violations) +
                           " node(s) violate the ordering") &&
                 ok;
        }
        record("8. value ordering preserved on three instance pairs with ordered data (" +
                   std::to_string(total) + " violations)",
               ok);
    }

    // ---- 9. Byte-identical tables on repeated runs ---------------------------
    {
        bool ok = true;
        namespace fs = std::filesystem;
        fs::remove_all("acceptance_tmp");
        fs::create_directories("acceptance_tmp");
        const char* cfg_text =
            "[problem]\n"
            "dimension = 1\n"
            "b2.matrix = 0\n"
            "b2.offset = 0\n"
            "g.slope = 1\n"
            "[grid]\n"
            "R_x = 4\n"
            "n_x = 65\n"
            "n_t = 64\n"
            "[mc]\n"
            "n_paths = 20000\n"
            "seed = 2024\n";
        {
            std::ofstream out("acceptance_tmp/run.ini");
            out << cfg_text;
            ok = check(out.good(), "could not write acceptance_tmp/run.ini") && ok;
        }

        auto run_into = [&](const std::string& command, const std::string& dir) {
            CliOptions opt;
            opt.command = command;
            opt.config_path = "acceptance_tmp/run.ini";
            opt.out_dir = dir;
            std::ostringstream log, err;
            const int code = run_cli(opt, log, err);
            check(code == 0, command + " into " + dir + " exited " + std::to_string(code) +
                                 ": " + err.str());
            return code == 0;
        };
        ok = run_into("solve", "acceptance_tmp/a") && ok;
        ok = run_into("solve", "acceptance_tmp/b") && ok;
        ok = run_into("verify", "acceptance_tmp/va") && ok;
        ok = run_into("verify", "acceptance_tmp/vb") && ok;

        for (const char* name : {"u.csv", "controls.csv", "truncation_trace.csv"})
            ok = check(slurp(std::string("acceptance_tmp/a/") + name) ==
                           slurp(std::string("acceptance_tmp/b/") + name),
                       std::string(name) + " differs between identical solve runs") &&
                 ok;
        for (const char* name : {"u.csv", "verify.csv", "colehopf.csv"})
            ok = check(slurp(std::string("acceptance_tmp/va/") + name) ==
                           slurp(std::string("acceptance_tmp/vb/") + name),
                       std::string(name) + " differs between identical verify runs") &&
                 ok;
        ok = check(strip_output_dir_row(slurp("acceptance_tmp/a/manifest.csv")) ==
                       strip_output_dir_row(slurp("acceptance_tmp/b/manifest.csv")),
                   "manifests differ beyond the output-directory row") &&
             ok;
        record("9. repeated solve and verify runs produce byte-identical CSV tables", ok);
    }

    // ---- Summary -------------------------------------------------------------
    int failed = 0;
    for (const auto& r : results)
        if (!r.second) ++failed;
    std::cout << "\n"
              << (results.size() - failed) << "/" << results.size()
              << " acceptance criteria passed";
    if (failed) std::cout << " (" << g_detail_failures << " detailed check failures above)";
    std::cout << std::endl;
    return failed == 0 ? 0 : 1;
}
