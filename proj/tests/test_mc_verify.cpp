#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "hjblab/errors.hpp"
#include "hjblab/grid.hpp"
#include "hjblab/mc_verify.hpp"
#include "hjblab/pde_solver.hpp"
#include "hjblab/problem.hpp"

using hjb::AffineMapSpec;
using hjb::CostEstimate;
using hjb::Grid;
using hjb::HJBProblem;
using hjb::ScalarSpec;
using hjb::SchemeConfig;
using hjb::SigmaSpec;
using hjb::SimulationConfig;

namespace {

AffineMapSpec zero_b2(int d) {
    AffineMapSpec s;
    s.matrix.assign(static_cast<std::size_t>(d) * d, 0.0);
    s.offset.assign(d, 0.0);
    return s;
}

/// d = 1, zero discount, unit diffusion, b2 = 0, f2 = 0.3 x, g = x.  Under the
/// constant control a = -1 the exact cost from (0, 0) is
///   1/2 + 0.3 int_0^1 (-s) ds - 1 = -0.65,
/// and the left-endpoint Euler sum overshoots it by exactly 0.15 dt.
HJBProblem linear_cost_problem() {
    ScalarSpec f2;
    f2.slope = 0.3;
    ScalarSpec g;
    g.slope = 1.0;
    return hjb::quadratic_problem(1, 1.0, 0.0, zero_b2(1), SigmaSpec{}, f2, g);
}

}  // namespace

TEST_CASE("a costless problem simulates to an exactly zero estimate") {
    const HJBProblem p =
        hjb::quadratic_problem(1, 1.0, 0.0, zero_b2(1), SigmaSpec{}, ScalarSpec{}, ScalarSpec{});
    SimulationConfig cfg;
    cfg.n_paths = 64;
    cfg.dt_sim = 0.25;
    const CostEstimate est = hjb::simulate_cost(p, std::vector<double>{0.0}, 0.0, {0.4}, cfg);
    CHECK(est.mean == 0.0);
    CHECK(est.std_error == 0.0);
    CHECK(est.n_paths == 64);
    CHECK(est.exit_fraction == 0.0);
}

TEST_CASE("antithetic pairing cancels every linear-in-noise term") {
    // Every term of the cost is affine in the Gaussian increments, so each
    // pair average equals the exact discrete-time expectation and the
    // statistical error collapses to roundoff.
    const HJBProblem p = linear_cost_problem();
    SimulationConfig cfg;
    cfg.antithetic = true;
    cfg.n_paths = 64;

    cfg.dt_sim = 0.2;  // 5 steps: expectation -0.65 + 0.15 * 0.2 = -0.62
    CostEstimate est = hjb::simulate_cost(p, std::vector<double>{-1.0}, 0.0, {0.0}, cfg);
    CHECK(est.mean == doctest::Approx(-0.62).epsilon(1e-12));
    CHECK(est.std_error < 1e-10);

    cfg.dt_sim = 0.05;  // 20 steps: expectation -0.65 + 0.15 * 0.05 = -0.6425
    est = hjb::simulate_cost(p, std::vector<double>{-1.0}, 0.0, {0.0}, cfg);
    CHECK(est.mean == doctest::Approx(-0.6425).epsilon(1e-12));
    CHECK(est.std_error < 1e-10);
}

TEST_CASE("plain sampling shows the documented first-order time bias") {
    const HJBProblem p = linear_cost_problem();
    SimulationConfig cfg;
    cfg.n_paths = 20000;
    cfg.seed = 2024;

    cfg.dt_sim = 0.2;
    const CostEstimate coarse = hjb::simulate_cost(p, std::vector<double>{-1.0}, 0.0, {0.0}, cfg);
    cfg.dt_sim = 0.05;
    const CostEstimate fine = hjb::simulate_cost(p, std::vector<double>{-1.0}, 0.0, {0.0}, cfg);

    CHECK(coarse.std_error > 0.0);
    CHECK(coarse.std_error < 0.05);
    CHECK(std::fabs(coarse.mean - (-0.62)) <= 5.0 * coarse.std_error);
    CHECK(std::fabs(fine.mean - (-0.6425)) <= 5.0 * fine.std_error);
}

TEST_CASE("the running cost is discounted from the start time, the terminal is not") {
    // f2 = 1 and g = 0 make the cost deterministic: sum_k e^{c t_k} dt.
    ScalarSpec f2;
    f2.offset = 1.0;
    const HJBProblem p =
        hjb::quadratic_problem(1, 1.0, 0.1, zero_b2(1), SigmaSpec{}, f2, ScalarSpec{});
    SimulationConfig cfg;
    cfg.n_paths = 8;
    cfg.dt_sim = 0.25;
    const CostEstimate est = hjb::simulate_cost(p, std::vector<double>{0.0}, 0.0, {0.0}, cfg);
    double expected = 0.0;
    for (int k = 0; k < 4; ++k) expected += std::exp(0.1 * (0.25 * k)) * 0.25;
    CHECK(est.mean == doctest::Approx(expected).epsilon(1e-14));
    CHECK(est.std_error == 0.0);
}

TEST_CASE("estimates are reproducible in the seed and respond to it") {
    const HJBProblem p = linear_cost_problem();
    SimulationConfig cfg;
    cfg.n_paths = 2000;
    cfg.dt_sim = 0.1;
    cfg.seed = 7;
    const CostEstimate a = hjb::simulate_cost(p, std::vector<double>{-1.0}, 0.0, {0.0}, cfg);
    const CostEstimate b = hjb::simulate_cost(p, std::vector<double>{-1.0}, 0.0, {0.0}, cfg);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    cfg.seed = 8;
    const CostEstimate c = hjb::simulate_cost(p, std::vector<double>{-1.0}, 0.0, {0.0}, cfg);
    CHECK(a.mean != c.mean);
}

TEST_CASE("feedback simulation counts box exits without aborting") {
    const HJBProblem p =
        hjb::quadratic_problem(1, 1.0, 0.0, zero_b2(1), SigmaSpec{}, ScalarSpec{}, ScalarSpec{});
    const Grid g = hjb::build_grid({0.0}, 1.0, 9, 16, 1.0);
    hjb::ControlField field(g);  // the zero policy on a narrow box
    SimulationConfig cfg;
    cfg.n_paths = 500;
    cfg.dt_sim = g.dt();
    const CostEstimate est = hjb::simulate_cost(p, field, 0.0, {0.0}, cfg);
    CHECK(est.exit_fraction > 0.3);  // unit diffusion leaves |x| <= 1 often
    CHECK(est.exit_fraction <= 1.0);
    CHECK(std::isfinite(est.mean));
}

TEST_CASE("simulation validates its configuration and inputs") {
    const HJBProblem p = linear_cost_problem();
    SimulationConfig cfg;
    cfg.n_paths = 3;
    cfg.antithetic = true;  // odd pairing
    CHECK_THROWS_AS(hjb::simulate_cost(p, std::vector<double>{0.0}, 0.0, {0.0}, cfg),
                    std::invalid_argument);
    cfg = SimulationConfig{};
    cfg.dt_sim = -0.1;
    CHECK_THROWS_AS(hjb::simulate_cost(p, std::vector<double>{0.0}, 0.0, {0.0}, cfg),
                    std::invalid_argument);
    cfg = SimulationConfig{};
    CHECK_THROWS_AS(hjb::simulate_cost(p, std::vector<double>{0.0, 1.0}, 0.0, {0.0}, cfg),
                    std::invalid_argument);  // control dimension
    CHECK_THROWS_AS(hjb::simulate_cost(p, std::vector<double>{0.0}, 2.0, {0.0}, cfg),
                    std::invalid_argument);  // t0 past the horizon
    const Grid g = hjb::build_grid({0.0}, 1.0, 5, 4, 1.0);
    hjb::ControlField field(g);
    CHECK_THROWS_AS(hjb::simulate_cost(p, field, 0.0, {3.0}, cfg),
                    std::invalid_argument);  // start outside the policy box
    cfg.dt_sim = 1.0;                        // coarser than the grid step
    CHECK_THROWS_AS(hjb::simulate_cost(p, field, 0.0, {0.0}, cfg), std::invalid_argument);
}

TEST_CASE("a nonfinite drift is reported with the path and step") {
    HJBProblem p = linear_cost_problem();
    p.b2 = [](double, const double*, double* out) { out[0] = std::nan(""); };
    SimulationConfig cfg;
    cfg.n_paths = 4;
    cfg.dt_sim = 0.5;
    try {
        hjb::simulate_cost(p, std::vector<double>{0.0}, 0.0, {0.0}, cfg);
        FAIL("expected a solver error");
    } catch (const hjb::SolverError& e) {
        CHECK(std::string(e.what()).find("path 0") != std::string::npos);
        CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    }
}

TEST_CASE("value verification accepts the solved drift-control instance") {
    ScalarSpec g_spec;
    g_spec.slope = 1.0;
    const HJBProblem p =
        hjb::quadratic_problem(1, 1.0, 0.0, zero_b2(1), SigmaSpec{}, ScalarSpec{}, g_spec);
    const Grid grid = hjb::build_grid({0.0}, 4.0, 33, 32, 1.0);
    const hjb::SolveResult sr = hjb::solve(p, grid, 2.0, SchemeConfig{});

    SimulationConfig cfg;
    cfg.n_paths = 4000;
    cfg.dt_sim = grid.dt();
    cfg.allowance = 2.0 * (grid.h() + grid.dt());
    cfg.baselines = {{0.0}, {1.0}};
    const std::vector<hjb::VerifyPoint> points = {{0.0, {0.0}}, {0.0, {1.0}}, {0.5, {-1.0}}};
    const hjb::VerificationReport rep = hjb::verify_value(p, sr.value, sr.control, points, cfg);
    CHECK(rep.all_pass);
    REQUIRE(rep.points.size() == 3);

    // u(0, 0) = -1/2; the zero-control baseline costs 0 and the unit-control
    // baseline costs 3/2 from the origin, so both lose to the feedback.
    const hjb::PointCheck& origin = rep.points[0];
    CHECK(origin.u_pde == doctest::Approx(-0.5).epsilon(1e-6));
    CHECK(std::fabs(origin.v_mc - (-0.5)) <= 3.0 * origin.std_error + cfg.allowance);
    REQUIRE(origin.baselines.size() == 2);
    CHECK(std::fabs(origin.baselines[0].mean - 0.0) < 0.1);
    CHECK(std::fabs(origin.baselines[1].mean - 1.5) < 0.1);
    CHECK(origin.baselines[0].pass);
    CHECK(origin.baselines[1].pass);
}

TEST_CASE("verification CSV has one row per point with a verdict column") {
    hjb::VerificationReport rep;
    hjb::PointCheck pc;
    pc.t = 0.0;
    pc.x = {0.5};
    pc.u_pde = 1.0;
    pc.v_mc = 1.01;
    pc.std_error = 0.02;
    pc.value_match = true;
    pc.pass = true;
    rep.points.push_back(pc);
    pc.x = {-0.5};
    pc.pass = false;
    rep.points.push_back(pc);
    rep.all_pass = false;
    const std::string path = "test_verify.csv";
    hjb::write_verification_csv(rep, path);
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "t,x_1,u_pde,v_mc,stderr,verdict");
    REQUIRE(std::getline(in, line));
    CHECK(line.find("pass") != std::string::npos);
    REQUIRE(std::getline(in, line));
    CHECK(line.find("fail") != std::string::npos);
    in.close();
    std::remove(path.c_str());
}
