#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "hjblab/problem.hpp"

using hjb::AffineMapSpec;
using hjb::HJBProblem;
using hjb::RegularityConstants;
using hjb::ScalarMode;
using hjb::ScalarSpec;
using hjb::SigmaMode;
using hjb::SigmaSpec;

namespace {

AffineMapSpec zero_b2(int d) {
    AffineMapSpec s;
    s.matrix.assign(static_cast<std::size_t>(d) * d, 0.0);
    s.offset.assign(d, 0.0);
    return s;
}

/// d = 1 drift-control instance with linear terminal data; its exact solution
/// is u(t, x) = x + (t - T) / 2 with feedback alpha = -1.
HJBProblem linear_terminal_problem() {
    ScalarSpec g;
    g.mode = ScalarMode::affine;
    g.slope = 1.0;
    return hjb::quadratic_problem(1, 1.0, 0.0, zero_b2(1), SigmaSpec{}, ScalarSpec{}, g);
}

}  // namespace

TEST_CASE("scalar coefficient family evaluates each mode with clamping") {
    const double x2[2] = {3.0, -4.0};
    ScalarSpec s;
    s.slope = 2.0;
    s.offset = 1.0;

    s.mode = ScalarMode::affine;
    CHECK(hjb::scalar_spec_eval(s, x2, 2) == doctest::Approx(7.0));  // 2*3 + 1
    s.clamp_radius = 2.5;
    CHECK(hjb::scalar_spec_eval(s, x2, 2) == doctest::Approx(6.0));  // 2*2.5 + 1
    const double neg[2] = {-3.0, 0.0};
    CHECK(hjb::scalar_spec_eval(s, neg, 2) == doctest::Approx(-4.0));  // 2*(-2.5) + 1

    s.mode = ScalarMode::norm;
    s.clamp_radius = 4.0;
    CHECK(hjb::scalar_spec_eval(s, x2, 2) == doctest::Approx(9.0));  // |x| = 5 clamped to 4

    s.mode = ScalarMode::abs_first;
    s.clamp_radius = 2.0;
    CHECK(hjb::scalar_spec_eval(s, x2, 2) == doctest::Approx(5.0));  // |x_1| = 3 clamped to 2

    CHECK(hjb::scalar_spec_lipschitz(s) == 2.0);
}

TEST_CASE("quadratic family wires the documented coefficient structure") {
    SigmaSpec sig;
    sig.scale = 1.5;
    AffineMapSpec b2 = zero_b2(2);
    b2.matrix = {0.5, 0.0, 0.0, 0.5};
    ScalarSpec f2;
    f2.mode = ScalarMode::norm;
    f2.slope = 0.3;
    f2.offset = 0.1;
    f2.clamp_radius = 6.0;
    ScalarSpec g;
    g.slope = 1.0;
    const HJBProblem p = hjb::quadratic_problem(2, 1.0, 0.0, b2, sig, f2, g);

    CHECK(p.quadratic);
    CHECK_FALSE(p.control_set.bounded);
    const double x[2] = {1.0, 2.0};
    const double a[2] = {3.0, -1.0};

    double out[2];
    p.b1(0.2, x, a, out);  // sigma' a = scale * a for isotropic sigma
    CHECK(out[0] == doctest::Approx(4.5));
    CHECK(out[1] == doctest::Approx(-1.5));

    p.b2(0.2, x, out);
    CHECK(out[0] == doctest::Approx(0.5));
    CHECK(out[1] == doctest::Approx(1.0));

    CHECK(p.f1(0.2, x, a) == doctest::Approx(5.0));  // |a|^2 / 2
    CHECK(p.f2(0.2, x) == doctest::Approx(0.3 * std::sqrt(5.0) + 0.1));
    CHECK(p.g(x) == doctest::Approx(1.0));  // affine mode reads x_1

    double ssq[4];
    hjb::sigma_sigma_t(p, 0.2, x, ssq);
    CHECK(ssq[0] == doctest::Approx(2.25));
    CHECK(ssq[1] == doctest::Approx(0.0));
    CHECK(ssq[3] == doctest::Approx(2.25));

    // Derived constants.
    CHECK(p.constants.eta_sigma == doctest::Approx(2.25));
    CHECK(p.constants.L_A == doctest::Approx(1.5));
    CHECK(p.constants.L_g == doctest::Approx(1.0));
    CHECK(p.constants.c_f1 == doctest::Approx(0.5));
    CHECK(p.constants.C_f1 == doctest::Approx(0.5));
    CHECK(p.constants.L_f2(0.5) == doctest::Approx(0.3));
    CHECK(p.constants.L_f2_integral == doctest::Approx(0.3));
    CHECK(p.constants.L_b >= 1.5);  // at least the diffusion bound
}

TEST_CASE("drift clamp saturates b2 outside its ball") {
    AffineMapSpec b2 = zero_b2(1);
    b2.matrix = {0.5};
    b2.clamp_radius = 6.0;
    const HJBProblem p =
        hjb::quadratic_problem(1, 1.0, 0.0, b2, SigmaSpec{}, ScalarSpec{}, ScalarSpec{});
    double out = 0.0;
    const double inside = 4.0, outside = 40.0, neg = -40.0;
    p.b2(0.0, &inside, &out);
    CHECK(out == doctest::Approx(2.0));
    p.b2(0.0, &outside, &out);
    CHECK(out == doctest::Approx(3.0));  // 0.5 * clamp(40 -> 6)
    p.b2(0.0, &neg, &out);
    CHECK(out == doctest::Approx(-3.0));
}

TEST_CASE("problem factory rejects ill-posed parameters") {
    CHECK_THROWS_AS(hjb::quadratic_problem(0, 1.0, 0.0, zero_b2(1), SigmaSpec{}, ScalarSpec{},
                                           ScalarSpec{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(hjb::quadratic_problem(1, 0.0, 0.0, zero_b2(1), SigmaSpec{}, ScalarSpec{},
                                           ScalarSpec{}),
                    std::invalid_argument);
    SigmaSpec flat;
    flat.scale = 0.0;
    CHECK_THROWS_AS(
        hjb::quadratic_problem(1, 1.0, 0.0, zero_b2(1), flat, ScalarSpec{}, ScalarSpec{}),
        std::invalid_argument);
    SigmaSpec growing;
    growing.mode = SigmaMode::sqrt_growth;  // no finite clamp radius
    CHECK_THROWS_AS(
        hjb::quadratic_problem(1, 1.0, 0.0, zero_b2(1), growing, ScalarSpec{}, ScalarSpec{}),
        std::invalid_argument);
    CHECK_THROWS_AS(hjb::quadratic_problem(2, 1.0, 0.0, zero_b2(1), SigmaSpec{}, ScalarSpec{},
                                           ScalarSpec{}),
                    std::invalid_argument);  // b2 sized for d = 1, problem is d = 2
}

TEST_CASE("constants checker requires a consistent source-slope integral") {
    RegularityConstants k = linear_terminal_problem().constants;
    CHECK_NOTHROW(hjb::check_constants(k, 1.0));
    k.L_f2_integral = 0.5;  // integral of the zero function is not 0.5
    CHECK_THROWS_AS(hjb::check_constants(k, 1.0), std::invalid_argument);
    k.L_f2_integral = 0.0;
    k.eta_sigma = 0.0;
    CHECK_THROWS_AS(hjb::check_constants(k, 1.0), std::invalid_argument);
    k.eta_sigma = 1.0;
    k.c_f1 = 0.9;
    k.C_f1 = 0.5;
    CHECK_THROWS_AS(hjb::check_constants(k, 1.0), std::invalid_argument);
}

TEST_CASE("sampling audit accepts honestly declared constants") {
    SigmaSpec sig;
    sig.mode = SigmaMode::sqrt_growth;
    sig.clamp_radius = 9.0;
    AffineMapSpec b2 = zero_b2(1);
    b2.matrix = {0.4};
    b2.clamp_radius = 5.0;
    ScalarSpec f2;
    f2.mode = ScalarMode::abs_first;
    f2.slope = 0.3;
    f2.offset = 0.1;
    ScalarSpec g;
    g.slope = 1.0;
    const HJBProblem p = hjb::quadratic_problem(1, 1.0, 0.0, b2, sig, f2, g);
    const hjb::AssumptionReport rep = hjb::validate_assumptions(p, 400, 4.0, 99);
    CHECK(rep.all_pass);
    CHECK(rep.hard_failure.empty());
    CHECK(rep.checks.size() >= 12);
}

TEST_CASE("sampling audit flags an understated terminal Lipschitz constant") {
    HJBProblem p = linear_terminal_problem();
    p.constants.L_g = 0.4;  // the true slope is 1
    const hjb::AssumptionReport rep = hjb::validate_assumptions(p, 200, 4.0, 99);
    CHECK_FALSE(rep.all_pass);
    bool saw_g_failure = false;
    for (const hjb::AssumptionCheck& c : rep.checks) {
        if (c.name == "g_lipschitz") {
            saw_g_failure = true;
            CHECK_FALSE(c.pass);
            CHECK(c.estimated == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    CHECK(saw_g_failure);
}

TEST_CASE("sampling audit reports a nonfinite coefficient as a hard failure") {
    HJBProblem p = linear_terminal_problem();
    p.f2 = [](double, const double*) { return std::nan(""); };
    const hjb::AssumptionReport rep = hjb::validate_assumptions(p, 50, 2.0, 7);
    CHECK_FALSE(rep.all_pass);
    CHECK(rep.hard_failure.find("f2") != std::string::npos);
}

TEST_CASE("control truncation target grows affinely in the gradient bound") {
    RegularityConstants k = linear_terminal_problem().constants;
    CHECK(k.L_A == doctest::Approx(1.0));
    CHECK(hjb::control_bound_radius(k, 1.0) == doctest::Approx(2.0));
    CHECK(hjb::control_bound_radius(k, 0.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(hjb::control_bound_radius(k, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(hjb::control_bound_radius(k, std::nan("")), std::invalid_argument);
}
