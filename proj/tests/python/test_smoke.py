"""End-to-end smoke checks for the Python bindings."""

import math

import pytest

import hjblab as hl


def affine_instance():
    """1-d instance whose solution is exactly u(t, x) = x + (t - 1) / 2."""
    return hl.quadratic_problem(
        dimension=1, horizon=1.0, b2_matrix=[0.0], b2_offset=[0.0], g_slope=1.0
    )


def test_solver_reproduces_the_affine_solution():
    p = affine_instance()
    grid = hl.build_grid([0.0], 2.0, 17, 16, 1.0)
    res = hl.solve_with_truncation_escalation(p, grid, 0.5, 1e-6)
    assert res.trace.converged
    assert res.trace.final_radius == 2.0
    assert abs(hl.interpolate(res.value, 0.0, [0.0]) + 0.5) < 1e-12
    assert abs(hl.interpolate(res.value, 0.25, [1.5]) - (1.5 - 0.375)) < 1e-12
    assert abs(hl.sup_gradient(res.value) - 1.0) < 1e-12
    assert hl.control_norm_certificate(res.control, res.value, 1.0) >= 0.0


def test_matrix_bounds_expose_both_sides():
    lhs, rhs, holds = hl.trace_product_bound(2, [1, 0, 0, 3], [-1, 0, 0, -2], 1.0, 0.0)
    assert (lhs, rhs, holds) == (-7.0, -3.0, True)

    lhs, rhs, holds = hl.doubling_matrix_bound(1, [1.0], [0.5], [0.5], 1.0, 1.0)
    assert lhs == 0.0
    assert abs(rhs - 5.0 * math.sqrt(2.0)) < 1e-12
    assert holds


def test_constant_policy_with_zero_costs_is_exactly_free():
    p = hl.quadratic_problem(dimension=1, horizon=1.0, b2_matrix=[0.0], b2_offset=[0.0])
    cfg = hl.SimulationConfig()
    cfg.n_paths = 2000
    cfg.seed = 3
    est = hl.simulate_cost_constant(p, [0.0], 0.0, [0.0], cfg)
    assert est.mean == 0.0
    assert est.std_error == 0.0
    assert est.n_paths == 2000


def test_invalid_arguments_raise_value_error():
    with pytest.raises(ValueError):
        hl.quadratic_problem(dimension=1, horizon=1.0, sigma_mode="bogus")


def test_exhausted_escalation_raises_solver_error():
    p = affine_instance()
    grid = hl.build_grid([0.0], 2.0, 17, 16, 1.0)
    cfg = hl.SchemeConfig()
    cfg.max_doublings = 0
    with pytest.raises(hl.SolverError):
        hl.solve_with_truncation_escalation(p, grid, 0.001, 1e-6, cfg)


def test_batch_run_round_trip(tmp_path):
    config = tmp_path / "run.ini"
    config.write_text(
        "[problem]\n"
        "dimension = 1\n"
        "b2.matrix = 0\n"
        "b2.offset = 0\n"
        "g.slope = 1\n"
        "[grid]\n"
        "R_x = 2\n"
        "n_x = 17\n"
        "n_t = 16\n"
        "[mc]\n"
        "n_paths = 2000\n"
    )
    out_dir = tmp_path / "out"
    code, err = hl.run("solve", config_path=str(config), out_dir=str(out_dir))
    assert code == 0, err
    for name in ("u.csv", "controls.csv", "truncation_trace.csv", "manifest.csv"):
        assert (out_dir / name).exists()

    code, err = hl.run(
        "certify", config_path=str(config), out_dir=str(tmp_path / "cert"),
        u_csv=str(out_dir / "u.csv"),
    )
    assert code == 0, err

    code, err = hl.run("lemmas", lemma_instances=120)
    assert code == 0, err
