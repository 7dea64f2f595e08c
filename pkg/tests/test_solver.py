from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from willmore_foliation.metric import ConformalMetric, PerturbationSpec, make_provider
from willmore_foliation.oracle import lambda_of_r, r_of_lambda
from willmore_foliation.solver import (
    DECAY_DIAGNOSTICS,
    LEAF_COLUMNS,
    ContinuationFailure,
    NewtonConfig,
    NewtonFailure,
    centered_sphere,
    coercivity,
    continue_metric,
    decay_sweep,
    foliate,
    lambda_ladder,
    leaf_report,
    perturbed_sphere,
    solve_leaf,
    worker_count,
)
from willmore_foliation.surface import build_graph

L = 12
LAM10 = lambda_of_r(1.0, 10.0)
QUADRUPOLE = PerturbationSpec("conformal-harmonic", 0.05, ((2, 0, 1.0),))


@pytest.fixture(scope="module")
def offset_leaf(schwarzschild):
    return solve_leaf(schwarzschild, LAM10, build_graph([0.05, 0, 0], 10.2, L))


@pytest.fixture(scope="module")
def quadrupole_leaf():
    return solve_leaf(make_provider(QUADRUPOLE, 1.0), LAM10, centered_sphere(1.0, LAM10, L))


def test_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(residual_tol=0.0)
    with pytest.raises(ValueError):
        NewtonConfig(max_iters=0)
    with pytest.raises(ValueError):
        NewtonConfig(damping=-1)
    with pytest.raises(ValueError):
        NewtonConfig(preconditioner="ilu")


def test_exact_sphere_is_a_fixed_point(schwarzschild):
    init = centered_sphere(1.0, LAM10, L)
    leaf = solve_leaf(schwarzschild, LAM10, init)
    assert len(leaf.trace) - 1 <= 2
    assert_allclose(leaf.graph.coeffs, init.coeffs, atol=1e-10 * init.coeffs[0])
    assert leaf.diagnostics["residual_norm"] <= 1e-9


def test_offset_start_returns_to_centered_sphere(offset_leaf):
    d = offset_leaf.diagnostics
    assert np.linalg.norm(d["a_e"]) <= 1e-6
    assert d["tau"] <= 1e-7
    assert_allclose(d["R_e"], 10.0, rtol=1e-9)
    assert d["residual_norm"] <= 1e-9
    assert np.all(offset_leaf.geom.H > 0)


def test_newton_converges_quadratically(offset_leaf):
    trace = offset_leaf.trace
    assert all(b < a for a, b in zip(trace[:-1], trace[1:]))
    assert offset_leaf.diagnostics["newton_tail"] < 1e3


def test_preconditioner_does_not_change_the_leaf(schwarzschild, offset_leaf):
    plain = solve_leaf(schwarzschild, LAM10, build_graph([0.05, 0, 0], 10.2, L), NewtonConfig(preconditioner="none"))
    assert_allclose(plain.graph.coeffs, offset_leaf.graph.coeffs, atol=1e-9)


def test_quadrupole_leaf(quadrupole_leaf):
    d = quadrupole_leaf.diagnostics
    assert d["residual_norm"] <= 1e-9
    assert d["tau"] <= 0.05
    assert abs(d["closure"]) <= 10 * 1e-9 * d["area"] * LAM10


def test_solve_is_deterministic(quadrupole_leaf):
    again = solve_leaf(make_provider(QUADRUPOLE, 1.0), LAM10, centered_sphere(1.0, LAM10, L))
    assert np.array_equal(again.graph.coeffs, quadrupole_leaf.graph.coeffs)
    assert again.trace == quadrupole_leaf.trace


def test_rejects_nonpositive_lambda(schwarzschild):
    with pytest.raises(ValueError):
        solve_leaf(schwarzschild, 0.0, centered_sphere(1.0, LAM10, L))


def test_nonpositive_mean_curvature_start(schwarzschild):
    g = build_graph([0, 0, 0], 10.0, L)
    c = g.coeffs.copy()
    c[2] = -0.35 * c[0]  # concave dimples at both poles
    g = g.with_coeffs(c)
    with pytest.raises(NewtonFailure) as info:
        solve_leaf(schwarzschild, LAM10, g)
    assert info.value.reason == "nonpositive-mean-curvature"


def test_iteration_budget_failure(schwarzschild):
    with pytest.raises(NewtonFailure) as info:
        solve_leaf(schwarzschild, LAM10, build_graph([0.05, 0, 0], 10.2, L), NewtonConfig(max_iters=1))
    assert info.value.reason == "max-iterations"
    assert len(info.value.trace) == 2


def test_singular_jacobian_failure(schwarzschild):
    cfg = NewtonConfig(regularize_floor=1e30)
    with pytest.raises(NewtonFailure) as info:
        solve_leaf(schwarzschild, LAM10, build_graph([0.05, 0, 0], 10.2, L), cfg)
    assert info.value.reason == "singular-jacobian"


def test_leaf_report_columns(offset_leaf):
    row = leaf_report(offset_leaf)
    assert list(row) == list(LEAF_COLUMNS)
    assert_allclose(row["hawking"], 1.0, rtol=1e-8)
    assert row["tau"] <= 1e-7
    assert row["lambda_gap"] <= 1e-12
    assert row["jacobi_ev0"] < 0 < row["jacobi_ev1"]


def test_leaf_report_needs_geometry(offset_leaf):
    with pytest.raises(ValueError):
        leaf_report(replace(offset_leaf, geom=None))


def test_coercivity_scale(offset_leaf):
    RS = offset_leaf.diagnostics["R_S"]
    assert_allclose(coercivity(offset_leaf), 24.0 / RS**6, rtol=1e-3)


def test_centered_sphere_radius():
    g = centered_sphere(1.0, LAM10, L)
    assert_allclose(g.radial(), 10.0, rtol=1e-12)


def test_perturbed_sphere_amplitude():
    g = perturbed_sphere(1.0, LAM10, L, 0.01, np.random.default_rng(0))
    dev = g.radial() - 10.0
    assert_allclose(np.max(np.abs(dev)), 0.1, rtol=1e-12)
    assert np.all(g.coeffs[25:] == 0)
    assert perturbed_sphere(1.0, LAM10, L, 0.0, np.random.default_rng(0)).coeffs[1:].max() == 0


def test_continuation_to_exact_schwarzschild_is_trivial():
    leaf = continue_metric(1.0, PerturbationSpec(), LAM10, 3, L=L)
    assert_allclose(leaf.graph.coeffs, centered_sphere(1.0, LAM10, L).coeffs, atol=1e-10 * leaf.graph.coeffs[0])


def test_continuation_is_path_independent(quadrupole_leaf):
    leaf = continue_metric(1.0, QUADRUPOLE, LAM10, 8, L=L)
    assert np.max(np.abs(leaf.graph.coeffs - quadrupole_leaf.graph.coeffs)) <= 1e-8


def test_continuation_failure_reports_last_parameter():
    spec = PerturbationSpec("conformal-harmonic", 20.0, ((1, 0, 1.0), (2, 1, 1.0)))
    with pytest.raises(ContinuationFailure) as info:
        continue_metric(1.0, spec, LAM10, 2, NewtonConfig(max_iters=4), L=L, min_step=0.25)
    assert info.value.t_last < 1.0
    assert info.value.leaf.diagnostics["residual_norm"] <= 1e-9


def test_continuation_step_count():
    with pytest.raises(ValueError):
        continue_metric(1.0, QUADRUPOLE, LAM10, 0, L=L)


def test_lambda_ladder():
    leaves, path = lambda_ladder(lambda_of_r(1.0, 8.0), lambda_of_r(1.0, 32.0), 9)
    assert len(leaves) == 9
    assert_allclose(leaves[1:] / leaves[:-1], leaves[1] / leaves[0], rtol=1e-12)
    lams = np.array([p[0] for p in path])
    assert np.all(np.diff(lams) < 0)
    assert np.max(lams[:-1] / lams[1:]) <= 1.3 + 1e-12
    assert_allclose([p[0] for p in path if p[1]], leaves, rtol=0)


def test_lambda_ladder_errors():
    with pytest.raises(ValueError):
        lambda_ladder(1e-3, 2e-3, 5)
    with pytest.raises(ValueError):
        lambda_ladder(2e-3, 1e-3, 1)


def test_exact_schwarzschild_foliation(schwarzschild):
    res = foliate(schwarzschild, 1.0, lambda_of_r(1.0, 8.0), lambda_of_r(1.0, 32.0), 9, L=L)
    assert res.complete
    assert len(res.leaves) == 9
    assert res.min_radial_gap > 0
    assert res.monotonicity_violations == 0
    for leaf in res.leaves:
        assert_allclose(leaf.diagnostics["hawking"], 1.0, rtol=1e-7)
        assert_allclose(leaf.graph.radial(), r_of_lambda(1.0, leaf.lam), rtol=1e-10)
    lams = [leaf.lam for leaf in res.leaves]
    assert all(a > b for a, b in zip(lams[:-1], lams[1:]))


def test_foliation_reports_failure_position():
    provider = make_provider(QUADRUPOLE, 1.0)
    res = foliate(provider, 1.0, LAM10, lambda_of_r(1.0, 12.0), 2, NewtonConfig(regularize_floor=1e30), L=L)
    assert not res.complete
    assert res.failure_index == 0
    assert res.leaves == []
    assert "singular-jacobian" in res.failure


def test_small_decay_sweep():
    fits, rows, errors = decay_sweep(QUADRUPOLE, 1.0, [0.025, 0.05], [8.0, 12.0, 16.0], L=L)
    assert not errors
    assert len(rows) == 6
    assert [f["diagnostic"] for f in fits] == list(DECAY_DIAGNOSTICS)
    a0 = next(f for f in fits if f["diagnostic"] == "a0_sup")
    assert a0["slope_r"] <= -2.5
    assert_allclose(a0["slope_eta"], 1.0, atol=0.05)


def test_decay_sweep_needs_samples():
    with pytest.raises(ValueError):
        decay_sweep(QUADRUPOLE, 1.0, [], [10.0])


def test_worker_count(monkeypatch):
    monkeypatch.delenv("WILLMORE_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("WILLMORE_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("WILLMORE_THREADS", "0")
    assert worker_count() == 1
    monkeypatch.setenv("WILLMORE_THREADS", "many")
    with pytest.raises(ValueError):
        worker_count()


def test_metric_is_used_as_given():
    # an exact Schwarzschild provider with a different mass has a different leaf radius
    leaf = solve_leaf(ConformalMetric(2.0), lambda_of_r(2.0, 20.0), centered_sphere(2.0, lambda_of_r(2.0, 20.0), L))
    assert_allclose(leaf.diagnostics["R_e"], 20.0, rtol=1e-10)
