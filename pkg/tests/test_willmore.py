import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import bumpy_coeffs
from willmore_foliation.metric import ConformalMetric, TensorPerturbedMetric
from willmore_foliation.oracle import lambda_of_r
from willmore_foliation.surface import FLAT, build_graph, geometry, normal_speed
from willmore_foliation.willmore import (
    apply_L,
    apply_W,
    apply_Wlambda,
    assemble_L,
    assemble_Wlambda,
    closure_defect,
    functionals,
    hawking_mass,
    identity_suite,
    linearization_fd_check,
    pohozaev_flux,
    spectrum,
    tangential_shift,
    variation_fd_check,
    willmore_operator,
    willmore_residual,
    wlambda_coercivity,
)

DIRECTION = {0: 1.0, 5: 0.5, 12: -0.3, 20: 0.2}


def direction(grid):
    dc = np.zeros(grid.ncoef)
    for k, v in DIRECTION.items():
        dc[k] = v
    return dc


def W_full_A(geom, alpha):
    """Linearized Willmore operator written with the full second fundamental form."""
    gi = geom.gamma_inv
    H, A = geom.H, geom.A
    da, hess_a, _ = geom.scalar_derivatives(alpha)
    A_up = np.einsum("ik...,jl...,kl...->ij...", gi, gi, A)
    norm_A2 = np.einsum("ij...,ij...->...", A_up, A)

    def L(f):
        _, _, lap = geom.scalar_derivatives(f)
        return -lap - (norm_A2 + geom.ric_nn) * f

    grad_a = np.einsum("ij...,j...->i...", gi, da)
    grad_H = np.einsum("ij...,j...->i...", gi, geom.dH)
    ric_nu = np.einsum("a...,ab...,ib...->i...", geom.nu, geom.ricci, geom.X1)
    T = np.einsum("abcd...,ia...,b...,c...,jd...->ij...", geom.riemann, geom.X1, geom.nu, geom.nu, geom.X1)
    A_mixed = np.einsum("ik...,kj...->ij...", gi, A)
    trA3 = np.einsum("ij...,jk...,ki...->...", A_mixed, A_mixed, A_mixed)
    dot = lambda u, v: np.einsum("i...,i...->...", u, v)  # noqa: E731
    pair = lambda S, Tt: np.einsum("ij...,ij...->...", S, Tt)  # noqa: E731
    La = L(alpha)
    return (
        L(La)
        + 1.5 * H**2 * La
        - H * dot(grad_a, geom.dH)
        + alpha * dot(grad_H, geom.dH)
        + 2.0 * np.einsum("i...,ij...,j...->...", grad_a, A, grad_H)
        + 2.0 * alpha * dot(grad_H, ric_nu)
        + 2.0 * alpha * pair(A_up, geom.hessH)
        + 2.0 * alpha * H * trA3
        + 2.0 * H * pair(A_up, hess_a)
        + 2.0 * alpha * H * pair(A_up, T)
        - alpha * H * geom.nabla_ric_nnn
        + 2.0 * H * dot(grad_a, ric_nu)
    )


@pytest.fixture(scope="module")
def unit_flat():
    return geometry(build_graph([0, 0, 0], 1.0, 12), FLAT)


@pytest.fixture(scope="module")
def centered10(schwarzschild):
    return geometry(build_graph([0, 0, 0], 10.0, 12), schwarzschild)


@pytest.fixture(scope="module")
def bumpy_tensor():
    g = build_graph([0.5, -0.3, 0.2], 10.0, 16)
    return geometry(g.with_coeffs(bumpy_coeffs(g.grid, 10.0)), TensorPerturbedMetric(1.0, 0.3))


def test_flat_sphere_functionals(unit_flat):
    rec = functionals(unit_flat)
    assert_allclose(rec.willmore, 8 * np.pi, rtol=1e-13)
    assert abs(rec.u_energy) <= 1e-20
    assert rec.v_energy == 0.0
    assert abs(rec.hawking) <= 1e-14


def test_schwarzschild_centered_functionals(centered10):
    m, r = 1.0, 10.0
    phi = 1 + m / (2 * r)
    rec = functionals(centered10)
    assert_allclose(rec.willmore, 8 * np.pi * (1 - m / (r * phi)) ** 2, rtol=1e-12)
    assert_allclose(rec.hawking, m, rtol=1e-8)
    assert_allclose(rec.hawking, hawking_mass(rec.area, rec.willmore), rtol=1e-12)


def test_integrated_gauss_identity(bumpy_schwarzschild_geometry, bumpy_tensor):
    for geom in (bumpy_schwarzschild_geometry, bumpy_tensor):
        rec = functionals(geom)
        assert abs(rec.gauss_bonnet_defect) <= 1e-6 * 8 * np.pi
        assert identity_suite(geom)["energy_split"] <= 1e-6


def test_residual_round_flat_sphere():
    geom = geometry(build_graph([0, 0, 0], 2.5, 8), FLAT)
    assert np.max(np.abs(willmore_residual(geom, 0.0))) <= 1e-12
    assert_allclose(willmore_residual(geom, 1.0), -2 / 2.5, rtol=1e-12)


def test_residual_centered_schwarzschild(centered10):
    lam = lambda_of_r(1.0, 10.0)
    F = willmore_residual(centered10, lam)
    assert np.max(np.abs(F)) <= 1e-8 * lam * np.max(centered10.H)


def test_residual_agrees_with_willmore_operator(bumpy_tensor):
    lam = 1e-3
    F = willmore_residual(bumpy_tensor, lam)
    H = bumpy_tensor.H
    G = willmore_operator(bumpy_tensor) - lam * H
    assert_allclose(F, G, atol=1e-12 * np.max(np.abs(G)))


def test_jacobi_operator_on_flat_sphere(unit_flat):
    G = unit_flat.grid
    for l in (0, 1, 2, 5):
        c = np.zeros(G.ncoef)
        c[l * l + l] = 1.0
        f = G.synth(c)
        assert_allclose(apply_L(unit_flat, f), (l * (l + 1) - 2) * f, atol=1e-9)


def test_mean_curvature_evolution(bumpy_tensor):
    geom = bumpy_tensor
    dc = direction(geom.grid)
    du = geom.grid.synth(dc)
    alpha = normal_speed(geom, du)
    X = tangential_shift(geom, du)
    # d/ds H = L alpha up to the transport by the tangential part of the graph variation
    pred = apply_L(geom, alpha) + np.einsum("k...,k...->...", X, geom.dH)
    h = 1e-4
    Hp = geometry(geom.graph.with_coeffs(geom.graph.coeffs + h * dc), geom.provider).H
    Hm = geometry(geom.graph.with_coeffs(geom.graph.coeffs - h * dc), geom.provider).H
    assert np.max(np.abs((Hp - Hm) / (2 * h) - pred)) <= 1e-5 * np.max(np.abs(pred))


def test_W_of_constant_on_flat_sphere():
    for R in (1.0, 3.0):
        geom = geometry(build_graph([0, 0, 0], R, 8), FLAT)
        # LL(1) = 4/R^4 and H^2 L(1) / 2 = -4/R^4 cancel
        assert np.max(np.abs(apply_W(geom, np.ones_like(geom.H)))) <= 1e-10 * 4 * R**-4


def test_W_matches_full_second_fundamental_form(bumpy_tensor, bumpy_schwarzschild_geometry):
    for geom in (bumpy_tensor, bumpy_schwarzschild_geometry):
        alpha = normal_speed(geom, geom.grid.synth(direction(geom.grid)))
        a = apply_W(geom, alpha)
        b = W_full_A(geom, alpha)
        assert np.max(np.abs(a - b)) <= 1e-9 * np.max(np.abs(a))


def test_W_linearization_finite_differences(bumpy_tensor):
    assert linearization_fd_check(bumpy_tensor, direction(bumpy_tensor.grid)) <= 1e-4


def test_Wlambda_is_W_minus_lambda_L(bumpy_tensor):
    alpha = normal_speed(bumpy_tensor, bumpy_tensor.grid.synth(direction(bumpy_tensor.grid)))
    lam = 2e-3
    assert_allclose(
        apply_Wlambda(bumpy_tensor, alpha, lam),
        apply_W(bumpy_tensor, alpha) - lam * apply_L(bumpy_tensor, alpha),
        rtol=1e-12,
        atol=1e-18,
    )


@settings(max_examples=5, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_W_is_symmetric_for_random_speeds(seed):
    rng = np.random.default_rng(seed)
    g = build_graph([0.3, 0.2, -0.1], 8.0, 10)
    c = g.coeffs.copy()
    c[1:16] += rng.uniform(-0.3, 0.3, 15)
    geom = geometry(g.with_coeffs(c), ConformalMetric(1.0, 0.1, ((2, 1, 1.0),)))
    decay = 1.0 / (1.0 + np.arange(g.grid.ncoef))
    a = geom.grid.synth(rng.normal(size=g.grid.ncoef) * decay)
    b = geom.grid.synth(rng.normal(size=g.grid.ncoef) * decay)
    Wa, Wb = apply_W(geom, a), apply_W(geom, b)
    lhs = geom.integrate(b * Wa)
    rhs = geom.integrate(a * Wb)
    norm = lambda f: np.sqrt(geom.integrate(f * f))  # noqa: E731
    scale = max(norm(Wa) * norm(b), norm(Wb) * norm(a))
    assert abs(lhs - rhs) <= 1e-8 * scale


def test_assembled_operators_are_symmetric(bumpy_schwarzschild_geometry):
    asm = assemble_Wlambda(bumpy_schwarzschild_geometry, 1e-3)
    assert asm.asymmetry("L_mat") <= 1e-8
    assert asm.asymmetry("W_mat") <= 1e-8
    assert asm.asymmetry("mass") <= 1e-12
    assert np.all(np.linalg.eigvalsh(0.5 * (asm.mass + asm.mass.T)) > 0)
    assert_allclose(assemble_L(bumpy_schwarzschild_geometry), asm.L_mat, rtol=1e-14, atol=1e-18)


def test_flat_sphere_spectrum(unit_flat):
    mu = spectrum(assemble_Wlambda(unit_flat, 0.0, with_W=False), 16).values
    nu = np.array([l * (l + 1) for l in range(4) for _ in range(2 * l + 1)], dtype=float)
    assert_allclose(mu, nu - 2, atol=1e-10)


def test_schwarzschild_sphere_spectrum(centered10):
    m, r = 1.0, 10.0
    RS = (1 + m / (2 * r)) ** 2 * r
    lam = lambda_of_r(m, r)
    assert_allclose(lam, 2 * m / RS**3, rtol=1e-14)
    mu = spectrum(assemble_Wlambda(centered10, lam, with_W=False), 25).values
    nu = np.array([l * (l + 1) for l in range(5) for _ in range(2 * l + 1)], dtype=float)
    assert np.max(np.abs(mu - ((nu - 2) / RS**2 + 3 * lam))) <= 1e-9 * RS**-2
    clusters = np.split(mu, [1, 4, 9])
    assert [len(c) for c in clusters[:3]] == [1, 3, 5]
    assert all(np.ptp(c) <= 1e-10 * RS**-2 for c in clusters[:3])


def test_coercivity_positive_on_centered_sphere(centered10):
    assert wlambda_coercivity(assemble_Wlambda(centered10, lambda_of_r(1.0, 10.0))) > 0


def test_coercivity_needs_W():
    geom = geometry(build_graph([0, 0, 0], 1.0, 8), FLAT)
    with pytest.raises(ValueError):
        wlambda_coercivity(assemble_Wlambda(geom, 0.0, with_W=False))


def test_area_first_variation(bumpy_schwarzschild_geometry):
    chk = variation_fd_check(bumpy_schwarzschild_geometry, "area", direction(bumpy_schwarzschild_geometry.grid))
    assert chk.rel_error <= 1e-7


@pytest.mark.parametrize("which", ["W", "U", "V"])
def test_energy_first_variations(bumpy_tensor, which):
    chk = variation_fd_check(bumpy_tensor, which, direction(bumpy_tensor.grid))
    assert chk.rel_error <= 1e-5


def test_unknown_functional(bumpy_tensor):
    with pytest.raises(ValueError):
        variation_fd_check(bumpy_tensor, "Q", direction(bumpy_tensor.grid))


def test_pohozaev_flux_centered_sphere(centered10):
    for b in np.eye(3):
        assert abs(pohozaev_flux(centered10, b)) <= 1e-10 * np.max(np.abs(centered10.ricci))


def test_pohozaev_flux_is_linear(bumpy_tensor):
    b1, b2 = np.array([1.0, -0.5, 0.3]), np.array([0.2, 0.7, -1.1])
    total = pohozaev_flux(bumpy_tensor, b1 + b2)
    parts = pohozaev_flux(bumpy_tensor, b1) + pohozaev_flux(bumpy_tensor, b2)
    scale = np.max(np.abs(bumpy_tensor.ricci)) * bumpy_tensor.area * np.linalg.norm(b1 + b2)
    assert abs(total - parts) <= 1e-12 * scale
    assert pohozaev_flux(bumpy_tensor, b1) != 0.0


def test_closure_defect_vanishes_on_centered_sphere(centered10):
    lam = lambda_of_r(1.0, 10.0)
    assert abs(closure_defect(centered10, lam)) <= 1e-10 * lam * centered10.area


def test_identity_suite_exact_schwarzschild(bumpy_schwarzschild_geometry):
    res = identity_suite(bumpy_schwarzschild_geometry)
    assert res["conformal"] <= 1e-12
    assert res["a0_conformal"] <= 1e-8
    assert res["translation"] <= 1e-12
