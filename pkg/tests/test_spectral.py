import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from willmore_foliation.spectral import SphereGrid, fejer_weights, legendre_table, sphere_grid


@pytest.fixture(scope="module")
def grid():
    return sphere_grid(12)


def test_fejer_weights_integrate_polynomials_in_cos():
    n = 20
    theta = (np.arange(n) + 0.5) * np.pi / n
    w = fejer_weights(n)
    for k in range(0, n, 2):
        exact = 2.0 / (k + 1)
        assert_allclose(np.sum(w * np.cos(theta) ** k), exact, rtol=1e-13)


def test_unit_sphere_area(grid):
    assert_allclose(grid.integrate(np.ones(grid.theta.shape + grid.phi.shape)), 4 * np.pi, rtol=1e-14)


def test_harmonics_are_orthonormal(grid):
    B = grid.basis()
    gram = np.einsum("itp,jtp,tp->ij", B, B, grid.weights)
    assert_allclose(gram, np.eye(grid.ncoef), atol=1e-13)


def test_analyze_inverts_synth(grid):
    rng = np.random.default_rng(1)
    c = rng.normal(size=grid.ncoef)
    assert_allclose(grid.analyze(grid.synth(c)), c, atol=1e-13)


def test_sphere_laplacian_eigenvalues(grid):
    B = grid.basis()
    d = grid.synth_derivs(np.eye(grid.ncoef), 2)
    s = grid.sin_theta
    cot = np.cos(grid.theta)[:, None] / s
    lap = d[(2, 0)] + cot * d[(1, 0)] + d[(0, 2)] / s**2
    expected = -(grid.l_of * (grid.l_of + 1))[:, None, None] * B
    assert_allclose(lap, expected, atol=1e-10)


def test_derivative_tables_match_finite_differences():
    lmax = 6
    theta = np.linspace(0.3, 2.8, 7)
    h = 1e-5
    t0, t1 = legendre_table(lmax, theta, nderiv=1)
    plus = legendre_table(lmax, theta + h)
    minus = legendre_table(lmax, theta - h)
    assert_allclose(t1, (plus - minus) / (2 * h), atol=1e-8)


def test_third_chart_derivative_of_known_field(grid):
    # x * y * z = sin^2 cos sin(phi) cos(phi) is a degree-3 polynomial
    T, P = np.meshgrid(grid.theta, grid.phi, indexing="ij")
    f = np.sin(T) ** 2 * np.cos(T) * np.sin(P) * np.cos(P)
    d = grid.derivs(f, 3)
    exact_ppp = np.sin(T) ** 2 * np.cos(T) * (-4.0 * np.cos(2 * P))
    assert_allclose(d[(0, 3)], exact_ppp, atol=1e-12)
    exact_t = (2 * np.sin(T) * np.cos(T) ** 2 - np.sin(T) ** 3) * np.sin(P) * np.cos(P)
    assert_allclose(d[(1, 0)], exact_t, atol=1e-12)


def test_coefficient_length_must_be_square(grid):
    with pytest.raises(ValueError, match="square"):
        grid.synth(np.zeros(10))


def test_degree_above_projection_rejected(grid):
    with pytest.raises(ValueError, match="projection degree"):
        grid.analyze(np.zeros(grid.theta.shape + grid.phi.shape), grid.M + 1)


def test_projection_degree_default():
    g = SphereGrid(10)
    assert g.M == (g.theta.size - 1) // 2
    assert g.M > g.L


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=12), st.data())
def test_single_harmonic_round_trip(l, data):
    grid = sphere_grid(12)
    m = data.draw(st.integers(min_value=-l, max_value=l))
    c = np.zeros(grid.ncoef)
    c[l * l + l + m] = 1.0
    assert_allclose(grid.analyze(grid.synth(c)), c, atol=1e-13)
