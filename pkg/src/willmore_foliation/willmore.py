"""Willmore-type functionals, the residual of the area-constrained equation and its linearization.

The equation solved on a closed surface is

    F = -Delta H - H |A°|^2 - Ric(nu, nu) H - lambda H = 0,

which equals ``L H + H^3 / 2 - lambda H`` with the Jacobi operator
``L f = -Delta f - f (|A|^2 + Ric(nu, nu))``.  Along a normal variation with
speed ``alpha`` the residual changes by ``W alpha - lambda L alpha``.

Operators act on fields sampled at the grid nodes; batch axes come first.
Matrices use real spherical harmonics of degree ``<= L`` evaluated through the
graph parametrization as basis functions and the ``L^2(dmu)`` pairing.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .surface import FLAT, RadialGraph, SurfaceGeometry, geometry, identity_residuals, normal_speed

__all__ = [
    "FunctionalRecord",
    "OperatorAssembly",
    "SpectrumResult",
    "VariationCheck",
    "functionals",
    "hawking_mass",
    "willmore_residual",
    "willmore_operator",
    "apply_L",
    "assemble_L",
    "apply_W",
    "apply_Wlambda",
    "assemble_Wlambda",
    "spectrum",
    "wlambda_coercivity",
    "tangential_shift",
    "variation_fd_check",
    "linearization_fd_check",
    "hawking_variation_check",
    "pohozaev_flux",
    "closure_defect",
    "identity_suite",
]

EULER_CHARACTERISTIC = 2


@dataclass(frozen=True)
class FunctionalRecord:
    """Global functionals of a closed surface.

    Attributes
    ----------
    willmore : float
        ``W = 1/2 int H^2``.
    u_energy : float
        ``U = int |A°|^2``.
    v_energy : float
        ``V = 2 int G(nu, nu)`` with the Einstein tensor ``G``.
    area : float
    hawking : float
        ``|Sigma|^{1/2} (16 pi)^{-3/2} (16 pi - 2 W)``.
    """

    willmore: float
    u_energy: float
    v_energy: float
    area: float
    hawking: float

    @property
    def gauss_bonnet_defect(self) -> float:
        """``W - U - V - 4 pi chi``; zero for every closed surface."""
        return self.willmore - self.u_energy - self.v_energy - 4.0 * np.pi * EULER_CHARACTERISTIC

    def to_dict(self) -> dict:
        return asdict(self)


def hawking_mass(area: float, willmore: float) -> float:
    """Hawking mass from area and Willmore energy."""
    return float(np.sqrt(area) * (16.0 * np.pi) ** -1.5 * (16.0 * np.pi - 2.0 * willmore))


def functionals(geom: SurfaceGeometry) -> FunctionalRecord:
    """Quadrature of ``W``, ``U``, ``V``, the area and the Hawking mass."""
    W = 0.5 * float(geom.integrate(geom.H**2))
    U = float(geom.integrate(geom.norm_A02))
    V = 2.0 * float(geom.integrate(geom.G_nn))
    area = geom.area
    return FunctionalRecord(W, U, V, area, hawking_mass(area, W))


def willmore_operator(geom: SurfaceGeometry) -> np.ndarray:
    """``L H + H^3 / 2``, the first variation density of ``W``."""
    return -geom.lapH - geom.H * (geom.norm_A2 + geom.ric_nn) + 0.5 * geom.H**3


def willmore_residual(geom: SurfaceGeometry, lam: float) -> np.ndarray:
    """``-Delta H - H |A°|^2 - Ric(nu, nu) H - lambda H`` at the nodes."""
    H = geom.H
    return -geom.lapH - H * geom.norm_A02 - geom.ric_nn * H - lam * H


# -- linear operators ------------------------------------------------------------
def _jacobi_potential(geom: SurfaceGeometry) -> np.ndarray:
    return geom.norm_A2 + geom.ric_nn


def apply_L(geom: SurfaceGeometry, alpha) -> np.ndarray:
    """Jacobi operator ``-Delta alpha - (|A|^2 + Ric(nu, nu)) alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    return -geom.laplacian(alpha) - _jacobi_potential(geom) * alpha


def _W_terms(geom: SurfaceGeometry, alpha, dalpha, hess_alpha, lap_alpha) -> np.ndarray:
    gi = geom.gamma_inv
    H, A0 = geom.H, geom.A0
    L_alpha = -lap_alpha - _jacobi_potential(geom) * alpha
    LL_alpha = apply_L(geom, L_alpha)
    grad_alpha = np.einsum("ij...,j...->i...", gi, dalpha)
    grad_H = np.einsum("ij...,j...->i...", gi, geom.dH)
    A0_up = np.einsum("ik...,jl...,kl...->ij...", gi, gi, A0)
    zeroth = (
        np.einsum("i...,i...->...", grad_H, geom.dH)
        + 2.0 * np.einsum("i...,i...->...", grad_H, geom.omega)
        + H * geom.lapH
        + 2.0 * np.einsum("ij...,ij...->...", A0_up, geom.hessH)
        + 2.0 * H**2 * geom.norm_A02
        + 2.0 * H * np.einsum("ij...,ij...->...", A0_up, geom.T)
        - H * geom.nabla_ric_nnn
    )
    return (
        LL_alpha
        + 0.5 * H**2 * L_alpha
        + 2.0 * H * np.einsum("ij...,ij...->...", A0_up, hess_alpha)
        + 2.0 * H * np.einsum("i...,i...->...", grad_alpha, geom.omega)
        + 2.0 * np.einsum("i...,ij...,j...->...", grad_alpha, A0, grad_H)
        + alpha * zeroth
    )


def apply_W(geom: SurfaceGeometry, alpha) -> np.ndarray:
    """Linearization of ``L H + H^3 / 2`` along the normal speed ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    dalpha, hess, lap = geom.scalar_derivatives(alpha)
    return _W_terms(geom, alpha, dalpha, hess, lap)


def apply_Wlambda(geom: SurfaceGeometry, alpha, lam: float) -> np.ndarray:
    """``W alpha - lambda L alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    dalpha, hess, lap = geom.scalar_derivatives(alpha)
    L_alpha = -lap - _jacobi_potential(geom) * alpha
    return _W_terms(geom, alpha, dalpha, hess, lap) - lam * L_alpha


@dataclass(frozen=True, eq=False)
class OperatorAssembly:
    """Dense Galerkin matrices in the harmonic basis.

    Attributes
    ----------
    basis : ndarray, shape (n, ntheta, nphi)
        Harmonics ``Y_j`` sampled at the nodes, used as normal speeds.
    mass : ndarray, shape (n, n)
        ``int Y_i Y_j dmu``.
    L_mat, W_mat, Wlam_mat : ndarray, shape (n, n)
        ``int Y_i (Op Y_j) dmu``; ``Wlam_mat = W_mat - lambda L_mat``.
    lam : float
    """

    basis: np.ndarray
    mass: np.ndarray
    L_mat: np.ndarray
    W_mat: np.ndarray | None
    Wlam_mat: np.ndarray | None
    lam: float

    def asymmetry(self, name: str = "L_mat") -> float:
        """``|M - M^T| / |M|`` in the max norm."""
        M = getattr(self, name)
        return float(np.max(np.abs(M - M.T)) / np.max(np.abs(M)))


def _gram(geom: SurfaceGeometry, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    return (a.reshape(n, -1) * geom.dmu.ravel()) @ b.reshape(b.shape[0], -1).T


def _basis_data(geom: SurfaceGeometry):
    G = geom.grid
    eye = np.eye(G.ncoef)
    d = G.synth_derivs(eye, 2)
    basis = d[(0, 0)]
    dY, hess, lap = geom._calculus(d)
    return basis, dY, hess, lap


def assemble_L(geom: SurfaceGeometry) -> np.ndarray:
    """Matrix ``int Y_i L Y_j dmu`` of the Jacobi operator."""
    basis, _, _, lap = _basis_data(geom)
    LY = -lap - _jacobi_potential(geom) * basis
    return _gram(geom, basis, LY)


def assemble_Wlambda(geom: SurfaceGeometry, lam: float, with_W: bool = True) -> OperatorAssembly:
    """Mass, Jacobi and linearized Willmore matrices at multiplier ``lam``."""
    basis, dY, hess, lap = _basis_data(geom)
    mass = _gram(geom, basis, basis)
    LY = -lap - _jacobi_potential(geom) * basis
    L_mat = _gram(geom, basis, LY)
    W_mat = Wlam = None
    if with_W:
        WY = _W_terms(geom, basis, dY, hess, lap)
        W_mat = _gram(geom, basis, WY)
        Wlam = W_mat - lam * L_mat
    return OperatorAssembly(basis, mass, L_mat, W_mat, Wlam, float(lam))


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Generalized eigenpairs of ``(L_mat, mass)``, eigenvalues ascending.

    ``vectors`` are mass-orthonormal coefficient vectors; ``V0`` is spanned by
    the first one.
    """

    values: np.ndarray
    vectors: np.ndarray
    mass: np.ndarray

    def v0_projector(self) -> np.ndarray:
        """Mass-orthogonal projector onto the complement of the first eigenvector."""
        v = self.vectors[:, :1]
        return np.eye(v.shape[0]) - v @ (v.T @ self.mass)


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def spectrum(assembly: OperatorAssembly, k: int | None = None) -> SpectrumResult:
    """Lowest ``k`` generalized eigenvalues of the Jacobi operator."""
    n = assembly.mass.shape[0]
    k = n if k is None else min(int(k), n)
    try:
        vals, vecs = scipy.linalg.eigh(_sym(assembly.L_mat), _sym(assembly.mass), subset_by_index=[0, k - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise RuntimeError(f"generalized eigensolver failed: {exc}") from exc
    return SpectrumResult(vals, vecs, assembly.mass)


def wlambda_coercivity(assembly: OperatorAssembly) -> float:
    """Smallest Rayleigh quotient of ``W_lambda`` on the mass complement of the first Jacobi mode."""
    if assembly.Wlam_mat is None:
        raise ValueError("assembly has no W_lambda matrix")
    spec = spectrum(assembly, 1)
    c = assembly.mass @ spec.vectors[:, 0]
    Z = scipy.linalg.null_space(c[None, :])
    A = Z.T @ _sym(assembly.Wlam_mat) @ Z
    B = Z.T @ _sym(assembly.mass) @ Z
    return float(scipy.linalg.eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])[0])


# -- variations --------------------------------------------------------------------
def tangential_shift(geom: SurfaceGeometry, du) -> np.ndarray:
    """Chart components ``X^k`` of the tangential part of the graph variation ``du e``."""
    s = np.einsum("a...,ab...,ib...->i...", geom.radial_dir, geom.g, geom.X1)
    return du * np.einsum("ki...,i...->k...", geom.gamma_inv, s)


def _perturbed(geom: SurfaceGeometry, dcoeffs, s: float) -> SurfaceGeometry:
    g = geom.graph
    return geometry(RadialGraph(g.center, g.coeffs + s * np.asarray(dcoeffs), g.grid), geom.provider)


@dataclass(frozen=True)
class VariationCheck:
    """Finite differences of a functional against its first-variation formula."""

    which: str
    predicted: float
    steps: tuple
    differences: tuple
    rel_error: float


DEFAULT_STEPS = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)


def _first_variation(geom: SurfaceGeometry, which: str, alpha: np.ndarray) -> float:
    H = geom.H
    if which == "area":
        return float(geom.integrate(H * alpha))
    if which == "W":
        return float(geom.integrate(willmore_operator(geom) * alpha))
    if which == "U":
        gi = geom.gamma_inv
        A0_up = np.einsum("ik...,jl...,kl...->ij...", gi, gi, geom.A0)
        _, hess, _ = geom.scalar_derivatives(alpha)
        dens = (
            2.0 * np.einsum("ij...,ij...->...", A0_up, hess)
            + 2.0 * alpha * np.einsum("ij...,ij...->...", A0_up, geom.ric_T)
            + alpha * H * geom.norm_A02
        )
        return -float(geom.integrate(dens))
    if which == "V":
        dalpha = geom.gradient(alpha)
        grad_alpha = np.einsum("ij...,j...->i...", geom.gamma_inv, dalpha)
        dG_nnn = geom.nabla_ric_nnn - 0.5 * geom.dscalar_n
        dens = alpha * (dG_nnn + H * geom.G_nn) - 2.0 * np.einsum("i...,i...->...", grad_alpha, geom.omega)
        return 2.0 * float(geom.integrate(dens))
    raise ValueError(f"unknown functional {which!r}; expected area, W, U or V")


def _functional_value(geom: SurfaceGeometry, which: str) -> float:
    if which == "area":
        return geom.area
    rec = functionals(geom)
    return {"W": rec.willmore, "U": rec.u_energy, "V": rec.v_energy}[which]


def variation_fd_check(geom: SurfaceGeometry, which: str, dcoeffs, steps=DEFAULT_STEPS) -> VariationCheck:
    """Compare central differences of a functional with its first variation.

    The surface is moved by ``s * du`` with ``du`` given by harmonic
    coefficients; the normal speed is ``alpha = du g(e_r, nu)``.

    Returns
    -------
    VariationCheck
        ``rel_error`` is the smallest relative error over ``steps``.
    """
    du = geom.grid.synth(dcoeffs)
    alpha = normal_speed(geom, du)
    pred = _first_variation(geom, which, alpha)
    diffs = []
    for h in steps:
        fp = _functional_value(_perturbed(geom, dcoeffs, h), which)
        fm = _functional_value(_perturbed(geom, dcoeffs, -h), which)
        diffs.append((fp - fm) / (2.0 * h))
    scale = max(abs(pred), 1e-300)
    err = min(abs(d - pred) for d in diffs) / scale
    return VariationCheck(which, pred, tuple(steps), tuple(diffs), float(err))


def linearization_fd_check(geom: SurfaceGeometry, dcoeffs, steps=DEFAULT_STEPS) -> float:
    """Sup-norm relative error between ``W alpha`` and differences of ``L H + H^3/2``.

    Pointwise differences along a graph variation contain the transport
    term ``X(f)`` of the tangential shift ``X``, which is added to ``W alpha``.
    """
    du = geom.grid.synth(dcoeffs)
    alpha = normal_speed(geom, du)
    E = willmore_operator(geom)
    X = tangential_shift(geom, du)
    pred = apply_W(geom, alpha) + np.einsum("k...,k...->...", X, geom.gradient(E))
    scale = np.max(np.abs(pred))
    best = np.inf
    for h in steps:
        Ep = willmore_operator(_perturbed(geom, dcoeffs, h))
        Em = willmore_operator(_perturbed(geom, dcoeffs, -h))
        best = min(best, np.max(np.abs((Ep - Em) / (2.0 * h) - pred)) / scale)
    return float(best)


def hawking_variation_check(geom: SurfaceGeometry, lam: float, dcoeffs, steps=DEFAULT_STEPS) -> float:
    """Relative error of the Hawking-mass variation formula valid on solutions.

    Compares ``(16 pi)^{3/2} d m_H`` with
    ``1/2 |Sigma|^{-1/2} (int H alpha)(16 pi - 4 lambda |Sigma| - int H^2)``.
    """
    du = geom.grid.synth(dcoeffs)
    alpha = normal_speed(geom, du)
    area = geom.area
    pred = (
        0.5
        / np.sqrt(area)
        * float(geom.integrate(geom.H * alpha))
        * (16.0 * np.pi - 4.0 * lam * area - float(geom.integrate(geom.H**2)))
    )
    best = np.inf
    for h in steps:
        mp = functionals(_perturbed(geom, dcoeffs, h)).hawking
        mm = functionals(_perturbed(geom, dcoeffs, -h)).hawking
        fd = (16.0 * np.pi) ** 1.5 * (mp - mm) / (2.0 * h)
        best = min(best, abs(fd - pred) / max(abs(pred), 1e-300))
    return float(best)


def pohozaev_flux(geom: SurfaceGeometry, b) -> float:
    """``int G(b, nu) dmu`` for a constant Cartesian vector ``b``."""
    b = np.asarray(b, dtype=float).reshape(3)
    G = geom.ricci - 0.5 * geom.scalar * geom.g
    return float(geom.integrate(np.einsum("a,ab...,b...->...", b, G, geom.nu)))


def closure_defect(geom: SurfaceGeometry, lam: float) -> float:
    """``lambda |Sigma| + int |grad log H|^2 + |A°|^2 + Ric(nu, nu)``; zero on solutions."""
    grad_log = geom.vector_norm2(geom.dH) / geom.H**2
    return float(lam * geom.area + geom.integrate(grad_log + geom.norm_A02 + geom.ric_nn))


def identity_suite(geom: SurfaceGeometry) -> dict:
    """Relative residuals of every geometric identity checked on a closed graph.

    Returns
    -------
    dict
        ``gauss``, ``codazzi``, ``simons``: sup of the relative pointwise
        residuals.  ``gauss_bonnet``: ``|int Sc^Sigma - 8 pi| / 8 pi``.
        ``energy_split``: ``|W - U - V - 8 pi| / 8 pi``.  ``translation``:
        ``max_b |int <b, nu^e> dmu^e| / |Sigma|_e`` in the Euclidean metric.
        For exact Schwarzschild also ``conformal`` (pointwise transformation
        laws) and ``a0_conformal`` (``int |A°|^2`` against its Euclidean value).
    """
    rel = identity_residuals(geom, relative=True)
    out = {k: float(np.max(np.abs(rel[k]))) for k in ("gauss", "codazzi", "simons")}
    total = 8.0 * np.pi
    out["gauss_bonnet"] = abs(float(geom.integrate(geom.sc_intrinsic)) - total) / total
    out["energy_split"] = abs(functionals(geom).gauss_bonnet_defect) / total
    flat = geom if geom.provider is FLAT else SurfaceGeometry(geom.graph, FLAT)
    flux = flat.integrate(flat.nu)
    out["translation"] = float(np.max(np.abs(flux)) / flat.area)
    if rel["conformal"] is not None:
        out["conformal"] = float(np.max(rel["conformal"]))
        u_flat = float(flat.integrate(flat.norm_A02))
        u = float(geom.integrate(geom.norm_A02))
        out["a0_conformal"] = abs(u - u_flat) / max(abs(u_flat), 1e-300)
    return out
