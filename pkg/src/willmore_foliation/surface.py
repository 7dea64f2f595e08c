"""Radial graphs over the unit sphere and their extrinsic/intrinsic geometry.

A surface is ``x(omega) = center + u(omega) omega`` with ``u`` a band-limited
expansion in real spherical harmonics.  All geometric fields are sampled on
the nodes of a :class:`~willmore_foliation.spectral.SphereGrid` and stored with
tensor axes first, e.g. the induced metric has shape ``(2, 2, ntheta, nphi)``
in the chart ``(theta, phi)``.

Sign convention: ``nu`` is the outward unit normal and
``A(X, Y) = g(nabla_X nu, Y)``, so round spheres have ``H > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from functools import cached_property

import numpy as np

from .metric import ConformalMetric, MetricProvider, conformal_factor
from .spectral import SphereGrid, sphere_grid

__all__ = [
    "RadialGraph",
    "SurfaceGeometry",
    "ApproximatingSphere",
    "build_graph",
    "geometry",
    "laplace_beltrami",
    "integrate",
    "approximating_sphere",
    "identity_residuals",
    "normal_speed",
]

FLAT = ConformalMetric(0.0)


@dataclass(frozen=True, eq=False)
class RadialGraph:
    """Star-shaped surface ``center + u(omega) omega``.

    Attributes
    ----------
    center : ndarray, shape (3,)
    coeffs : ndarray, shape ((L+1)**2,)
        Spherical-harmonic coefficients of ``u``.
    grid : SphereGrid
    """

    center: np.ndarray
    coeffs: np.ndarray
    grid: SphereGrid = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.grid.ncoef,):
            raise ValueError(f"expected {self.grid.ncoef} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if np.any(self.radial() <= 0):
            raise ValueError("radial function must be positive at every node")

    @property
    def L(self) -> int:
        return self.grid.L

    def radial(self) -> np.ndarray:
        return self.grid.synth(self.coeffs)

    def points(self) -> np.ndarray:
        """Surface points, shape (3, ntheta, nphi)."""
        return self.center[:, None, None] + self.radial()[None] * np.moveaxis(self.grid.unit, -1, 0)

    def with_coeffs(self, coeffs) -> "RadialGraph":
        return RadialGraph(self.center, coeffs, self.grid)

    def to_dict(self) -> dict:
        return {"L": self.L, "center": self.center.tolist(), "coeffs": self.coeffs.tolist()}


@dataclass(frozen=True)
class ApproximatingSphere:
    """Euclidean area radius ``R_e``, center of gravity ``a_e`` and ``tau = |a_e|/R_e``."""

    R_e: float
    a_e: np.ndarray
    tau: float


def build_graph(center, shape, L: int, grid: SphereGrid | None = None) -> RadialGraph:
    """Construct a radial graph.

    Parameters
    ----------
    center : array_like, shape (3,)
    shape : float, ('ellipsoid', (a, b, c)) or array_like
        A sphere radius, semi-axes of an ellipsoid centred at ``center``, or a
        coefficient vector.
    L : int
        Band limit (at least 8).
    grid : SphereGrid, optional
        Grid to use instead of the default one for ``L``.
    """
    if L < 8:
        raise ValueError("band limit must be at least 8")
    grid = sphere_grid(L) if grid is None else grid
    if grid.L != L:
        raise ValueError("grid band limit does not match L")
    if isinstance(shape, dict) and "ellipsoid" in shape:
        shape = ("ellipsoid", shape["ellipsoid"])
    if np.isscalar(shape):
        R = float(shape)
        if R <= 0:
            raise ValueError("sphere radius must be positive")
        coeffs = np.zeros(grid.ncoef)
        coeffs[0] = R * np.sqrt(4.0 * np.pi)
    elif isinstance(shape, (tuple, list)) and len(shape) == 2 and shape[0] == "ellipsoid":
        axes = np.asarray(shape[1], dtype=float)
        if axes.shape != (3,) or np.any(axes <= 0):
            raise ValueError("ellipsoid needs three positive semi-axes")
        w = grid.unit
        u = 1.0 / np.sqrt(np.sum((w / axes) ** 2, axis=-1))
        coeffs = grid.analyze(u)
    else:
        coeffs = np.asarray(shape, dtype=float)
    try:
        return RadialGraph(np.asarray(center, dtype=float), coeffs, grid)
    except ValueError as exc:
        raise ValueError(f"requested shape is not star-shaped about the center: {exc}") from None


def _front(a: np.ndarray, k: int) -> np.ndarray:
    """Move the trailing ``k`` axes to the front."""
    return np.moveaxis(a, list(range(a.ndim - k, a.ndim)), list(range(k)))


class SurfaceGeometry:
    """Geometry of a radial graph in an ambient metric.

    Attributes are arrays with tensor axes first followed by the grid axes.
    The quadrature weight of each node for ``int f dmu`` is ``dmu``.

    Tangent vectors and their derivatives are exact because ``u`` is
    band-limited.  Derivatives of other fields go through the degree-``M``
    projection of the grid; tangential tensors are differentiated through
    their Cartesian components, which are smooth on the sphere.
    """

    def __init__(self, graph: RadialGraph, provider: MetricProvider):
        self.graph = graph
        self.provider = provider
        G = self.grid = graph.grid
        du = G.synth_derivs(graph.coeffs, 3)
        u = du[(0, 0)]
        e = np.moveaxis(G.unit, -1, 0)
        self.u = u
        self.x = graph.center[:, None, None] + u * e
        self.radial_dir = e
        self.X1, self.X2, self.X3 = _embedding_derivatives(du, G)
        X1 = self.X1

        mj = provider.jet(np.moveaxis(self.x, 0, -1))
        self.metric = mj
        g = self.g = _front(mj.g, 2)
        ginv = self.g_inv = _front(mj.g_inv, 2)
        self.christoffel = _front(mj.christoffel, 3)
        self.ricci = ric = _front(mj.ricci, 2)
        self.nabla_ricci = _front(mj.nabla_ricci, 3)
        self.riemann = _front(mj.riemann, 4)
        self.scalar = mj.scalar

        gam = np.einsum("ia...,ab...,jb...->ij...", X1, g, X1)
        det = gam[0, 0] * gam[1, 1] - gam[0, 1] ** 2
        if np.any(det <= 1e-14 * np.max(np.abs(det))):
            k = np.unravel_index(np.argmin(det), det.shape)
            raise ValueError(f"degenerate tangent plane at node (theta index {k[0]}, phi index {k[1]})")
        self.gamma = gam
        self.det = det
        self.sqrt_det = np.sqrt(det)
        self.gamma_inv = gi = np.stack([np.stack([gam[1, 1], -gam[0, 1]]), np.stack([-gam[1, 0], gam[0, 0]])]) / det
        self.dmu = G.chart_weights * self.sqrt_det
        # dual coframe: eps[i, a] with eps^i(x_j) = delta^i_j and eps^i(nu) = 0
        self.coframe = np.einsum("ij...,ab...,jb...->ia...", gi, g, X1)

        n = np.cross(X1[0], X1[1], axis=0)
        nn = np.sqrt(np.einsum("a...,ab...,b...->...", n, ginv, n))
        self.nu_low = n / nn
        self.nu = np.einsum("ab...,b...->a...", ginv, self.nu_low)

        # covariant second derivative of the embedding
        acc = self.X2 + np.einsum("bcd...,ic...,jd...->ijb...", self.christoffel, X1, X1)
        A = -np.einsum("b...,ijb...->ij...", self.nu_low, acc)
        self.A = 0.5 * (A + np.swapaxes(A, 0, 1))
        self.H = np.einsum("ij...,ij...->...", gi, self.A)
        self.A0 = self.A - 0.5 * self.H * gam
        self.norm_A2 = self.tensor_norm2(self.A)
        self.norm_A02 = self.tensor_norm2(self.A0)
        # Levi-Civita connection of gamma: Gamma_{l,ij} = g(x_l, nabla_i x_j)
        first = np.einsum("la...,ab...,ijb...->lij...", X1, g, acc)
        self.christoffel1 = 0.5 * (first + np.swapaxes(first, 1, 2))
        self.christoffel_s = np.einsum("kl...,lij...->kij...", gi, self.christoffel1)

        nu = self.nu
        self.ric_nn = np.einsum("a...,ab...,b...->...", nu, ric, nu)
        self.omega = np.einsum("a...,ab...,ib...->i...", nu, ric, X1)
        self.ric_T = np.einsum("ia...,ab...,jb...->ij...", X1, ric, X1)
        self.G_nn = self.ric_nn - 0.5 * self.scalar
        self.T = self.ric_T + self.G_nn * gam
        self.nabla_ric_nnn = np.einsum("kij...,k...,i...,j...->...", self.nabla_ricci, nu, nu, nu)
        self.dscalar_n = np.einsum("a...,a...->...", _front(mj.grad_scalar, 1), nu)

        self.dH, self.hessH, self.lapH = self.scalar_derivatives(self.H)

    # -- helpers -----------------------------------------------------------
    def tensor_norm2(self, T) -> np.ndarray:
        """``|T|^2`` of a covariant 2-tensor field."""
        gi = self.gamma_inv
        return np.einsum("ik...,jl...,ij...,kl...->...", gi, gi, T, T)

    def vector_norm2(self, w) -> np.ndarray:
        """``|w|^2`` of a 1-form field."""
        return np.einsum("ij...,i...,j...->...", self.gamma_inv, w, w)

    def scalar_derivatives(self, f):
        """Gradient, Hessian and Laplacian of sampled scalar fields.

        Batch axes of ``f`` come first; the gradient and Hessian carry their
        chart axes in front of those.
        """
        return self._calculus(self.grid.derivs(f, 2))

    def harmonic_derivatives(self, coeffs):
        """Gradient, Hessian and Laplacian of band-limited fields given by coefficients."""
        return self._calculus(self.grid.synth_derivs(coeffs, 2))

    def _calculus(self, d):
        df = np.stack([d[(1, 0)], d[(0, 1)]])
        d2 = np.stack([np.stack([d[(2, 0)], d[(1, 1)]]), np.stack([d[(1, 1)], d[(0, 2)]])])
        hess = d2 - np.einsum("kij...,k...->ij...", self.christoffel_s, df)
        lap = np.einsum("ij...,ij...->...", self.gamma_inv, hess)
        return df, hess, lap

    def laplacian(self, f) -> np.ndarray:
        """Laplace-Beltrami operator of scalar fields (batch axes allowed)."""
        return self.scalar_derivatives(f)[2]

    def gradient(self, f) -> np.ndarray:
        """Chart components ``d_i f``."""
        return self.grid.gradient(f)

    def integrate(self, f) -> np.ndarray:
        return np.einsum("...ij,ij->...", f, self.dmu)

    def tensor_partial(self, T, rank: int) -> np.ndarray:
        """Chart derivative ``d_k T_{i...}`` of a tangential covariant tensor.

        The tensor is mapped to Cartesian components with the dual coframe,
        differentiated spectrally and pulled back with the exact tangent
        vectors.  The result carries the derivative index first.
        """
        E, X1, X2 = self.coframe, self.X1, self.X2
        if rank == 1:
            Th = np.einsum("i...,ia...->a...", T, E)
            d = self.grid.gradient(Th)
            return np.einsum("ka...,ia...->ki...", d, X1) + np.einsum("a...,ika...->ki...", Th, X2)
        if rank == 2:
            Th = np.einsum("ij...,ia...,jb...->ab...", T, E, E)
            d = self.grid.gradient(Th)
            return (
                np.einsum("kab...,ia...,jb...->kij...", d, X1, X1)
                + np.einsum("ab...,ika...,jb...->kij...", Th, X2, X1)
                + np.einsum("ab...,ia...,jkb...->kij...", Th, X1, X2)
            )
        if rank == 3:
            Th = np.einsum("ijl...,ia...,jb...,lc...->abc...", T, E, E, E)
            d = self.grid.gradient(Th)
            return (
                np.einsum("kabc...,ia...,jb...,lc...->kijl...", d, X1, X1, X1)
                + np.einsum("abc...,ika...,jb...,lc...->kijl...", Th, X2, X1, X1)
                + np.einsum("abc...,ia...,jkb...,lc...->kijl...", Th, X1, X2, X1)
                + np.einsum("abc...,ia...,jb...,lkc...->kijl...", Th, X1, X1, X2)
            )
        raise ValueError("rank must be 1, 2 or 3")

    def cov_deriv_1form(self, w):
        """``nabla_i w_j`` of a 1-form field, indexed ``[i, j]``."""
        return self.tensor_partial(w, 1) - np.einsum("kij...,k...->ij...", self.christoffel_s, w)

    def cov_deriv_2tensor(self, T):
        """``nabla_k T_ij`` of a covariant 2-tensor field, indexed ``[k, i, j]``."""
        gs = self.christoffel_s
        return (
            self.tensor_partial(T, 2)
            - np.einsum("mki...,mj...->kij...", gs, T)
            - np.einsum("mkj...,im...->kij...", gs, T)
        )

    def cov_deriv_3tensor(self, C):
        """``nabla_l C_kij`` indexed ``[l, k, i, j]``."""
        gs = self.christoffel_s
        return (
            self.tensor_partial(C, 3)
            - np.einsum("mlk...,mij...->lkij...", gs, C)
            - np.einsum("mli...,kmj...->lkij...", gs, C)
            - np.einsum("mlj...,kim...->lkij...", gs, C)
        )

    # -- derived quantities --------------------------------------------------
    @cached_property
    def area(self) -> float:
        return float(np.sum(self.dmu))

    @cached_property
    def sc_intrinsic(self) -> np.ndarray:
        """Scalar curvature of ``gamma`` from spectral derivatives of ``gamma`` alone."""
        E, X1, X2, X3 = self.coframe, self.X1, self.X2, self.X3
        # Cartesian form of gamma, smooth on the sphere
        Th = np.einsum("ij...,ia...,jb...->ab...", self.gamma, E, E)
        d = self.grid.derivs(Th, 2)
        D1 = np.stack([d[(1, 0)], d[(0, 1)]])
        D2 = np.stack([np.stack([d[(2, 0)], d[(1, 1)]]), np.stack([d[(1, 1)], d[(0, 2)]])])
        Th = d[(0, 0)]
        # d1[i, j, k] = d_k gamma_ij
        d1 = (
            np.einsum("kab...,ia...,jb...->ijk...", D1, X1, X1)
            + np.einsum("ab...,ika...,jb...->ijk...", Th, X2, X1)
            + np.einsum("ab...,ia...,jkb...->ijk...", Th, X1, X2)
        )
        # d2[i, j, k, l] = d_k d_l gamma_ij
        d2 = (
            np.einsum("klab...,ia...,jb...->ijkl...", D2, X1, X1)
            + np.einsum("kab...,ila...,jb...->ijkl...", D1, X2, X1)
            + np.einsum("kab...,ia...,jlb...->ijkl...", D1, X1, X2)
            + np.einsum("lab...,ika...,jb...->ijkl...", D1, X2, X1)
            + np.einsum("lab...,ia...,jkb...->ijkl...", D1, X1, X2)
            + np.einsum("ab...,ikla...,jb...->ijkl...", Th, X3, X1)
            + np.einsum("ab...,ika...,jlb...->ijkl...", Th, X2, X2)
            + np.einsum("ab...,ila...,jkb...->ijkl...", Th, X2, X2)
            + np.einsum("ab...,ia...,jklb...->ijkl...", Th, X1, X3)
        )
        gam = np.einsum("ab...,ia...,jb...->ij...", Th, X1, X1)
        det = gam[0, 0] * gam[1, 1] - gam[0, 1] ** 2
        gi = np.stack([np.stack([gam[1, 1], -gam[0, 1]]), np.stack([-gam[1, 0], gam[0, 0]])]) / det
        first = 0.5 * (
            np.einsum("lji...->lij...", d1) + np.einsum("lij...->lij...", d1) - np.einsum("ijl...->lij...", d1)
        )
        gs = np.einsum("kl...,lij...->kij...", gi, first)
        # [l, j, k, i] = d_i Gamma_{l, jk}
        dfirst = 0.5 * (
            np.einsum("lkij...->ljki...", d2)
            + np.einsum("ljik...->ljki...", d2)
            - np.einsum("jkil...->ljki...", d2)
        )
        riem = (
            np.einsum("ljki...->ijkl...", dfirst)
            - np.einsum("likj...->ijkl...", dfirst)
            - np.einsum("lmi...,mjk...->ijkl...", d1, gs)
            + np.einsum("lmj...,mik...->ijkl...", d1, gs)
            + np.einsum("lm...,mip...,pjk...->ijkl...", gam, gs, gs)
            - np.einsum("lm...,mjp...,pik...->ijkl...", gam, gs, gs)
        )
        ric = np.einsum("jk...,ijkl...->il...", gi, riem)
        return np.einsum("il...,il...->...", gi, ric)

    @cached_property
    def nabla_A0(self) -> np.ndarray:
        return self.cov_deriv_2tensor(self.A0)

    @cached_property
    def div_A0(self) -> np.ndarray:
        return np.einsum("ki...,kij...->j...", self.gamma_inv, self.nabla_A0)

    @cached_property
    def lap_A0(self) -> np.ndarray:
        dd = self.cov_deriv_3tensor(self.nabla_A0)
        return np.einsum("lk...,lkij...->ij...", self.gamma_inv, dd)

    @cached_property
    def nabla_omega(self) -> np.ndarray:
        return self.cov_deriv_1form(self.omega)

    @cached_property
    def tangential_riemann(self) -> np.ndarray:
        X1 = self.X1
        return np.einsum("abcd...,ia...,jb...,kc...,ld...->ijkl...", self.riemann, X1, X1, X1, X1)


def _embedding_derivatives(du, grid: SphereGrid):
    """Chart derivatives of ``u(theta, phi) e(theta, phi)`` up to third order.

    ``du`` maps ``(a, b)`` to ``d_theta^a d_phi^b u``.  Returns ``X1[i, a]``,
    ``X2[i, j, a]`` and ``X3[i, j, k, a]``.
    """
    th, ph = np.meshgrid(grid.theta, grid.phi, indexing="ij")

    def unit(a, b):
        # derivatives of sin, cos shift the phase by a quarter period
        ts, tc = np.sin(th + a * np.pi / 2), np.cos(th + a * np.pi / 2)
        pc, ps = np.cos(ph + b * np.pi / 2), np.sin(ph + b * np.pi / 2)
        return np.stack([ts * pc, ts * ps, tc if b == 0 else np.zeros_like(tc)])

    E = {(a, b): unit(a, b) for a in range(4) for b in range(4 - a)}

    def xd(*idx):
        a, b = idx.count(0), idx.count(1)
        out = 0.0
        for i in range(a + 1):
            for j in range(b + 1):
                out = out + comb(a, i) * comb(b, j) * du[(i, j)] * E[(a - i, b - j)]
        return out

    r = range(2)
    X1 = np.stack([xd(i) for i in r])
    X2 = np.stack([np.stack([xd(i, j) for j in r]) for i in r])
    X3 = np.stack([np.stack([np.stack([xd(i, j, k) for k in r]) for j in r]) for i in r])
    return X1, X2, X3


def geometry(graph: RadialGraph, provider: MetricProvider) -> SurfaceGeometry:
    """Compute all first- and second-fundamental-form data of ``graph``."""
    return SurfaceGeometry(graph, provider)


def laplace_beltrami(geom: SurfaceGeometry, f) -> np.ndarray:
    """``Delta f`` on the surface for fields sampled at the grid."""
    return geom.laplacian(np.asarray(f, dtype=float))


def integrate(geom: SurfaceGeometry, f) -> np.ndarray:
    """``int_Sigma f dmu``."""
    return geom.integrate(np.asarray(f, dtype=float))


def normal_speed(geom: SurfaceGeometry, du) -> np.ndarray:
    """Normal speed ``du * g(omega, nu)`` induced by a radial perturbation ``du``."""
    return du * np.einsum("a...,a...->...", geom.radial_dir, geom.nu_low)


def approximating_sphere(graph: RadialGraph) -> ApproximatingSphere:
    """Euclidean area radius and center of gravity of the graph."""
    G = graph.grid
    d = G.synth_derivs(graph.coeffs, 1)
    u = d[(0, 0)]
    e = np.moveaxis(G.unit, -1, 0)
    xt = d[(1, 0)] * e + u * np.moveaxis(G.unit_t, -1, 0)
    xp = d[(0, 1)] * e + u * np.moveaxis(G.unit_p, -1, 0)
    dA = G.chart_weights * np.linalg.norm(np.cross(xt, xp, axis=0), axis=0)
    area = float(dA.sum())
    x = graph.center[:, None, None] + u * e
    a_e = np.einsum("aij,ij->a", x, dA) / area
    R_e = np.sqrt(area / (4.0 * np.pi))
    return ApproximatingSphere(R_e=float(R_e), a_e=a_e, tau=float(np.linalg.norm(a_e) / R_e))


def identity_residuals(geom: SurfaceGeometry, relative: bool = False) -> dict:
    """Pointwise residuals of the Gauss, Codazzi and Simons identities.

    Parameters
    ----------
    geom : SurfaceGeometry
    relative : bool
        Divide each residual by the sum of the sup-norms of the terms of its
        identity, which makes the values scale invariant.

    Returns
    -------
    dict
        ``gauss`` (scalar field), ``codazzi`` and ``simons`` (pointwise norms of
        the residual tensors) and ``conformal`` (only for exact Schwarzschild,
        otherwise ``None``): the largest relative discrepancy among the
        conformal transformation laws of ``nu``, ``dmu`` and ``H``.
    """
    gi = geom.gamma_inv
    gauss_terms = [geom.sc_intrinsic, geom.scalar, 2.0 * geom.ric_nn, geom.H**2, geom.norm_A2]
    gauss = gauss_terms[0] - (gauss_terms[1] - gauss_terms[2] + gauss_terms[3] - gauss_terms[4])
    cod_terms = [geom.div_A0, 0.5 * geom.dH, geom.omega]
    codazzi = np.sqrt(geom.vector_norm2(cod_terms[0] - cod_terms[1] - cod_terms[2]))

    A0 = geom.A0
    H = geom.H
    lapH = np.einsum("ij...,ij...->...", gi, geom.hessH)
    hess0 = geom.hessH - 0.5 * lapH * geom.gamma
    A0sq = np.einsum("ik...,kl...,lj...->ij...", A0, gi, A0)
    A0_up = np.einsum("ka...,lb...,ab...->kl...", gi, gi, A0)
    R = geom.tangential_riemann
    nab_w = geom.nabla_omega
    div_w = np.einsum("ij...,ij...->...", gi, nab_w)
    # the omega term enters through its symmetric part
    simons_terms = [
        hess0,
        H * A0sq,
        0.5 * H**2 * A0,
        -geom.norm_A02 * A0,
        -0.5 * H * geom.norm_A02 * geom.gamma,
        np.einsum("jn...,nk...,lm...,likm...->ij...", A0, gi, gi, R),
        np.einsum("kl...,ikjl...->ij...", A0_up, R),
        nab_w + np.swapaxes(nab_w, 0, 1) - div_w * geom.gamma,
    ]
    simons = np.sqrt(geom.tensor_norm2(geom.lap_A0 - sum(simons_terms)))
    if relative:
        gauss = gauss / sum(np.max(np.abs(t)) for t in gauss_terms)
        codazzi = codazzi / sum(np.max(np.sqrt(geom.vector_norm2(t))) for t in cod_terms)
        scale = np.max(np.sqrt(geom.tensor_norm2(geom.lap_A0)))
        simons = simons / (scale + sum(np.max(np.sqrt(geom.tensor_norm2(t))) for t in simons_terms))

    conformal = None
    if getattr(geom.provider, "exact_schwarzschild", False) and isinstance(geom.provider, ConformalMetric):
        flat = SurfaceGeometry(geom.graph, FLAT)
        pts = np.moveaxis(geom.x, 0, -1)
        phi, dphi = conformal_factor(geom.provider.m, pts)
        dphi = np.moveaxis(dphi, -1, 0)
        dn = np.einsum("a...,a...->...", dphi, flat.nu)
        r_nu = np.linalg.norm(geom.nu - flat.nu / phi**2, axis=0) / np.linalg.norm(geom.nu, axis=0)
        r_mu = np.abs(geom.sqrt_det - phi**4 * flat.sqrt_det) / geom.sqrt_det
        Hc = flat.H / phi**2 + 4.0 * dn / phi**3
        r_H = np.abs(geom.H - Hc) / np.max(np.abs(geom.H))
        conformal = np.maximum(np.maximum(r_nu, r_mu), r_H)
    return {"gauss": gauss, "codazzi": codazzi, "simons": simons, "conformal": conformal}
