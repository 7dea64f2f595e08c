"""Ambient 3-metrics with exact derivatives up to the covariant derivative of Ricci.

Every provider returns the metric as a third-order Taylor jet at the requested
points; Christoffel symbols, curvature and ``nabla Ric`` are then obtained by
jet arithmetic, so no finite differencing enters the geometry.

Curvature convention: ``(nabla_i nabla_j - nabla_j nabla_i) d_k = R_ijkl g^lm d_m``
and ``Ric_il = g^jk R_ijkl``.  With this convention a round sphere of radius
``r`` in flat space has ``R_ijkl = r**-2 (g_jk g_il - g_ik g_jl)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial, pi, sqrt

import numpy as np

from .jets import JetAlgebra, jet_algebra

__all__ = [
    "SchwarzschildParams",
    "PerturbationSpec",
    "HomotopyParam",
    "MetricJet",
    "MetricProvider",
    "ConformalMetric",
    "TensorPerturbedMetric",
    "HomotopyMetric",
    "DEFAULT_TENSOR_PROFILE",
    "conformal_factor",
    "schwarzschild_jet",
    "riemann_from_ricci",
    "perturbed_jet",
    "homotopy_jet",
    "make_provider",
    "measure_eta",
    "real_solid_harmonics",
]

JET_ORDER = 3

DEFAULT_TENSOR_PROFILE = {
    "q": [[1.0, 0.5, 0.0], [0.5, -1.0, 0.25], [0.0, 0.25, 0.5]],
    "q_odd": [[0.5, 0.0, 0.5], [0.0, 1.0, 0.0], [0.5, 0.0, -0.5]],
    "d": [1.0, 0.0, 0.0],
    "core": 1.0,
    "power": 3.0,
}


@dataclass(frozen=True)
class SchwarzschildParams:
    """Mass parameter of the spatial Schwarzschild metric.

    ``m = 0`` is accepted as the flat limit.
    """

    m: float

    def __post_init__(self):
        if not np.isfinite(self.m) or self.m < 0:
            raise ValueError(f"mass must be non-negative, got {self.m}")


@dataclass(frozen=True)
class PerturbationSpec:
    """Description of a test metric near Schwarzschild.

    Parameters
    ----------
    kind : {'exact-schwarzschild', 'conformal-harmonic', 'tensor-perturbation'}
    eta : float
        Perturbation amplitude.
    multipoles : tuple of (l, order, coefficient)
        Harmonic additions ``coefficient * Y_l^order / r**(l+1)`` to the
        conformal factor (conformal-harmonic kind).
    tensor_profile : dict, optional
        ``q``, ``q_odd`` (symmetric 3x3), ``d`` (vector), ``core`` and
        ``power``; the added tensor is
        ``q s**-p + (d.x) q_odd s**-(p+1)`` with ``s = sqrt(core**2 + r**2)``.
    """

    kind: str = "exact-schwarzschild"
    eta: float = 0.0
    multipoles: tuple = ()
    tensor_profile: dict | None = None

    def __post_init__(self):
        if self.kind not in ("exact-schwarzschild", "conformal-harmonic", "tensor-perturbation"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.kind == "exact-schwarzschild" and self.eta != 0:
            raise ValueError("exact-schwarzschild requires eta = 0")
        mp = tuple(tuple(t) for t in self.multipoles)
        for l, order, _ in mp:
            if int(l) < 1 or abs(int(order)) > int(l):
                raise ValueError(f"invalid multipole (l={l}, order={order})")
        object.__setattr__(self, "multipoles", mp)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "eta": self.eta,
            "multipoles": [list(t) for t in self.multipoles],
            "tensor_profile": self.tensor_profile,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbationSpec":
        return cls(
            kind=d.get("kind", "exact-schwarzschild"),
            eta=float(d.get("eta", 0.0)),
            multipoles=tuple(tuple(t) for t in d.get("multipoles", ())),
            tensor_profile=d.get("tensor_profile"),
        )

    def with_eta(self, eta: float) -> "PerturbationSpec":
        return PerturbationSpec(self.kind, eta, self.multipoles, self.tensor_profile)


@dataclass(frozen=True)
class HomotopyParam:
    """Interpolation parameter ``t`` of ``(1 - t) g_a + t g_b``."""

    t: float

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"homotopy parameter must lie in [0, 1], got {self.t}")


@dataclass
class MetricJet:
    """Pointwise ambient geometry, batched over points.

    Attributes
    ----------
    g, g_inv : ndarray, shape (..., 3, 3)
    christoffel : ndarray, shape (..., 3, 3, 3)
        ``christoffel[..., k, i, j] = Gamma^k_ij``.
    riemann : ndarray, shape (..., 3, 3, 3, 3)
        Lowered ``R_ijkl``.
    ricci : ndarray, shape (..., 3, 3)
    nabla_ricci : ndarray, shape (..., 3, 3, 3)
        ``nabla_ricci[..., k, i, j] = nabla_k Ric_ij``.
    scalar : ndarray, shape (...)
    taylor : ndarray, optional
        Third-order Taylor jet of ``g`` from which the rest was derived.
    """

    g: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    nabla_ricci: np.ndarray
    scalar: np.ndarray
    taylor: np.ndarray | None = field(default=None, repr=False)

    @property
    def einstein(self) -> np.ndarray:
        return self.ricci - 0.5 * self.scalar[..., None, None] * self.g

    @property
    def grad_scalar(self) -> np.ndarray:
        """Coordinate gradient of the scalar curvature (contracted Bianchi)."""
        return 2.0 * np.einsum("...ij,...ijk->...k", self.g_inv, self.nabla_ricci)


def conformal_factor(m: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Schwarzschild conformal factor ``1 + m/(2r)`` and its Euclidean gradient.

    Parameters
    ----------
    m : float
        Mass.
    x : array_like, shape (..., 3)

    Returns
    -------
    phi : ndarray, shape (...)
    grad : ndarray, shape (..., 3)
    """
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ValueError("conformal factor undefined at the origin")
    phi = 1.0 + m / (2.0 * r)
    grad = -(m / (2.0 * r**3))[..., None] * x
    return phi, grad


# -- jet geometry --------------------------------------------------------------


def metric_jet_from_taylor(alg: JetAlgebra, gT: np.ndarray) -> MetricJet:
    """Derive the full :class:`MetricJet` from a third-order metric jet."""
    # Gamma is needed to order 2, curvature to order 1, nabla Ric to order 0
    ginvT = alg.inverse_matrix(gT, order=2)
    dg = alg.grad(gT)  # [..., a, b, c, :] = d_c g_ab
    first = 0.5 * (np.swapaxes(dg, -3, -2) + dg - np.moveaxis(dg, -2, -4))
    gam = alg.contract("lm,mij->lij", ginvT, first, order=2)
    dgam = alg.grad(gam)  # [..., m, j, k, i, :] = d_i Gamma^m_jk
    rup = (
        np.einsum("...mjkiZ->...mkijZ", dgam)
        - np.einsum("...mikjZ->...mkijZ", dgam)
        + alg.contract("mis,sjk->mkij", gam, gam, order=1)
        - alg.contract("mjs,sik->mkij", gam, gam, order=1)
    )
    # Ric_il = g^jk g_lm R^m_kij = R^k_ikl by pair symmetry
    ric = np.einsum("...kiklZ->...ilZ", rup)
    dric = alg.grad(ric)  # [..., i, j, k, :] = d_k Ric_ij
    g0 = gT[..., 0]
    gi0 = ginvT[..., 0]
    gam0 = gam[..., 0]
    ric0 = ric[..., 0]
    nab = (
        np.moveaxis(dric[..., 0], -1, -3)
        - np.einsum("...mki,...mj->...kij", gam0, ric0)
        - np.einsum("...mkj,...im->...kij", gam0, ric0)
    )
    scalar = np.einsum("...ij,...ij->...", gi0, ric0)
    return MetricJet(
        g=g0,
        g_inv=gi0,
        christoffel=gam0,
        riemann=np.einsum("...lm,...mkij->...ijkl", g0, rup[..., 0]),
        ricci=ric0,
        nabla_ricci=nab,
        scalar=scalar,
        taylor=gT,
    )


def _normalization(l: int, m: int) -> float:
    n = sqrt((2 * l + 1) / (4 * pi) * factorial(l - m) / factorial(l + m))
    return n * (sqrt(2.0) if m > 0 else 1.0)


def real_solid_harmonics(alg: JetAlgebra, X, Y, Z, lmax: int, mul=None) -> dict:
    """Real regular solid harmonics ``r**l Y_l^m`` as jets (or plain arrays).

    Uses the orthonormal real spherical harmonics without Condon-Shortley
    phase, ``m < 0`` selecting ``sin(|m| phi)``.

    Returns
    -------
    dict
        ``{(l, m): r**l Y_l^m(x/r)}`` for ``1 <= l <= lmax``, ``|m| <= l``.
    """
    mul = alg.mul if mul is None else mul
    r2 = mul(X, X) + mul(Y, Y) + mul(Z, Z)
    one = np.ones_like(X) if alg is None else alg.constant(np.ones(X.shape[:-1]))
    # Re/Im of (x + i y)^m
    re = [one]
    im = [0.0 * one]
    for mm in range(1, lmax + 1):
        re.append(mul(re[-1], X) - mul(im[-1], Y))
        im.append(mul(re[-2], Y) + mul(im[-1], X))
    out = {}
    for mm in range(0, lmax + 1):
        dfact = float(np.prod(np.arange(2 * mm - 1, 0, -2))) if mm > 0 else 1.0
        q_prev = None
        q = dfact * one
        for l in range(mm, lmax + 1):
            if l >= 1:
                nrm = _normalization(l, mm)
                out[(l, mm)] = nrm * mul(q, re[mm])
                if mm > 0:
                    out[(l, -mm)] = nrm * mul(q, im[mm])
            q_next = (2 * l + 1) * mul(Z, q)
            if q_prev is not None:
                q_next = q_next - (l + mm) * mul(r2, q_prev)
            q_prev, q = q, q_next / (l - mm + 1)
    return out


class MetricProvider:
    """Base class: subclasses implement :meth:`taylor`."""

    m: float = 0.0
    exact_schwarzschild: bool = False

    def taylor(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jet(self, points) -> MetricJet:
        """Evaluate the metric and its derived curvature at ``points``."""
        points = np.asarray(points, dtype=float)
        alg = jet_algebra(3, JET_ORDER)
        gT = self.taylor(points)
        _check_positive(gT[..., 0])
        return metric_jet_from_taylor(alg, gT)

    def describe(self) -> dict:
        raise NotImplementedError


def _check_positive(g: np.ndarray):
    ev = np.linalg.eigvalsh(g)
    if not np.all(ev > 0):
        raise ValueError("metric is not positive definite at some sample point")


def _radius_check(points: np.ndarray):
    r = np.linalg.norm(points, axis=-1)
    if np.any(r == 0):
        raise ValueError("metric undefined at the origin")


class ConformalMetric(MetricProvider):
    """``g = psi**4 delta`` with ``psi = 1 + m/(2r) + eta sum c_lm Y_lm r**-(l+1)``.

    With no multipoles (or ``eta = 0``) this is exact Schwarzschild; ``m = 0``
    and no multipoles gives the flat metric.
    """

    def __init__(self, m: float, eta: float = 0.0, multipoles=()):
        SchwarzschildParams(m)
        self.m = float(m)
        self.eta = float(eta)
        self.multipoles = tuple(tuple(t) for t in multipoles)
        self.exact_schwarzschild = self.eta == 0.0 or len(self.multipoles) == 0
        self.lmax = max((int(t[0]) for t in self.multipoles), default=0)

    def psi_taylor(self, points: np.ndarray) -> np.ndarray:
        _radius_check(points)
        alg = jet_algebra(3, JET_ORDER)
        X, Y, Z = alg.variables(points)
        r2 = alg.mul(X, X) + alg.mul(Y, Y) + alg.mul(Z, Z)
        psi = alg.constant(np.ones(points.shape[:-1])) + 0.5 * self.m * alg.power(r2, -0.5)
        if not self.exact_schwarzschild:
            solid = real_solid_harmonics(alg, X, Y, Z, self.lmax)
            for l, order, coef in self.multipoles:
                l = int(l)
                term = alg.mul(solid[(l, int(order))], alg.power(r2, -(2 * l + 1) / 2.0))
                psi = psi + self.eta * float(coef) * term
        if np.any(psi[..., 0] <= 0):
            raise ValueError("conformal factor is not positive at some sample point")
        return psi

    def taylor(self, points: np.ndarray) -> np.ndarray:
        alg = jet_algebra(3, JET_ORDER)
        psi = self.psi_taylor(points)
        p2 = alg.mul(psi, psi)
        p4 = alg.mul(p2, p2)
        eye = np.eye(3)[..., None]
        return p4[..., None, None, :] * eye

    def describe(self) -> dict:
        kind = "exact-schwarzschild" if self.exact_schwarzschild else "conformal-harmonic"
        return {
            "kind": kind,
            "m": self.m,
            "eta": self.eta if not self.exact_schwarzschild else 0.0,
            "multipoles": [list(t) for t in self.multipoles],
        }


class TensorPerturbedMetric(MetricProvider):
    """``g = g^S + eta h`` with a smooth decaying symmetric tensor ``h``."""

    def __init__(self, m: float, eta: float, profile: dict | None = None):
        SchwarzschildParams(m)
        self.m = float(m)
        self.eta = float(eta)
        prof = dict(DEFAULT_TENSOR_PROFILE)
        prof.update(profile or {})
        self.profile = prof
        self.q = np.asarray(prof["q"], dtype=float)
        self.q_odd = np.asarray(prof["q_odd"], dtype=float)
        self.d = np.asarray(prof["d"], dtype=float)
        self.core = float(prof["core"])
        self.power = float(prof["power"])
        for mat in (self.q, self.q_odd):
            if mat.shape != (3, 3) or not np.allclose(mat, mat.T):
                raise ValueError("tensor profile matrices must be symmetric 3x3")
        self.exact_schwarzschild = self.eta == 0.0
        self._background = ConformalMetric(m)

    def taylor(self, points: np.ndarray) -> np.ndarray:
        alg = jet_algebra(3, JET_ORDER)
        gS = self._background.taylor(points)
        if self.eta == 0.0:
            return gS
        X, Y, Z = alg.variables(points)
        s2 = alg.mul(X, X) + alg.mul(Y, Y) + alg.mul(Z, Z)
        s2[..., 0] += self.core**2
        even = alg.power(s2, -self.power / 2.0)
        dx = self.d[0] * X + self.d[1] * Y + self.d[2] * Z
        odd = alg.mul(dx, alg.power(s2, -(self.power + 1.0) / 2.0))
        h = self.q[..., None] * even[..., None, None, :] + self.q_odd[..., None] * odd[..., None, None, :]
        return gS + self.eta * h

    def describe(self) -> dict:
        return {"kind": "tensor-perturbation", "m": self.m, "eta": self.eta, "tensor_profile": self.profile}


class HomotopyMetric(MetricProvider):
    """Linear interpolation ``(1 - t) g_a + t g_b`` of two providers."""

    def __init__(self, a: MetricProvider, b: MetricProvider, t: float):
        HomotopyParam(t)
        self.a = a
        self.b = b
        self.t = float(t)
        self.m = a.m
        self.exact_schwarzschild = (t == 0.0 and a.exact_schwarzschild) or (
            t == 1.0 and b.exact_schwarzschild
        )

    def taylor(self, points: np.ndarray) -> np.ndarray:
        if self.t == 0.0:
            return self.a.taylor(points)
        if self.t == 1.0:
            return self.b.taylor(points)
        return (1.0 - self.t) * self.a.taylor(points) + self.t * self.b.taylor(points)

    def describe(self) -> dict:
        return {"kind": "homotopy", "t": self.t, "a": self.a.describe(), "b": self.b.describe()}


def make_provider(spec: PerturbationSpec, m: float) -> MetricProvider:
    """Provider for a :class:`PerturbationSpec` at mass ``m``."""
    if spec.kind == "exact-schwarzschild":
        return ConformalMetric(m)
    if spec.kind == "conformal-harmonic":
        return ConformalMetric(m, spec.eta, spec.multipoles)
    return TensorPerturbedMetric(m, spec.eta, spec.tensor_profile)


# -- pointwise operations --------------------------------------------------------


def schwarzschild_jet(params: SchwarzschildParams, x) -> MetricJet:
    """Exact Schwarzschild geometry at ``x`` (shape (..., 3))."""
    return ConformalMetric(params.m).jet(x)


def perturbed_jet(spec: PerturbationSpec, m: float, x) -> MetricJet:
    """Geometry of the test metric described by ``spec`` at ``x``."""
    return make_provider(spec, m).jet(x)


def riemann_from_ricci(jet: MetricJet) -> np.ndarray:
    """Three-dimensional Riemann tensor expressed through Ricci and scalar curvature.

    The result is also stored in ``jet.riemann``.
    """
    g, ric = jet.g, jet.ricci
    sc = jet.scalar[..., None, None, None, None]
    gg = np.einsum("...il,...jk->...ijkl", g, g) - np.einsum("...ik,...jl->...ijkl", g, g)
    riem = (
        np.einsum("...il,...jk->...ijkl", ric, g)
        - np.einsum("...ik,...jl->...ijkl", ric, g)
        - np.einsum("...jl,...ik->...ijkl", ric, g)
        + np.einsum("...jk,...il->...ijkl", ric, g)
        - 0.5 * sc * gg
    )
    jet.riemann = riem
    return riem


def homotopy_jet(a: MetricJet, b: MetricJet, t: float | HomotopyParam) -> MetricJet:
    """Interpolate two jets at the same point and recompute derived fields."""
    t = t.t if isinstance(t, HomotopyParam) else HomotopyParam(float(t)).t
    if a.taylor is None or b.taylor is None:
        raise ValueError("homotopy requires jets carrying their Taylor data")
    if t == 0.0:
        return a
    if t == 1.0:
        return b
    gT = (1.0 - t) * a.taylor + t * b.taylor
    _check_positive(gT[..., 0])
    return metric_jet_from_taylor(jet_algebra(3, JET_ORDER), gT)


def measure_eta(spec: PerturbationSpec, m: float, sample_radii, sample_directions) -> dict:
    """Weighted deviations from Schwarzschild over a set of sample points.

    Returns the suprema of ``r^2 |g - g^S|``, ``r^3 |Gamma - Gamma^S|``,
    ``r^4 |Ric - Ric^S|`` and ``r^5 |nabla Ric - nabla^S Ric^S|`` using the
    componentwise maximum in Cartesian coordinates, plus their maximum.
    """
    radii = np.asarray(sample_radii, dtype=float).ravel()
    dirs = np.asarray(sample_directions, dtype=float).reshape(-1, 3)
    if np.any(radii <= 0):
        raise ValueError("sample radii must be positive")
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    r = np.linalg.norm(pts, axis=1)
    jp = perturbed_jet(spec, m, pts)
    js = schwarzschild_jet(SchwarzschildParams(m), pts)

    def sup(diff, power):
        axes = tuple(range(1, diff.ndim))
        return float(np.max(r**power * np.max(np.abs(diff), axis=axes)))

    out = {
        "g": sup(jp.g - js.g, 2),
        "christoffel": sup(jp.christoffel - js.christoffel, 3),
        "ricci": sup(jp.ricci - js.ricci, 4),
        "nabla_ricci": sup(jp.nabla_ricci - js.nabla_ricci, 5),
    }
    out["max"] = max(out.values())
    return out
