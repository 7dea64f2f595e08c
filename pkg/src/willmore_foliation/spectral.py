"""Quadrature, spherical harmonics and spectral differentiation on the unit sphere.

Fields are sampled on a pole-free grid of uniform colatitudes
``theta_k = (k + 1/2) pi / ntheta`` and uniform longitudes, and integrated with
Fejer's first rule in ``cos(theta)``.  Spherical harmonics are real and
orthonormal, ``Y_l^m`` with ``m < 0`` selecting ``sin(|m| phi)``, no
Condon-Shortley phase, coefficient index ``l**2 + l + m``.

Derivatives of sampled fields are obtained by projecting onto harmonics of
degree ``<= M`` and differentiating the expansion exactly.  Colatitude
derivatives of the Legendre functions come from the ladder relation
``dP_l^m/dtheta = (c_- P_l^{m-1} - c_+ P_l^{m+1}) / 2`` which involves no
division by ``sin(theta)``, so chart derivatives keep full relative accuracy
near the poles.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["SphereGrid", "sphere_grid", "lm_arrays", "legendre_table", "fejer_weights"]


def lm_arrays(lmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Degree and order of every coefficient index up to ``lmax``."""
    l = np.concatenate([np.full(2 * k + 1, k) for k in range(lmax + 1)])
    m = np.concatenate([np.arange(-k, k + 1) for k in range(lmax + 1)])
    return l, m


def fejer_weights(n: int) -> np.ndarray:
    """Fejer first-rule weights for ``int_{-1}^{1} f(x) dx`` at ``x = cos(theta_k)``."""
    theta = (np.arange(n) + 0.5) * np.pi / n
    j = np.arange(1, n // 2 + 1)
    s = np.cos(2.0 * np.outer(theta, j)) / (4.0 * j**2 - 1.0)
    return (2.0 / n) * (1.0 - 2.0 * s.sum(axis=1))


def _legendre_raw(lmax: int, theta: np.ndarray) -> np.ndarray:
    # orthonormal in L^2(S^2) together with trig(m phi)/sqrt(pi) resp. 1/sqrt(2 pi)
    x = np.cos(theta)
    s = np.sin(theta)
    P = np.zeros((theta.size, lmax + 1, lmax + 2))
    pmm = np.full(theta.size, np.sqrt(1.0 / (4.0 * np.pi)))
    for m in range(lmax + 1):
        if m > 0:
            pmm = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        P[:, m, m] = pmm
        if m + 1 <= lmax:
            P[:, m + 1, m] = np.sqrt(2.0 * m + 3.0) * x * pmm
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[:, l, m] = a * (x * P[:, l - 1, m] - b * P[:, l - 2, m])
    return P


def _ladder(T: np.ndarray) -> np.ndarray:
    """Colatitude derivative of a table of functions obeying the Legendre ladder."""
    nl = T.shape[1]
    l = np.arange(nl)[:, None].astype(float)
    m = np.arange(T.shape[2])[None, :].astype(float)
    cm = np.sqrt(np.clip((l + m) * (l - m + 1.0), 0.0, None))
    cp = np.sqrt(np.clip((l - m) * (l + m + 1.0), 0.0, None))
    out = np.zeros_like(T)
    out[:, :, 0] = -cp[:, 0] * T[:, :, 1]
    out[:, :, 1:-1] = 0.5 * (cm[:, 1:-1] * T[:, :, :-2] - cp[:, 1:-1] * T[:, :, 2:])
    return out


def legendre_table(lmax: int, theta: np.ndarray, nderiv: int = 0):
    """Normalized associated Legendre functions and colatitude derivatives.

    Returns
    -------
    ndarray or list of ndarray, shape (len(theta), lmax + 1, lmax + 1)
        ``P[k, l, m]`` such that ``Y_l^m = P[k, l, |m|] * trig(m phi)``
        (the factor ``sqrt(2)`` for ``m != 0`` is included); zero for ``l < m``.
        With ``nderiv > 0`` a list of the table and its first ``nderiv``
        colatitude derivatives.
    """
    tables = [_legendre_raw(lmax, theta)]
    for _ in range(nderiv):
        tables.append(_ladder(tables[-1]))
    out = []
    for T in tables:
        T = T[:, :, : lmax + 1].copy()
        T[:, :, 1:] *= np.sqrt(2.0)
        out.append(T)
    return out if nderiv else out[0]


class SphereGrid:
    """Tensor-product grid on the unit sphere with spectral tools.

    Parameters
    ----------
    L : int
        Band limit of the surface representation.
    ntheta, nphi : int, optional
        Grid size.  The default ``ntheta = 3 L + 2`` integrates spherical
        polynomials of degree ``3 L + 1`` exactly, so products of three
        band-limited fields are projected without aliasing.
    M : int, optional
        Projection degree used to differentiate sampled fields; defaults to
        ``(ntheta - 1) // 2``, the largest degree whose projection is exact for
        fields of the same degree.
    """

    def __init__(self, L: int, ntheta: int | None = None, nphi: int | None = None, M: int | None = None):
        if L < 1:
            raise ValueError("band limit must be positive")
        self.L = int(L)
        self.ntheta = int(ntheta) if ntheta else 3 * self.L + 2
        self.nphi = int(nphi) if nphi else 2 * self.ntheta
        if self.nphi % 2:
            raise ValueError("nphi must be even")
        if self.ntheta < self.L + 1 or self.nphi < 2 * self.L + 1:
            raise ValueError("grid too coarse for the band limit")
        self.M = int(M) if M else max(self.L, (self.ntheta - 1) // 2)
        if self.M < self.L or self.nphi < 2 * self.M + 1:
            raise ValueError("projection degree incompatible with the grid")
        self.theta = (np.arange(self.ntheta) + 0.5) * np.pi / self.ntheta
        self.phi = 2.0 * np.pi * np.arange(self.nphi) / self.nphi
        self.shape = (self.ntheta, self.nphi)
        self.size = self.ntheta * self.nphi
        self.wtheta = fejer_weights(self.ntheta)
        self.weights = np.outer(self.wtheta, np.full(self.nphi, 2.0 * np.pi / self.nphi))
        # chart weights: int F dtheta dphi = sum chart_weights * F
        self.chart_weights = self.weights / np.sin(self.theta)[:, None]
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        self.sin_theta = st
        self.unit = np.stack([st * cp, st * sp, ct], axis=-1)
        self.unit_t = np.stack([ct * cp, ct * sp, -st], axis=-1)
        self.unit_p = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
        self.unit_tt = -self.unit
        self.unit_tp = np.stack([-ct * sp, ct * cp, np.zeros_like(st)], axis=-1)
        self.unit_pp = np.stack([-st * cp, -st * sp, np.zeros_like(st)], axis=-1)

        self.ncoef = (self.L + 1) ** 2
        self.l_of, self.m_of = lm_arrays(self.L)
        self._tables = legendre_table(self.M, self.theta, nderiv=3)
        mm = np.arange(self.M + 1)
        self._cos = np.cos(np.outer(self.phi, mm))
        self._sin = np.sin(np.outer(self.phi, mm))
        self._scatter = {}

    # -- quadrature ---------------------------------------------------------
    def integrate(self, f) -> np.ndarray:
        """``int_{S^2} f`` for fields of shape (..., ntheta, nphi)."""
        return np.einsum("...ij,ij->...", f, self.weights)

    # -- spherical harmonics --------------------------------------------------
    def _index(self, lmax: int):
        if lmax not in self._scatter:
            cl = np.array([l for l in range(lmax + 1) for m in range(0, l + 1)])
            cm = np.array([m for l in range(lmax + 1) for m in range(0, l + 1)])
            sl = np.array([l for l in range(lmax + 1) for m in range(1, l + 1)], dtype=int)
            sm = np.array([m for l in range(lmax + 1) for m in range(1, l + 1)], dtype=int)
            self._scatter[lmax] = (cl * cl + cl + cm, (cl, cm), sl * sl + sl - sm, (sl, sm))
        return self._scatter[lmax]

    @staticmethod
    def _degree(n: int) -> int:
        lmax = int(round(np.sqrt(n))) - 1
        if (lmax + 1) ** 2 != n:
            raise ValueError(f"coefficient length {n} is not a square")
        return lmax

    def _split(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        lmax = self._degree(c.shape[-1])
        if lmax > self.M:
            raise ValueError(f"degree {lmax} exceeds the projection degree {self.M}")
        ic, ilm, is_, slm = self._index(lmax)
        A = np.zeros(c.shape[:-1] + (lmax + 1, lmax + 1))
        B = np.zeros_like(A)
        A[..., ilm[0], ilm[1]] = c[..., ic]
        B[..., slm[0], slm[1]] = c[..., is_]
        return lmax, A, B

    def synth(self, coeffs) -> np.ndarray:
        """Evaluate coefficient vectors (..., (l+1)**2) at the grid."""
        return self.synth_derivs(coeffs, 0)[(0, 0)]

    def synth_derivs(self, coeffs, order: int = 2) -> dict:
        """Chart derivatives ``d_theta^a d_phi^b`` of an expansion, keyed ``(a, b)``.

        All pairs with ``a + b <= order`` (at most 3) are returned, including
        the value under ``(0, 0)``.
        """
        if order > 3:
            raise ValueError("derivatives up to order 3 are supported")
        lmax, A, B = self._split(coeffs)
        m = np.arange(lmax + 1, dtype=float)
        cos, sin = self._cos[:, : lmax + 1], self._sin[:, : lmax + 1]
        out = {}
        for a in range(order + 1):
            T = self._tables[a][:, : lmax + 1, : lmax + 1]
            Fa = np.einsum("tlm,...lm->...tm", T, A)
            Fb = np.einsum("tlm,...lm->...tm", T, B)
            for b in range(order + 1 - a):
                mb = m**b
                # d^b/dphi^b of cos(m phi), sin(m phi) cycles with period 4
                r = b % 4
                if r == 0:
                    cc, ss = Fa * mb, Fb * mb
                elif r == 1:
                    cc, ss = Fb * mb, -Fa * mb
                elif r == 2:
                    cc, ss = -Fa * mb, -Fb * mb
                else:
                    cc, ss = -Fb * mb, Fa * mb
                out[(a, b)] = cc @ cos.T + ss @ sin.T
        return out

    def analyze(self, f, lmax: int | None = None) -> np.ndarray:
        """Project fields (..., ntheta, nphi) onto harmonics of degree ``<= lmax``.

        ``lmax`` defaults to the surface band limit ``L``.
        """
        lmax = self.L if lmax is None else int(lmax)
        if lmax > self.M:
            raise ValueError(f"degree {lmax} exceeds the projection degree {self.M}")
        f = np.asarray(f, dtype=float)
        fw = f * self.weights
        Ga = fw @ self._cos[:, : lmax + 1]
        Gb = fw @ self._sin[:, : lmax + 1]
        T = self._tables[0][:, : lmax + 1, : lmax + 1]
        A = np.einsum("tlm,...tm->...lm", T, Ga)
        B = np.einsum("tlm,...tm->...lm", T, Gb)
        ic, ilm, is_, slm = self._index(lmax)
        out = np.zeros(f.shape[:-2] + ((lmax + 1) ** 2,))
        out[..., ic] = A[..., ilm[0], ilm[1]]
        out[..., is_] = B[..., slm[0], slm[1]]
        return out

    def basis(self, lmax: int | None = None) -> np.ndarray:
        """All harmonics up to ``lmax`` (default ``L``), shape (ncoef, ntheta, nphi)."""
        lmax = self.L if lmax is None else lmax
        return self.synth(np.eye((lmax + 1) ** 2))

    # -- differentiation of sampled fields ------------------------------------
    def project(self, f) -> np.ndarray:
        """Resample ``f`` through its degree-``M`` projection."""
        return self.synth(self.analyze(f, self.M))

    def derivs(self, f, order: int = 2) -> dict:
        """Chart derivatives of the degree-``M`` projection of sampled fields.

        Keys are ``(a, b)`` for ``d_theta^a d_phi^b`` with ``a + b <= order``;
        ``(0, 0)`` holds the projected field itself.
        """
        return self.synth_derivs(self.analyze(f, self.M), order)

    def gradient(self, f) -> np.ndarray:
        """First chart derivatives on a new leading axis: (2, ..., ntheta, nphi)."""
        d = self.derivs(f, 1)
        return np.stack([d[(1, 0)], d[(0, 1)]])


@lru_cache(maxsize=16)
def sphere_grid(L: int, ntheta: int | None = None, nphi: int | None = None, M: int | None = None) -> SphereGrid:
    """Cached :class:`SphereGrid`."""
    return SphereGrid(L, ntheta, nphi, M)
