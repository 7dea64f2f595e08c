"""Truncated multivariate Taylor jets with tensor-valued coefficients.

A jet array has shape ``(*batch, *tensor, ncoef)``; the last axis holds the
Taylor coefficients ``a_alpha`` of ``f(x0 + h) = sum_alpha a_alpha h**alpha``
for all multi-indices ``|alpha| <= order``.  The metric providers use jets in
three variables to obtain exact derivatives of closed-form metrics.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from math import factorial

import numpy as np

__all__ = ["JetAlgebra", "jet_algebra"]


class JetAlgebra:
    """Arithmetic on truncated Taylor jets.

    Parameters
    ----------
    nvars : int
        Number of independent variables.
    order : int
        Truncation order.
    """

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        idx = []
        for k in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), k):
                alpha = [0] * nvars
                for c in combo:
                    alpha[c] += 1
                idx.append(tuple(alpha))
        self.multi = idx
        self.ncoef = len(idx)
        self.index = {a: i for i, a in enumerate(idx)}
        self.degree = np.array([sum(a) for a in idx])

        # pair tables for products truncated at each order k <= order
        self._pairs = []
        for kmax in range(order + 1):
            pa, pb, pc = [], [], []
            for i, a in enumerate(idx):
                for j, b in enumerate(idx):
                    c = tuple(x + y for x, y in zip(a, b))
                    if sum(c) <= kmax:
                        pa.append(i)
                        pb.append(j)
                        pc.append(self.index[c])
            scatter = np.zeros((len(pa), self.ncoef))
            scatter[np.arange(len(pa)), pc] = 1.0
            self._pairs.append((np.array(pa), np.array(pb), scatter))

        # d/dx_i maps coefficient alpha + e_i to alpha with factor alpha_i + 1
        self._dsrc = []
        self._dfac = []
        for i in range(nvars):
            src = np.zeros(self.ncoef, dtype=int)
            fac = np.zeros(self.ncoef)
            for j, a in enumerate(idx):
                up = list(a)
                up[i] += 1
                up = tuple(up)
                if up in self.index:
                    src[j] = self.index[up]
                    fac[j] = a[i] + 1
            self._dsrc.append(src)
            self._dfac.append(fac)
        self.factorials = np.array(
            [np.prod([factorial(x) for x in a]) for a in idx], dtype=float
        )

    # construction -------------------------------------------------------
    def constant(self, value) -> np.ndarray:
        value = np.asarray(value, dtype=float)
        out = np.zeros(value.shape + (self.ncoef,))
        out[..., 0] = value
        return out

    def variables(self, points) -> list[np.ndarray]:
        """Jets of the coordinate functions expanded about ``points``."""
        points = np.asarray(points, dtype=float)
        out = []
        for i in range(self.nvars):
            v = self.constant(points[..., i])
            e = [0] * self.nvars
            e[i] = 1
            v[..., self.index[tuple(e)]] = 1.0
            out.append(v)
        return out

    # arithmetic ---------------------------------------------------------
    def mul(self, a: np.ndarray, b: np.ndarray, order: int | None = None) -> np.ndarray:
        """Elementwise product with broadcasting over leading axes.

        ``order`` truncates the result below the algebra's order.
        """
        pa, pb, scatter = self._pairs[self.order if order is None else order]
        return (a[..., pa] * b[..., pb]) @ scatter

    def contract(
        self, subscripts: str, a: np.ndarray, b: np.ndarray, order: int | None = None
    ) -> np.ndarray:
        """Tensor contraction of two jets, e.g. ``'ij,jk->ik'``.

        Leading batch axes are handled by an implicit ellipsis.
        """
        pa, pb, scatter = self._pairs[self.order if order is None else order]
        ins, out = subscripts.split("->")
        sa, sb = ins.split(",")
        spec = f"...{sa}Z,...{sb}Z->...{out}Z"
        return np.einsum(spec, a[..., pa], b[..., pb], optimize=True) @ scatter

    def apply(self, a: np.ndarray, derivs) -> np.ndarray:
        """Compose a scalar function with a jet.

        Parameters
        ----------
        a : ndarray
            Jet array.
        derivs : sequence of ndarray
            ``derivs[k]`` is the k-th derivative of the function evaluated at
            the constant term of ``a``, for ``k = 0..order``.
        """
        delta = a.copy()
        delta[..., 0] = 0.0
        out = self.constant(derivs[0])
        power = None
        for k in range(1, self.order + 1):
            power = delta if power is None else self.mul(power, delta)
            out = out + (np.asarray(derivs[k])[..., None] / factorial(k)) * power
        return out

    def power(self, a: np.ndarray, p: float) -> np.ndarray:
        """``a**p`` for real exponent ``p`` (constant term must be positive)."""
        a0 = a[..., 0]
        derivs = []
        coef = 1.0
        for k in range(self.order + 1):
            derivs.append(coef * a0 ** (p - k))
            coef *= p - k
        return self.apply(a, derivs)

    def reciprocal(self, a: np.ndarray) -> np.ndarray:
        return self.power(a, -1.0)

    def inverse_matrix(self, a: np.ndarray, order: int | None = None) -> np.ndarray:
        """Matrix inverse of a square-matrix-valued jet by Neumann series."""
        order = self.order if order is None else order
        a0inv = np.linalg.inv(a[..., 0])
        delta = a.copy()
        delta[..., 0] = 0.0
        # x = -a0^{-1} delta
        x = -np.einsum("...ij,...jkZ->...ikZ", a0inv, delta)
        out = self.constant(np.broadcast_to(np.eye(a.shape[-2]), a.shape[:-1]).copy())
        term = out
        for _ in range(order):
            term = self.contract("ij,jk->ik", x, term, order)
            out = out + term
        return np.einsum("...ijZ,...jk->...ikZ", out, a0inv)

    def diff(self, a: np.ndarray, i: int) -> np.ndarray:
        """Partial derivative in variable ``i``; loses one order of validity."""
        return a[..., self._dsrc[i]] * self._dfac[i]

    def grad(self, a: np.ndarray) -> np.ndarray:
        """Stack of partial derivatives along a new trailing tensor axis."""
        return np.stack([self.diff(a, i) for i in range(self.nvars)], axis=-2)

    def value(self, a: np.ndarray) -> np.ndarray:
        return a[..., 0]

    def derivative(self, a: np.ndarray, alpha) -> np.ndarray:
        """The partial derivative ``d^alpha f`` at the expansion point."""
        i = self.index[tuple(alpha)]
        return a[..., i] * self.factorials[i]


@lru_cache(maxsize=None)
def jet_algebra(nvars: int, order: int) -> JetAlgebra:
    """Cached :class:`JetAlgebra` instance."""
    return JetAlgebra(nvars, order)
