"""Closed-form sphere integrals and exact Schwarzschild formulas.

The sphere integrals are over ``S = S_R(a e)`` in Euclidean space, with ``r``
the distance to the origin and ``cos(phi) = <e, N>`` for the outer normal
``N``.  Writing ``r**2 = R**2 + 2 R a cos(phi) + a**2`` reduces

    C_k^l = int_S cos(phi)**l / r**k dmu

to ``(2 pi R / a) (2 R a)**(-l) int_{R-a}^{R+a} r**(1-k) (r**2 - R**2 - a**2)**l dr``,
whose antiderivative is a finite sum of powers and at most one logarithm.
For small ``a / R`` the difference of antiderivatives cancels
catastrophically, and the generating function of the Gegenbauer polynomials
gives a convergent power series in ``a / R`` instead.

:func:`quad_sphere` is an independent Gauss-Legendre adjudicator.
"""

from __future__ import annotations

from math import comb, log, pi

import numpy as np
from scipy.special import eval_gegenbauer

__all__ = [
    "SUPPORTED_KL",
    "c_kl",
    "e1",
    "e2",
    "f_tau",
    "q_closed",
    "q_bar",
    "lambda_of_r",
    "r_of_lambda",
    "mean_curvature_centered",
    "quad_sphere",
    "QuadratureError",
]

SUPPORTED_KL = ((1, 1), (3, 0), (3, 1), (5, 0), (5, 1), (5, 2), (6, 1), (6, 2), (8, 0), (8, 1), (8, 2), (8, 3))

SERIES_CROSSOVER = 0.05
SERIES_TERMS = 40
TAU_STAR = 1e-3
# odd Taylor coefficients of f(tau) = sum c_n tau**(2n+1)
F_SERIES = (-32.0, -384.0 / 5, -960.0 / 7, -640.0 / 3, -3360.0 / 11, -5376.0 / 13, -2688.0 / 5)


class QuadratureError(RuntimeError):
    """Raised when the adjudicating quadrature does not reach its tolerance."""


def _check_sphere(R: float, a: float):
    if not R > 0:
        raise ValueError(f"sphere radius must be positive, got {R}")
    if not 0 <= a < R:
        raise ValueError(f"center offset must satisfy 0 <= a < R, got a={a}, R={R}")


def _antiderivative_sum(k: int, l: int, R: float, a: float) -> float:
    s = R * R + a * a
    lo, hi = R - a, R + a
    total = 0.0
    for j in range(l + 1):
        p = 1 - k + 2 * j
        c = comb(l, j) * (-s) ** (l - j)
        if p == -1:
            total += c * log(hi / lo)
        else:
            total += c * (hi ** (p + 1) - lo ** (p + 1)) / (p + 1)
    return 2.0 * pi * R / a * (2.0 * R * a) ** (-l) * total


def _gegenbauer_series(k: int, l: int, R: float, a: float) -> float:
    t = a / R
    n = np.arange(SERIES_TERMS)
    x, w = np.polynomial.legendre.leggauss((SERIES_TERMS + l) // 2 + 2)
    moments = np.array([np.sum(w * x**l * eval_gegenbauer(int(j), k / 2.0, x)) for j in n])
    return 2.0 * pi * R ** (2 - k) * float(np.sum((-t) ** n * moments))


def c_kl(R: float, a: float, k: int, l: int) -> float:
    """Closed form of ``int_{S_R(a e)} cos(phi)**l / r**k dmu``.

    Parameters
    ----------
    R, a : float
        Radius and center offset, ``0 <= a < R``.
    k, l : int
        Inverse-distance power and cosine power.
    """
    _check_sphere(R, a)
    k, l = int(k), int(l)
    if k < 0 or l < 0:
        raise ValueError("k and l must be non-negative")
    if a / R < SERIES_CROSSOVER:
        return _gegenbauer_series(k, l, R, a)
    return _antiderivative_sum(k, l, R, a)


def e1(R: float, a: float) -> float:
    """``C_3^0 - 3 R^2 C_5^0 - 6 R a C_5^1 - 3 a^2 C_5^2``; equals ``-8 pi / R`` at ``a = 0``."""
    return c_kl(R, a, 3, 0) - 3 * R * R * c_kl(R, a, 5, 0) - 6 * R * a * c_kl(R, a, 5, 1) - 3 * a * a * c_kl(R, a, 5, 2)


def e2(m: float, a: float) -> float:
    """``int_S (3 m / r) cos(phi) dmu = -4 pi m a`` for every ``R > a``."""
    if a < 0:
        raise ValueError("center offset must be non-negative")
    return -4.0 * pi * m * a


def q_bar(R: float, a: float) -> float:
    """Sphere integral of ``r**-5 <rho, N> (<b, N> - <rho, N><b, rho>)`` through the ``C_k^l``."""
    C = lambda k, l: c_kl(R, a, k, l)  # noqa: E731
    return (
        R * C(6, 1)
        + a * C(6, 2)
        - a * R * R * C(8, 0)
        - (R**3 + 2 * a * a * R) * C(8, 1)
        - (2 * a * R * R + a**3) * C(8, 2)
        - a * a * R * C(8, 3)
    )


def f_tau(tau: float) -> float:
    """Shape factor of the ``V`` variation on an off-center sphere, ``-32 tau + O(tau^3)``."""
    tau = float(tau)
    if not 0 <= tau < 1:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    if tau < TAU_STAR:
        return float(sum(c * tau ** (2 * n + 1) for n, c in enumerate(F_SERIES)))
    one = 1.0 - tau * tau
    num = -3.0 * one**3 * (-2.0 * np.arctanh(tau)) + 6 * tau**5 - 16 * tau**3 - 6 * tau
    return float(num / (tau * tau * one**3))


def mean_curvature_centered(m: float, R: float) -> float:
    """Schwarzschild mean curvature of the centered coordinate sphere of radius ``R``."""
    phi = 1.0 + m / (2.0 * R)
    return 2.0 / (phi**2 * R) - 2.0 * m / (phi**3 * R * R)


def q_closed(m: float, R_e: float, tau: float) -> float:
    """``m^2 pi f(tau) / (4 phi^7 H R_e^3)`` with ``phi = 1 + m/(2 R_e)`` and ``H`` the centered-sphere value."""
    phi = 1.0 + m / (2.0 * R_e)
    H = mean_curvature_centered(m, R_e)
    return m * m * pi * f_tau(tau) / (4.0 * phi**7 * H * R_e**3)


def lambda_of_r(m: float, r: float) -> float:
    """Multiplier ``2 m r^-3 (1 + m / 2r)^-6`` of the centered Schwarzschild sphere."""
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    return 2.0 * m / r**3 * (1.0 + m / (2.0 * r)) ** -6


def r_of_lambda(m: float, lam: float, rtol: float = 1e-14) -> float:
    """Invert :func:`lambda_of_r` on the branch ``r > m`` by Newton's method in ``log r``."""
    if not m > 0:
        raise ValueError("inversion requires m > 0")
    lam_max = lambda_of_r(m, m)
    if not 0 < lam < lam_max:
        raise ValueError(f"lambda must lie in (0, {lam_max:.6g}) for m={m}, got {lam}")
    target = log(lam)
    x = log(max((2.0 * m / lam) ** (1.0 / 3.0), 1.01 * m))
    for _ in range(100):
        r = np.exp(x)
        phi = 1.0 + m / (2.0 * r)
        g = log(lambda_of_r(m, r)) - target
        dg = 3.0 * (m / (r * phi) - 1.0)  # d log(lambda) / d log(r)
        step = g / dg
        x = max(x - step, log(m))
        if abs(step) < rtol:
            return float(np.exp(x))
    raise RuntimeError("radius inversion did not converge")


def quad_sphere(fn, R: float, a: float, resolution: int = 32, tol: float = 1e-11, max_resolution: int = 4096) -> float:
    """Integrate ``fn(x, N)`` over the Euclidean sphere ``S_R(a e_1)``.

    Gauss-Legendre in the polar angle about ``e_1`` and the trapezoidal rule
    in the azimuth; the resolution doubles until two consecutive values agree
    to ``tol`` (relative, or absolute below unit magnitude).

    Parameters
    ----------
    fn : callable
        Maps points ``x`` and outer unit normals ``N`` (arrays (..., 3)) to values.
    """
    if not R > 0 or a < 0:
        raise ValueError(f"need R > 0 and a >= 0, got R={R}, a={a}")

    def rule(n):
        x, w = np.polynomial.legendre.leggauss(n)
        az = 2.0 * pi * np.arange(2 * n) / (2 * n)
        s = np.sqrt(1.0 - x * x)
        N = np.stack(
            [np.broadcast_to(x[:, None], (n, 2 * n)), s[:, None] * np.cos(az), s[:, None] * np.sin(az)], axis=-1
        )
        pts = R * N + np.array([a, 0.0, 0.0])
        vals = np.asarray(fn(pts, N), dtype=float)
        return float(R * R * (2.0 * pi / (2 * n)) * np.sum(w[:, None] * vals))

    n = int(resolution)
    prev = rule(n)
    while n < max_resolution:
        n *= 2
        cur = rule(n)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise QuadratureError(f"sphere quadrature reached only {abs(cur - prev):.3e} at resolution {n}")
