"""Newton solver, continuation and foliation assembly for the area-constrained equation.

Unknowns are the harmonic coefficients of the radial function of a graph over
a fixed center.  Moving the coefficients by ``dc`` moves the surface by
``du = sum dc_j Y_j`` along the coordinate radial direction, which has normal
speed ``alpha = du g(e_r, nu)``.  Residuals are compared at fixed sphere
directions, so the Jacobian column of ``Y_j`` is

    W_lambda(Y_j q) + Y_j s(grad F),   q = g(e_r, nu),

with ``s`` the tangential part of ``e_r``.  The Newton system is the
projection of this onto harmonics of degree ``<= L``.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .metric import ConformalMetric, HomotopyMetric, MetricProvider, PerturbationSpec, make_provider
from .oracle import lambda_of_r, mean_curvature_centered, r_of_lambda
from .surface import RadialGraph, SurfaceGeometry, approximating_sphere, build_graph, geometry
from .willmore import (
    apply_Wlambda,
    assemble_Wlambda,
    closure_defect,
    functionals,
    spectrum,
    tangential_shift,
    willmore_residual,
    wlambda_coercivity,
)

__all__ = [
    "NewtonConfig",
    "NewtonFailure",
    "ContinuationFailure",
    "Leaf",
    "FoliationResult",
    "solve_leaf",
    "centered_sphere",
    "perturbed_sphere",
    "coercivity",
    "continue_metric",
    "foliate",
    "lambda_ladder",
    "decay_sweep",
    "leaf_report",
    "LEAF_COLUMNS",
    "DECAY_DIAGNOSTICS",
    "worker_count",
]

JACOBIAN_CHUNK = 96
MAX_LADDER_RATIO = 1.3


@dataclass(frozen=True)
class NewtonConfig:
    """Newton iteration settings.

    Attributes
    ----------
    residual_tol : float
        Target for ``||F||_inf / ||lambda H||_inf``.
    max_iters : int
    damping : int
        Maximal number of step halvings per iteration.
    preconditioner : {'none', 'schwarzschild-sphere'}
        Column scaling by the centered Schwarzschild sphere eigenvalues of
        ``W_lambda``, which are diagonal in the harmonic basis.
    regularize_floor : float
        Smallest admissible Jacobian singular value in units of ``R_S**-6``.
    """

    residual_tol: float = 1e-9
    max_iters: int = 12
    damping: int = 8
    preconditioner: str = "schwarzschild-sphere"
    regularize_floor: float = 1e-6

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")
        if self.preconditioner not in ("none", "schwarzschild-sphere"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


class NewtonFailure(RuntimeError):
    """Newton did not converge.

    Attributes
    ----------
    reason : {'divergence', 'nonpositive-mean-curvature', 'singular-jacobian', 'max-iterations'}
    trace : list of float
        Relative residual norms of the accepted iterates.
    """

    def __init__(self, reason: str, trace, message: str = ""):
        super().__init__(f"{reason}: {message}" if message else reason)
        self.reason = reason
        self.trace = list(trace)


class ContinuationFailure(RuntimeError):
    """Metric continuation stalled; ``t_last`` is the last parameter reached."""

    def __init__(self, t_last: float, leaf: "Leaf", message: str = ""):
        super().__init__(message or f"continuation stalled at t={t_last}")
        self.t_last = float(t_last)
        self.leaf = leaf


@dataclass(eq=False)
class Leaf:
    """A converged solution with its diagnostics."""

    lam: float
    graph: RadialGraph
    diagnostics: dict
    trace: list = field(default_factory=list)
    geom: SurfaceGeometry | None = field(default=None, repr=False)


@dataclass(eq=False)
class FoliationResult:
    """Leaves ordered by decreasing multiplier (inside out).

    ``failure_index`` is the ladder position of the first failed leaf, or
    ``None`` when every leaf converged.
    """

    leaves: list
    min_radial_gap: float
    monotonicity_violations: int
    hawking_tolerance: float
    failure_index: int | None = None
    failure: str | None = None

    @property
    def complete(self) -> bool:
        return self.failure_index is None


# -- Newton ------------------------------------------------------------------------
def _relative_residual(geom: SurfaceGeometry, lam: float):
    F = willmore_residual(geom, lam)
    scale = np.max(np.abs(lam * geom.H))
    return F, float(np.max(np.abs(F)) / scale)


def _jacobian(geom: SurfaceGeometry, lam: float, F: np.ndarray) -> np.ndarray:
    G = geom.grid
    q = np.einsum("a...,a...->...", geom.radial_dir, geom.nu_low)
    transport = np.einsum("k...,k...->...", tangential_shift(geom, 1.0), geom.gradient(F))
    basis = G.basis()
    n = basis.shape[0]
    J = np.empty((n, n))
    for start in range(0, n, JACOBIAN_CHUNK):
        Y = basis[start : start + JACOBIAN_CHUNK]
        cols = apply_Wlambda(geom, Y * q, lam) + Y * transport
        J[:, start : start + Y.shape[0]] = G.analyze(cols).T
    return J


def _sphere_scaling(provider: MetricProvider, lam: float, graph: RadialGraph) -> np.ndarray:
    """``1 / |w_l|`` with ``w_l`` the centered-sphere eigenvalues of ``W_lambda``."""
    m = provider.m
    R_e = float(np.sqrt(graph.grid.integrate(graph.radial() ** 2) / (4.0 * np.pi)))
    phi = 1.0 + m / (2.0 * R_e)
    R_S = phi**2 * R_e
    H = mean_curvature_centered(m, R_e)
    jet = ConformalMetric(m).jet(np.array([[R_e, 0.0, 0.0]]))
    nu = np.array([phi**-2, 0.0, 0.0])
    d_ric = float(np.einsum("kij,k,i,j->", jet.nabla_ricci[0], nu, nu, nu))
    ric_nn = float(nu @ jet.ricci[0] @ nu)
    l = graph.grid.l_of
    mu = l * (l + 1) / R_S**2 - H * H - ric_nn
    w = mu * mu + (0.5 * H * H - lam) * mu - H * d_ric
    floor = 1e-3 * np.max(np.abs(w)) * (graph.L + 1) ** -4
    return 1.0 / np.maximum(np.abs(w), floor)


def _check_mean_curvature(geom: SurfaceGeometry) -> bool:
    return bool(np.all(geom.H > 0))


def solve_leaf(provider: MetricProvider, lam: float, initial: RadialGraph, cfg: NewtonConfig | None = None) -> Leaf:
    """Solve the area-constrained equation at fixed ``lam`` by damped Newton.

    Parameters
    ----------
    provider : MetricProvider
    lam : float
        Multiplier, positive.
    initial : RadialGraph
        Starting surface with ``H > 0``; its center stays fixed.
    cfg : NewtonConfig, optional

    Returns
    -------
    Leaf

    Raises
    ------
    NewtonFailure
    """
    cfg = NewtonConfig() if cfg is None else cfg
    if not lam > 0:
        raise ValueError("lambda must be positive")
    geom = geometry(initial, provider)
    if not _check_mean_curvature(geom):
        raise NewtonFailure("nonpositive-mean-curvature", [], "initial surface has H <= 0")
    F, res = _relative_residual(geom, lam)
    trace = [res]
    scaling = None
    if cfg.preconditioner == "schwarzschild-sphere":
        scaling = _sphere_scaling(provider, lam, initial)
    for _ in range(cfg.max_iters):
        if res <= cfg.residual_tol:
            break
        J = _jacobian(geom, lam, F)
        rhs = -geom.grid.analyze(F)
        Js = J * scaling if scaling is not None else J
        R_S = _area_radius(geom)
        smin = scipy.linalg.svdvals(J)[-1]
        if smin < cfg.regularize_floor * R_S**-6:
            raise NewtonFailure("singular-jacobian", trace, f"smallest singular value {smin:.3e}")
        step = scipy.linalg.solve(Js, rhs)
        if scaling is not None:
            step = step * scaling
        accepted = False
        t = 1.0
        for _ in range(cfg.damping + 1):
            try:
                cand = geometry(geom.graph.with_coeffs(geom.graph.coeffs + t * step), provider)
            except ValueError:
                t *= 0.5
                continue
            if _check_mean_curvature(cand):
                Fc, rc = _relative_residual(cand, lam)
                if np.isfinite(rc) and rc < res:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            raise NewtonFailure("divergence", trace, f"no decrease after {cfg.damping} halvings")
        geom, F, res = cand, Fc, rc
        trace.append(res)
    if res > cfg.residual_tol:
        raise NewtonFailure("max-iterations", trace, f"relative residual {res:.3e} after {cfg.max_iters} iterations")
    diag = _diagnostics(geom, lam, res)
    diag["newton_tail"] = _quadratic_tail(trace, cfg.residual_tol)
    return Leaf(float(lam), geom.graph, diag, trace, geom)


def _quadratic_tail(trace, tol: float) -> float:
    """Largest ``r_{k+1} / r_k**2`` over steps that end above ``tol``.

    Steps landing below the tolerance sit on the discretization floor and
    carry no information about the convergence order.
    """
    ratios = [b / a**2 for a, b in zip(trace[:-1], trace[1:]) if b > tol]
    return float(max(ratios)) if ratios else float("nan")


def _area_radius(geom: SurfaceGeometry) -> float:
    return float(np.sqrt(geom.area / (4.0 * np.pi)))


def centered_sphere(m: float, lam: float, L: int) -> RadialGraph:
    """Centered coordinate sphere of radius ``r_of_lambda(m, lam)``."""
    return build_graph(np.zeros(3), r_of_lambda(m, lam), L)


def perturbed_sphere(m: float, lam: float, L: int, amplitude: float, rng: np.random.Generator, degree: int = 4):
    """Centered sphere plus a random smooth radial perturbation.

    The perturbation has harmonics of degree ``1..degree`` with Gaussian
    coefficients, rescaled so that its sup norm is ``amplitude`` times the
    sphere radius.
    """
    base = centered_sphere(m, lam, L)
    if amplitude == 0:
        return base
    n = (degree + 1) ** 2
    noise = np.zeros(base.grid.ncoef)
    noise[1:n] = rng.normal(size=n - 1)
    u = base.grid.synth(noise)
    R = r_of_lambda(m, lam)
    noise *= amplitude * R / np.max(np.abs(u))
    return base.with_coeffs(base.coeffs + noise)


# -- diagnostics -------------------------------------------------------------------
def _diagnostics(geom: SurfaceGeometry, lam: float, res: float) -> dict:
    m = geom.provider.m
    sph = approximating_sphere(geom.graph)
    R_e = sph.R_e
    phi_bar = 1.0 + m / (2.0 * R_e)
    R_S = phi_bar**2 * R_e
    rec = functionals(geom)
    x = geom.x
    r = np.linalg.norm(x, axis=0)
    phi = 1.0 + m / (2.0 * r)
    nu_gap = np.max(np.linalg.norm(geom.nu - x / r / phi**2, axis=0))
    G = geom.ricci - 0.5 * geom.scalar * geom.g
    flux = geom.integrate(np.einsum("ab...,b...->a...", G, geom.nu))
    eta = getattr(geom.provider, "eta", 0.0)
    return {
        "area": rec.area,
        "R_e": R_e,
        "a_e": [float(v) for v in sph.a_e],
        "tau": sph.tau,
        "R_S": R_S,
        "r_min": float(np.min(r)),
        "hawking": rec.hawking,
        "lambda_gap": float(lam - 2.0 * m / R_S**3),
        "a0_l2": float(np.sqrt(rec.u_energy)),
        "a0_sup": float(np.sqrt(np.max(geom.norm_A02))),
        "gradH_sup": float(np.sqrt(np.max(geom.vector_norm2(geom.dH)))),
        "H_gap": float(np.max(np.abs(geom.H - mean_curvature_centered(m, R_e)))),
        "nu_gap": float(nu_gap),
        "lambda_ric_gap": float(np.max(np.abs(lam + geom.ric_nn))),
        "pohozaev": float(np.linalg.norm(flux)),
        "closure": closure_defect(geom, lam),
        "residual_norm": float(res),
        "eta_used": float(eta),
        "willmore": rec.willmore,
        "u_energy": rec.u_energy,
        "v_energy": rec.v_energy,
    }


N_EIGEN = 9
LEAF_COLUMNS = (
    ("lambda", "area", "R_e", "a_e_x", "a_e_y", "a_e_z", "tau", "R_S", "r_min", "hawking", "lambda_gap")
    + ("a0_l2", "a0_sup", "gradH_sup", "H_gap", "nu_gap", "lambda_ric_gap", "pohozaev", "closure")
    + ("residual_norm", "newton_tail", "eta_used", "willmore", "u_energy", "v_energy", "iterations")
    + tuple(f"jacobi_ev{i}" for i in range(N_EIGEN))
)


def leaf_report(leaf: Leaf, eigenvalues: bool = True) -> dict:
    """Flatten a leaf into one row keyed by :data:`LEAF_COLUMNS`.

    The Jacobi eigenvalues need a dense assembly; with ``eigenvalues=False``
    those columns are NaN.
    """
    d = leaf.diagnostics
    row = {"lambda": leaf.lam}
    for k in LEAF_COLUMNS[1:]:
        if k.startswith("a_e_"):
            row[k] = d["a_e"]["xyz".index(k[-1])]
        elif k == "iterations":
            row[k] = len(leaf.trace) - 1
        elif not k.startswith("jacobi_ev"):
            row[k] = d[k]
    ev = np.full(N_EIGEN, np.nan)
    if eigenvalues:
        if leaf.geom is None:
            raise ValueError("leaf carries no geometry")
        geom = leaf.geom
        ev = spectrum(assemble_Wlambda(geom, leaf.lam, with_W=False), N_EIGEN).values
    for i in range(N_EIGEN):
        row[f"jacobi_ev{i}"] = float(ev[i])
    return row


def coercivity(leaf: Leaf) -> float:
    """Smallest eigenvalue of ``W_lambda`` on the complement of the first Jacobi mode."""
    return wlambda_coercivity(assemble_Wlambda(leaf.geom, leaf.lam))


# -- continuation ------------------------------------------------------------------
def continue_metric(
    m: float,
    target: PerturbationSpec | MetricProvider,
    lam: float,
    steps: int,
    cfg: NewtonConfig | None = None,
    L: int = 16,
    min_step: float = 1.0 / 1024,
) -> Leaf:
    """March ``t`` from 0 to 1 along ``(1 - t) g^S + t g`` starting at the centered sphere.

    Failed steps are halved; the previous leaf seeds each solve.

    Raises
    ------
    ContinuationFailure
        When the step falls below ``min_step``.
    """
    cfg = NewtonConfig() if cfg is None else cfg
    if steps < 1:
        raise ValueError("steps must be at least 1")
    base = ConformalMetric(m)
    goal = make_provider(target, m) if isinstance(target, PerturbationSpec) else target
    leaf = solve_leaf(base, lam, centered_sphere(m, lam, L), cfg)
    t, dt = 0.0, 1.0 / steps
    while t < 1.0:
        t_next = min(1.0, t + dt)
        try:
            leaf = solve_leaf(HomotopyMetric(base, goal, t_next), lam, leaf.graph, cfg)
            t = t_next
        except NewtonFailure:
            dt *= 0.5
            if dt < min_step:
                raise ContinuationFailure(t, leaf) from None
    return leaf


def lambda_ladder(lam_max: float, lam_min: float, n_leaves: int, max_ratio: float = MAX_LADDER_RATIO):
    """Geometric ladder of ``n_leaves`` multipliers and the substeps between them.

    Returns
    -------
    leaves : ndarray
        Reported multipliers, decreasing.
    path : list of (float, bool)
        Every multiplier to solve, flagged when it is a reported leaf.
    """
    if not 0 < lam_min < lam_max:
        raise ValueError("need 0 < lam_min < lam_max")
    if n_leaves < 2:
        raise ValueError("a ladder needs at least two leaves")
    leaves = np.geomspace(lam_max, lam_min, n_leaves)
    path = [(float(leaves[0]), True)]
    for hi, lo in zip(leaves[:-1], leaves[1:]):
        k = int(np.ceil(np.log(hi / lo) / np.log(max_ratio) - 1e-12))
        for s in np.geomspace(hi, lo, k + 1)[1:-1]:
            path.append((float(s), False))
        path.append((float(lo), True))
    return leaves, path


def _rescaled_seed(graph: RadialGraph, factor: float) -> RadialGraph:
    return graph.with_coeffs(graph.coeffs * factor)


def foliate(
    provider: MetricProvider,
    m: float,
    lam_max: float,
    lam_min: float,
    n_leaves: int,
    cfg: NewtonConfig | None = None,
    L: int = 16,
    hawking_tolerance: float = 1e-9,
) -> FoliationResult:
    """Solve a geometric multiplier ladder, each leaf seeding the next.

    Intermediate multipliers keep adjacent ratios below 1.3.  A failure
    stops the ladder and is reported with its position.
    """
    cfg = NewtonConfig() if cfg is None else cfg
    _, path = lambda_ladder(lam_max, lam_min, n_leaves)
    leaves = []
    seed = centered_sphere(m, path[0][0], L)
    prev_lam = None
    failure_index = failure = None
    for lam, reported in path:
        if prev_lam is not None:
            seed = _rescaled_seed(seed, r_of_lambda(m, lam) / r_of_lambda(m, prev_lam))
        try:
            leaf = solve_leaf(provider, lam, seed, cfg)
        except NewtonFailure as exc:
            failure_index, failure = len(leaves), str(exc)
            break
        seed, prev_lam = leaf.graph, lam
        if reported:
            leaves.append(leaf)
    gap, violations = _foliation_checks(leaves, hawking_tolerance)
    return FoliationResult(leaves, gap, violations, hawking_tolerance, failure_index, failure)


def _foliation_checks(leaves, tol: float):
    gap = np.inf
    violations = 0
    for inner, outer in zip(leaves[:-1], leaves[1:]):
        if not np.allclose(inner.graph.center, outer.graph.center):
            raise ValueError("leaves must share the graph center")
        gap = min(gap, float(np.min(outer.graph.radial() - inner.graph.radial())))
        if outer.diagnostics["hawking"] < inner.diagnostics["hawking"] - tol:
            violations += 1
    return (gap if np.isfinite(gap) else float("nan")), violations


# -- decay measurements ------------------------------------------------------------
DECAY_DIAGNOSTICS = ("tau", "a0_sup", "H_gap", "gradH_sup", "nu_gap", "lambda_ric_gap", "lambda_gap", "pohozaev")


def worker_count() -> int:
    """Worker cap from ``WILLMORE_THREADS`` (default 1)."""
    raw = os.environ.get("WILLMORE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"WILLMORE_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _sweep_case(args):
    spec, m, eta, radii, cfg, L = args
    provider = make_provider(spec.with_eta(eta), m)
    rows, errors = [], []
    seed = None
    prev_r = None
    for r in sorted(radii):
        lam = lambda_of_r(m, r)
        init = centered_sphere(m, lam, L) if seed is None else _rescaled_seed(seed, r / prev_r)
        try:
            leaf = solve_leaf(provider, lam, init, cfg)
        except NewtonFailure as exc:
            errors.append({"eta": eta, "r": r, "error": str(exc)})
            continue
        seed, prev_r = leaf.graph, r
        row = {"eta": eta, "r": r, "lambda": lam, "iterations": len(leaf.trace) - 1}
        row.update({k: leaf.diagnostics[k] for k in DECAY_DIAGNOSTICS + ("r_min", "R_S", "residual_norm")})
        rows.append(row)
    return rows, errors


def _fit(rows, key: str):
    y = np.array([abs(r[key]) for r in rows])
    ok = y > 0
    if ok.sum() < 3:
        return float("nan"), float("nan")
    X = np.column_stack([np.ones(ok.sum()), np.log([r["r_min"] for r in rows])[ok], np.log([r["eta"] for r in rows])[ok]])
    etas = {r["eta"] for r in rows}
    if len(etas) < 2:
        X = X[:, :2]
    coef, *_ = np.linalg.lstsq(X, np.log(y[ok]), rcond=None)
    return float(coef[1]), (float(coef[2]) if X.shape[1] == 3 else float("nan"))


def decay_sweep(spec: PerturbationSpec, m: float, eta_list, r_list, cfg: NewtonConfig | None = None, L: int = 16):
    """Solve every ``(eta, r)`` case and fit power laws of the leaf diagnostics.

    Each diagnostic ``d`` is fit jointly as ``log|d| = c + p_r log r_min + p_eta log eta``.

    Returns
    -------
    fits : list of dict
        ``diagnostic``, ``slope_r``, ``slope_eta``, ``samples``.
    rows : list of dict
        One row per converged case.
    errors : list of dict
        Cases whose Newton iteration failed; excluded from the fits.
    """
    cfg = NewtonConfig() if cfg is None else cfg
    if not len(eta_list) or not len(r_list):
        raise ValueError("eta and radius lists must be non-empty")
    jobs = [(spec, m, float(eta), tuple(float(r) for r in r_list), cfg, L) for eta in eta_list]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_case, jobs))
    else:
        results = [_sweep_case(j) for j in jobs]
    rows = [r for res in results for r in res[0]]
    errors = [e for res in results for e in res[1]]
    fits = []
    for key in DECAY_DIAGNOSTICS:
        sr, se = _fit(rows, key)
        fits.append({"diagnostic": key, "slope_r": sr, "slope_eta": se, "samples": len(rows)})
    return fits, rows, errors
