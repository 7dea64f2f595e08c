"""Command-line front end.

Every command writes ``run.json`` (config echo, versions, checks and
convergence traces) plus command-specific CSV files into the output
directory.  Exit status is 0 when every asserted check passes, 2 when a
check fails and 1 on configuration or execution errors.

The optional ``--config`` file is JSON with the keys of :class:`RunConfig`;
``metric`` is a nested object ``{kind, eta, multipoles, tensor_profile}``.
Flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .metric import ConformalMetric, PerturbationSpec, make_provider
from .oracle import (
    SUPPORTED_KL,
    c_kl,
    e1,
    e2,
    lambda_of_r,
    mean_curvature_centered,
    q_closed,
    quad_sphere,
    r_of_lambda,
)
from .solver import (
    LEAF_COLUMNS,
    NewtonConfig,
    NewtonFailure,
    centered_sphere,
    coercivity,
    decay_sweep,
    foliate,
    leaf_report,
    perturbed_sphere,
    solve_leaf,
)
from .surface import build_graph, geometry
from .willmore import assemble_Wlambda, identity_suite, spectrum

__all__ = ["RunConfig", "ConfigError", "COMMANDS", "SCHEMA_VERSION", "emit_report", "load_config", "run", "main"]

SCHEMA_VERSION = 1
COMMANDS = (
    "verify-integrals",
    "verify-identities",
    "schwarzschild-exact",
    "spectrum",
    "solve",
    "foliate",
    "decay-sweep",
)
DEFAULT_L = {"verify-identities": 24, "spectrum": 20}
INTEGRAL_TOL = 1e-9
IDENTITY_TOL = 1e-6
IDENTITY_FLOOR = 1e-12
HAWKING_TOL = 1e-7
SPECTRUM_TOL = 1e-8
IDENTITY_METRIC = {"m": 1.0, "eta": 0.1, "multipoles": ((2, 1, 1.0), (1, 0, 0.5), (3, -2, 0.7))}
IDENTITY_SURFACE = {"center": (0.3, 0.1, -0.2), "axes": (2.92, 3.26, 3.94)}


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run.

    ``L = None`` picks the command default (24 for identities, 20 for
    spectra, 16 otherwise).  ``radius`` and ``lam`` select a single
    multiplier (``lam`` wins); ``radii`` and ``etas`` drive ladders and sweeps.
    """

    command: str
    m: float = 1.0
    metric: PerturbationSpec = field(default_factory=PerturbationSpec)
    L: int | None = None
    residual_tol: float = 1e-9
    max_iters: int = 12
    lam: float | None = None
    radius: float = 10.0
    radii: tuple = (8.0, 12.0, 16.0, 24.0, 32.0)
    etas: tuple = (0.0125, 0.025, 0.05)
    n_leaves: int = 9
    noise: float = 0.0
    output_dir: str = "willmore_out"
    seed: int = 0

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown command {self.command!r}")
        if not self.m >= 0:
            raise ConfigError("m: mass must be non-negative")
        if self.L is not None and self.L < 8:
            raise ConfigError("L: band limit must be at least 8")
        if not self.residual_tol > 0:
            raise ConfigError("residual_tol: must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters: must be at least 1")
        if not len(self.radii):
            raise ConfigError("radii: list must be non-empty")
        if not len(self.etas):
            raise ConfigError("etas: list must be non-empty")
        if self.n_leaves < 2:
            raise ConfigError("n_leaves: at least two leaves are needed")

    @property
    def band_limit(self) -> int:
        return self.L if self.L is not None else DEFAULT_L.get(self.command, 16)

    @property
    def multiplier(self) -> float:
        return self.lam if self.lam is not None else lambda_of_r(self.m, self.radius)

    def newton(self) -> NewtonConfig:
        return NewtonConfig(residual_tol=self.residual_tol, max_iters=self.max_iters)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["metric"] = self.metric.to_dict()
        d["radii"] = list(self.radii)
        d["etas"] = list(self.etas)
        return d


_SCALAR_KEYS = {
    "command": str,
    "m": float,
    "L": int,
    "residual_tol": float,
    "max_iters": int,
    "lam": float,
    "radius": float,
    "n_leaves": int,
    "noise": float,
    "output_dir": str,
    "seed": int,
}


def _coerce(key: str, value, kind):
    if value is None and key in ("L", "lam"):
        return None
    try:
        if kind is int and not float(value).is_integer():
            raise ValueError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None


def config_from_dict(d: dict) -> RunConfig:
    """Build a :class:`RunConfig` from parsed JSON, naming bad keys in errors."""
    if not isinstance(d, dict):
        raise ConfigError("<root>: config must be a JSON object")
    known = set(_SCALAR_KEYS) | {"metric", "radii", "etas"}
    for key in d:
        if key not in known:
            raise ConfigError(f"{key}: unknown key")
    if "command" not in d:
        raise ConfigError("command: missing")
    kw = {k: _coerce(k, d[k], t) for k, t in _SCALAR_KEYS.items() if k in d}
    for key in ("radii", "etas"):
        if key in d:
            if not isinstance(d[key], (list, tuple)):
                raise ConfigError(f"{key}: expected a list")
            kw[key] = tuple(_coerce(key, v, float) for v in d[key])
    if "metric" in d:
        if not isinstance(d["metric"], dict):
            raise ConfigError("metric: expected an object")
        try:
            kw["metric"] = PerturbationSpec.from_dict(d["metric"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"metric: {exc}") from None
    try:
        return RunConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"<root>: {exc}") from None


def load_config(path: str | Path) -> dict:
    """Parse a JSON config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON at line {exc.lineno}: {exc.msg}") from None


# -- serialization -----------------------------------------------------------------
def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def _json(v) -> str:
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json(x) for x in v) + "]"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g") if math.isfinite(v) else "null"
    if v is None:
        return "null"
    return json.dumps(str(v))


def emit_report(rows, fmt: str = "csv", columns=None) -> bytes:
    """Serialize rows (dicts) as CSV or versioned JSON.

    Columns default to the keys of the first row in order.  Floats carry 17
    significant digits; CSV uses ``\\n`` line endings and always has a header.
    """
    rows = list(rows)
    cols = list(columns) if columns is not None else (list(rows[0]) if rows else [])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in cols])
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, "columns": cols, "rows": [{c: r.get(c) for c in cols} for r in rows]}
        return (_json(doc) + "\n").encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


# -- commands ----------------------------------------------------------------------
@dataclass
class _Run:
    cfg: RunConfig
    tables: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    traces: list = field(default_factory=list)

    def check(self, name: str, value: float, threshold: float, passed: bool):
        self.checks.append({"name": name, "value": float(value), "threshold": float(threshold), "passed": bool(passed)})


def _rel(closed: float, quad: float, scale: float) -> float:
    denom = abs(quad) if abs(quad) > 1e-12 * scale else scale
    return abs(closed - quad) / denom


def _integral_rows(m: float = 1.0):
    rows = []
    for R in (1.0, 2.0, 10.0):
        for t in (0.0, 0.1, 0.3, 0.6):
            a = t * R

            def add(name, closed, fn, scale):
                q = quad_sphere(fn, R, a)
                rows.append(
                    {"spec": name, "R": R, "a_over_R": t, "closed_form": closed, "quadrature": q,
                     "abs_diff": abs(closed - q), "rel_diff": _rel(closed, q, scale)}
                )

            for k, l in SUPPORTED_KL:
                add(
                    f"C_{k}^{l}",
                    c_kl(R, a, k, l),
                    lambda x, N, k=k, l=l: N[..., 0] ** l / np.linalg.norm(x, axis=-1) ** k,
                    4.0 * np.pi * R ** (2 - k),
                )
            add(
                "E1",
                e1(R, a),
                lambda x, N: (np.sum(x * x, -1) - 3.0 * np.sum(x * N, -1) ** 2) / np.linalg.norm(x, axis=-1) ** 5,
                4.0 * np.pi / R,
            )
            add("E2", e2(m, a), lambda x, N: 3.0 * m * N[..., 0] / np.linalg.norm(x, axis=-1), 4.0 * np.pi * m * R)
            phi = 1.0 + m / (2.0 * R)
            pref = 3.0 * m * m / (phi**7 * mean_curvature_centered(m, R))

            def q_integrand(x, N):
                r = np.linalg.norm(x, axis=-1)
                rn = np.sum(x * N, -1) / r
                return pref * r**-5 * rn * (N[..., 0] - rn * x[..., 0] / r)

            add("Q", q_closed(m, R, t), q_integrand, pref * 4.0 * np.pi * R**-3)
    return rows


def _cmd_verify_integrals(run: _Run):
    rows = _integral_rows(run.cfg.m if run.cfg.m > 0 else 1.0)
    run.tables["integrals.csv"] = (rows, ["spec", "R", "a_over_R", "closed_form", "quadrature", "abs_diff", "rel_diff"])
    worst = max(r["rel_diff"] for r in rows)
    run.check("integrals.max_rel_diff", worst, INTEGRAL_TOL, worst <= INTEGRAL_TOL)


def _identity_provider(cfg: RunConfig):
    if cfg.metric.kind == "exact-schwarzschild" or cfg.metric.eta == 0:
        return ConformalMetric(IDENTITY_METRIC["m"], IDENTITY_METRIC["eta"], IDENTITY_METRIC["multipoles"])
    return make_provider(cfg.metric, cfg.m)


def _cmd_verify_identities(run: _Run):
    cfg = run.cfg
    provider = _identity_provider(cfg)
    rows = []
    results = {}
    for L in (cfg.band_limit, 2 * cfg.band_limit):
        g = build_graph(IDENTITY_SURFACE["center"], ("ellipsoid", IDENTITY_SURFACE["axes"]), L)
        res = identity_suite(geometry(g, provider))
        results[L] = res
        rows.extend({"identity": k, "L": L, "residual": v} for k, v in res.items())
    run.tables["identities.csv"] = (rows, ["identity", "L", "residual"])
    lo, hi = results[cfg.band_limit], results[2 * cfg.band_limit]
    for k, v in lo.items():
        run.check(f"identities.{k}", v, IDENTITY_TOL, v <= IDENTITY_TOL)
        shrink = hi[k] <= 0.1 * v or hi[k] <= IDENTITY_FLOOR
        run.check(f"identities.{k}.refinement", hi[k], max(0.1 * v, IDENTITY_FLOOR), shrink)


def _leaf_rows(leaves, eigenvalues: bool = True):
    return [leaf_report(leaf, eigenvalues) for leaf in leaves]


def _record_trace(run: _Run, label: str, trace):
    run.traces.append({"case": label, "residuals": [float(v) for v in trace]})


def _cmd_schwarzschild_exact(run: _Run):
    cfg = run.cfg
    if not cfg.m > 0:
        raise ConfigError("m: the exact solution needs m > 0")
    provider = ConformalMetric(cfg.m)
    lam = cfg.multiplier
    leaf = solve_leaf(provider, lam, centered_sphere(cfg.m, lam, cfg.band_limit), cfg.newton())
    _record_trace(run, f"lambda={lam!r}", leaf.trace)
    run.tables["leaves.csv"] = (_leaf_rows([leaf]), LEAF_COLUMNS)
    err = abs(leaf.diagnostics["hawking"] - cfg.m) / cfg.m
    run.check("hawking_relative_error", err, HAWKING_TOL, err <= HAWKING_TOL)
    res = leaf.diagnostics["residual_norm"]
    run.check("residual_norm", res, cfg.residual_tol, res <= cfg.residual_tol)


def _provider(cfg: RunConfig):
    return make_provider(cfg.metric, cfg.m)


def _cmd_spectrum(run: _Run):
    cfg = run.cfg
    provider = _provider(cfg)
    lam = cfg.multiplier
    leaf = solve_leaf(provider, lam, centered_sphere(cfg.m, lam, cfg.band_limit), cfg.newton())
    _record_trace(run, f"lambda={lam!r}", leaf.trace)
    asm = assemble_Wlambda(leaf.geom, lam)
    spec = spectrum(asm, 9)
    exact = provider.exact_schwarzschild
    R_S = leaf.diagnostics["R_S"]
    rows = []
    worst = 0.0
    for i, mu in enumerate(spec.values):
        l = int(np.floor(np.sqrt(i)))
        row = {"index": i, "degree": l, "eigenvalue": mu, "predicted": None, "abs_diff": None}
        if exact:
            pred = (l * (l + 1) - 2) / R_S**2 + 3.0 * lam
            row.update(predicted=pred, abs_diff=abs(mu - pred))
            worst = max(worst, abs(mu - pred))
        rows.append(row)
    c = coercivity(leaf)
    rows.append({"index": "coercivity", "degree": None, "eigenvalue": c, "predicted": None, "abs_diff": None})
    run.tables["spectrum.csv"] = (rows, ["index", "degree", "eigenvalue", "predicted", "abs_diff"])
    if exact:
        run.check("spectrum.max_abs_diff", worst, SPECTRUM_TOL, worst <= SPECTRUM_TOL)
    run.check("wlambda_coercivity_positive", c, 0.0, c > 0)


def _cmd_solve(run: _Run):
    cfg = run.cfg
    lam = cfg.multiplier
    rng = np.random.default_rng(cfg.seed)
    init = perturbed_sphere(cfg.m, lam, cfg.band_limit, cfg.noise, rng)
    leaf = solve_leaf(_provider(cfg), lam, init, cfg.newton())
    _record_trace(run, f"lambda={lam!r}", leaf.trace)
    run.tables["leaves.csv"] = (_leaf_rows([leaf]), LEAF_COLUMNS)
    run.check("residual_norm", leaf.diagnostics["residual_norm"], cfg.residual_tol, True)
    run.check("positive_mean_curvature", float(np.min(leaf.geom.H)), 0.0, bool(np.min(leaf.geom.H) > 0))


def _cmd_foliate(run: _Run):
    cfg = run.cfg
    r_lo, r_hi = min(cfg.radii), max(cfg.radii)
    if not r_lo < r_hi:
        raise ConfigError("radii: a foliation needs two distinct radii")
    res = foliate(
        _provider(cfg), cfg.m, lambda_of_r(cfg.m, r_lo), lambda_of_r(cfg.m, r_hi), cfg.n_leaves, cfg.newton(),
        L=cfg.band_limit,
    )
    for leaf in res.leaves:
        _record_trace(run, f"lambda={leaf.lam!r}", leaf.trace)
    run.tables["leaves.csv"] = (_leaf_rows(res.leaves), LEAF_COLUMNS)
    run.check("all_leaves_converged", len(res.leaves), cfg.n_leaves, res.complete)
    run.check("min_radial_gap", res.min_radial_gap, 0.0, bool(res.min_radial_gap > 0))
    run.check("monotonicity_violations", res.monotonicity_violations, 0, res.monotonicity_violations == 0)
    worst = max((abs(l.diagnostics["closure"]) / (l.lam * l.diagnostics["area"]) for l in res.leaves), default=0.0)
    run.check("closure", worst, 10.0 * cfg.residual_tol, worst <= 10.0 * cfg.residual_tol)


def _cmd_decay_sweep(run: _Run):
    cfg = run.cfg
    spec = cfg.metric
    if spec.kind == "exact-schwarzschild":
        raise ConfigError("metric: a decay sweep needs a perturbed metric kind")
    fits, rows, errors = decay_sweep(spec, cfg.m, cfg.etas, cfg.radii, cfg.newton(), L=cfg.band_limit)
    run.tables["sweep.csv"] = (fits, ["diagnostic", "slope_r", "slope_eta", "samples"])
    run.tables["leaves.csv"] = (rows, list(rows[0]) if rows else ["eta", "r"])
    for e in errors:
        run.traces.append({"case": f"eta={e['eta']!r}, r={e['r']!r}", "error": e["error"]})
    run.check("failed_cases", len(errors), 0, not errors)


_HANDLERS = {
    "verify-integrals": _cmd_verify_integrals,
    "verify-identities": _cmd_verify_identities,
    "schwarzschild-exact": _cmd_schwarzschild_exact,
    "spectrum": _cmd_spectrum,
    "solve": _cmd_solve,
    "foliate": _cmd_foliate,
    "decay-sweep": _cmd_decay_sweep,
}


def _versions() -> dict:
    return {
        "willmore_foliation": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def run(cfg: RunConfig) -> int:
    """Execute a command and write its artifacts; returns the exit status."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: output_dir: cannot create {out}: {exc}", file=sys.stderr)
        return 1
    state = _Run(cfg)
    status = 0
    error = None
    try:
        _HANDLERS[cfg.command](state)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NewtonFailure, ValueError, RuntimeError) as exc:
        error = f"{type(exc).__name__}: {exc}"
        trace = getattr(exc, "trace", None)
        if trace is not None:
            _record_trace(state, "failed", trace)
        status = 1
    if status == 0 and not all(c["passed"] for c in state.checks):
        status = 2
    for name, (rows, cols) in state.tables.items():
        (out / name).write_bytes(emit_report(rows, "csv", cols))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "versions": _versions(),
        "status": status,
        "error": error,
        "checks": state.checks,
        "traces": state.traces,
    }
    (out / "run.json").write_bytes((_json(doc) + "\n").encode("utf-8"))
    for c in state.checks:
        mark = "PASS" if c["passed"] else "FAIL"
        print(f"{mark} {c['name']}: {_fmt(c['value'])} (threshold {_fmt(c['threshold'])})")
    if error:
        print(f"error: {error}", file=sys.stderr)
    return status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="willmore-foliation", description="Area-constrained Willmore foliations and their diagnostics.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--m", type=float, help="mass parameter")
    p.add_argument("--eta", type=float, help="perturbation amplitude")
    p.add_argument("--lambda", dest="lam", type=float, help="multiplier (overrides --r)")
    p.add_argument("--r", type=float, dest="radius", help="coordinate radius selecting lambda = lambda(r)")
    p.add_argument("--L", type=int, help="spherical-harmonic band limit")
    p.add_argument("--tol", type=float, dest="residual_tol", help="relative residual tolerance")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--seed", type=int, help="random seed for perturbed initial guesses")
    return p


def _merge(args: argparse.Namespace) -> RunConfig:
    base = load_config(args.config) if args.config else {}
    base = dict(base)
    base["command"] = args.command
    for key in ("m", "lam", "radius", "L", "residual_tol", "output_dir", "seed"):
        v = getattr(args, key)
        if v is not None:
            base[key] = v
    if args.eta is not None:
        metric = dict(base.get("metric") or {})
        if metric.get("kind", "exact-schwarzschild") == "exact-schwarzschild" and args.eta > 0:
            metric["kind"] = "conformal-harmonic"
            metric.setdefault("multipoles", [[2, 0, 1.0]])
        metric["eta"] = args.eta
        base["metric"] = metric
    return config_from_dict(base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
