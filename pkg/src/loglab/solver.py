"""Constrained minimization of the obstacle energy on uniform grids.

The discrete energy is

    E(u) = vol * [ 1/2 Σ_edges ((u_i - u_j)/h_k)^2 + Σ_i w_i F(u_i) ]

with trapezoid weights ``w_i`` and ``F(u) = u(1 - log u)`` (log mode) or
``F(u) = u`` (classical mode), minimized over ``u >= 0`` with the boundary
layer fixed.  Each iteration takes

1. a two-metric projected Newton step: nodes near zero with outward gradient
   move by a diagonally scaled gradient step, the remaining free nodes by a
   Newton-type step preconditioned with the grid Laplacian, followed by an
   Armijo backtracking search along the projection arc;
2. one red-black sweep replacing every node by the global minimizer of the
   energy in that coordinate.

Both parts never increase the energy.  The coordinate sweep is what lets
nodes leave zero in log mode, where the one-sided derivative at 0 is
``-infinity`` for the potential but the energy itself is continuous.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field as dc_field
from os import PathLike
from typing import Any, Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigurationError, NumericalError
from .geometry import Evaluable, ScalarField, ball_rule, ball_volume, evaluate_gradient
from .synthetic import ClassicalRadialSolution

log = logging.getLogger(__name__)

LOG = "log_obstacle"
CLASSICAL = "classical_obstacle"
DIRECT_SOLVE_LIMIT = 400_000


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def make_datum(spec: dict | float | Callable) -> Evaluable:
    """Build a boundary datum from a JSON-style description.

    Supported forms: a number (constant), ``{"type": "constant", "value": v}``,
    ``{"type": "classical_radial", "a": 0.5, "center": [0, 0]}`` (the exact
    radial classical solution), and ``{"type": "expression", "expr": "..."}``
    evaluated with numpy functions and coordinates ``x, y, z``.
    """
    if callable(spec):
        return spec
    if isinstance(spec, (int, float)):
        spec = {"type": "constant", "value": float(spec)}
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigurationError(f"unsupported boundary datum {spec!r}")
    kind = spec["type"]
    if kind == "constant":
        value = float(spec["value"])
        return lambda x: np.full(np.atleast_2d(x).shape[0], value)
    if kind == "classical_radial":
        center = tuple(spec.get("center", (0.0, 0.0)))
        return ClassicalRadialSolution(float(spec.get("a", 0.5)), center)
    if kind == "expression":
        expr = str(spec["expr"])
        names = {k: getattr(np, k) for k in ("sin", "cos", "exp", "log", "sqrt", "abs", "maximum", "minimum", "pi", "where")}
        code = compile(expr, "<datum>", "eval")

        def f(x):
            x = np.atleast_2d(x)
            env = dict(names, x=x[:, 0], y=x[:, 1], z=x[:, 2] if x.shape[1] > 2 else 0.0)
            return np.broadcast_to(np.asarray(eval(code, {"__builtins__": {}}, env), dtype=float), (len(x),)).copy()

        return f
    raise ConfigurationError(f"unknown boundary datum type {kind!r}")


@dataclass
class SolveConfig:
    """Grid, boundary datum and iteration controls for :func:`minimize`.

    ``n`` nodes per axis cover the box ``[lower, upper]``.  With
    ``domain_shape="ball"`` every node at distance ``>= ball_radius`` from
    ``ball_center`` is fixed to the datum as well.
    """

    lower: tuple[float, ...] = (-1.0, -1.0)
    upper: tuple[float, ...] = (1.0, 1.0)
    n: int | tuple[int, ...] = 129
    boundary_datum: Any = 0.0
    mode: str = LOG
    domain_shape: str = "box"
    ball_center: tuple[float, ...] | None = None
    ball_radius: float = 1.0
    max_iter: int = 300
    armijo_sigma: float = 1e-4
    armijo_beta: float = 0.5
    max_backtracks: int = 40
    tol: float = 1e-8
    threshold_rel: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        self.lower = tuple(float(v) for v in self.lower)
        self.upper = tuple(float(v) for v in self.upper)
        d = len(self.lower)
        if d not in (2, 3) or len(self.upper) != d:
            raise ConfigurationError("box must be 2- or 3-dimensional")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ConfigurationError("box upper corner must exceed the lower corner")
        n = (int(self.n),) * d if np.isscalar(self.n) else tuple(int(v) for v in self.n)
        if len(n) != d or min(n) < 17:
            raise ConfigurationError("resolution must be at least 17 nodes per axis")
        self.n = n
        if self.mode not in (LOG, CLASSICAL):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.domain_shape not in ("box", "ball"):
            raise ConfigurationError(f"unknown domain shape {self.domain_shape!r}")
        if not self.tol > 0:
            raise ConfigurationError("tolerance must be positive")
        if not 0 < self.armijo_beta < 1 or not 0 < self.armijo_sigma < 1:
            raise ConfigurationError("Armijo parameters must lie in (0, 1)")
        if self.ball_center is None:
            self.ball_center = tuple(0.5 * (lo + hi) for lo, hi in zip(self.lower, self.upper))
        self.ball_center = tuple(float(v) for v in self.ball_center)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (k - 1) for lo, hi, k in zip(self.lower, self.upper, self.n))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n"] = list(self.n)
        out["lower"], out["upper"] = list(self.lower), list(self.upper)
        out["ball_center"] = list(self.ball_center)
        if callable(self.boundary_datum):
            out["boundary_datum"] = {"type": "callable"}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SolveConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown solver settings: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc


@dataclass
class SolveReport:
    """Result of :func:`minimize`; fields are labelled candidate minimizers."""

    field: ScalarField
    iterations: int
    energy: float
    converged: bool
    pg_history: list[float]
    energy_history: list[float]
    residual: dict[str, float]
    threshold: float
    config: dict = dc_field(default_factory=dict)
    notes: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": "candidate minimizer",
            "iterations": self.iterations,
            "energy": self.energy,
            "converged": self.converged,
            "pg_history": self.pg_history,
            "energy_history": self.energy_history,
            "residual": self.residual,
            "threshold": self.threshold,
            "notes": self.notes,
            "config": self.config,
        }


# ---------------------------------------------------------------------------
# Discrete problem
# ---------------------------------------------------------------------------


def _potential(u: np.ndarray, mode: str) -> np.ndarray:
    if mode == CLASSICAL:
        return u
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(u > 0, u * (1 - np.log(np.where(u > 0, u, 1.0))), 0.0)


def _potential_slope(u: np.ndarray, mode: str) -> np.ndarray:
    if mode == CLASSICAL:
        return np.ones_like(u)
    with np.errstate(divide="ignore"):
        return np.where(u > 0, -np.log(np.where(u > 0, u, 1.0)), np.inf)


class _Grid:
    def __init__(self, cfg: SolveConfig):
        self.cfg = cfg
        self.d = cfg.d
        self.shape = cfg.n
        self.h = np.asarray(cfg.spacing)
        self.vol = float(np.prod(self.h))
        axes = [np.linspace(cfg.lower[k], cfg.upper[k], cfg.n[k]) for k in range(self.d)]
        self.axes = axes
        nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)
        self.nodes = nodes
        N = nodes.shape[0]
        idx = np.indices(self.shape).reshape(self.d, -1).T
        fixed = np.any((idx == 0) | (idx == np.asarray(self.shape) - 1), axis=1)
        if cfg.domain_shape == "ball":
            dist = np.linalg.norm(nodes - np.asarray(cfg.ball_center), axis=1)
            fixed |= dist >= cfg.ball_radius
        self.fixed = fixed
        self.free = np.nonzero(~fixed)[0]
        self.bnd = np.nonzero(fixed)[0]
        self.color = (idx.sum(axis=1) % 2)[self.free]
        # trapezoid weights
        w = np.ones(N)
        for k in range(self.d):
            face = (idx[:, k] == 0) | (idx[:, k] == self.shape[k] - 1)
            w[face] *= 0.5
        self.weights = w
        self.diag = float(np.sum(2.0 / self.h**2))
        self.K = self._laplacian().tocsr()
        Kf = self.K[self.free]
        self.K_ff = Kf[:, self.free].tocsc()
        self.K_fb = Kf[:, self.bnd].tocsr()
        self.K_f = Kf

    def _laplacian(self) -> sp.spmatrix:
        mats = []
        for k in range(self.d):
            n = self.shape[k]
            T = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / self.h[k] ** 2
            ops = [sp.identity(self.shape[j]) if j != k else T for j in range(self.d)]
            M = ops[0]
            for op in ops[1:]:
                M = sp.kron(M, op)
            mats.append(M)
        return sum(mats[1:], mats[0])

    def energy(self, u_full: np.ndarray, mode: str) -> float:
        U = u_full.reshape(self.shape)
        total = 0.0
        for k in range(self.d):
            diff = np.diff(U, axis=k) / self.h[k]
            total += 0.5 * float(np.sum(diff * diff))
        total += float(np.dot(self.weights, _potential(u_full, mode)))
        return self.vol * total


def _solve(A: sp.spmatrix, b: np.ndarray, spd: bool) -> np.ndarray:
    if A.shape[0] <= DIRECT_SOLVE_LIMIT or not spd:
        return sla.splu(A.tocsc(), permc_spec="COLAMD").solve(b)
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(A.tocsr())
    return ml.solve(b, tol=1e-10, accel="cg", maxiter=200)


def _coordinate_minimizer(b: np.ndarray, D: float, mode: str) -> np.ndarray:
    """Global minimizer over ``t >= 0`` of ``D t²/2 - b t + F(t)``."""
    if mode == CLASSICAL:
        return np.maximum((b - 1.0) / D, 0.0)
    out = np.zeros_like(b)
    tc = 1.0 / D
    cand = 1.0 - b + math.log(D) < 0  # derivative has a positive root
    if not np.any(cand):
        return out
    bb = b[cand]
    t = np.full(bb.shape, 2 * tc)
    for _ in range(100):
        f = D * t - bb - np.log(t)
        t_new = t - f / (D - 1.0 / t)
        t_new = np.maximum(t_new, tc * (1 + 1e-12))
        if np.all(np.abs(t_new - t) <= 1e-15 * t_new):
            t = t_new
            break
        t = t_new
    phi = 0.5 * D * t * t - bb * t + t * (1 - np.log(t))
    out[cand] = np.where(phi < 0, t, 0.0)
    return out


def harmonic_extension(grid: _Grid, datum_vals: np.ndarray) -> np.ndarray:
    u = datum_vals.copy()
    rhs = -grid.K_fb @ datum_vals[grid.bnd]
    u[grid.free] = _solve(grid.K_ff, rhs, spd=True)
    return np.maximum(u, 0.0)


def prolongate(field: ScalarField, cfg: SolveConfig) -> np.ndarray:
    """Multilinear interpolation of a coarse solution onto the nodes of ``cfg``."""
    axes = [field.axis(k) for k in range(field.d)]
    interp = RegularGridInterpolator(axes, field.values, method="linear", bounds_error=False, fill_value=None)
    grid_axes = [np.linspace(cfg.lower[k], cfg.upper[k], cfg.n[k]) for k in range(cfg.d)]
    pts = np.stack(np.meshgrid(*grid_axes, indexing="ij"), axis=-1).reshape(-1, cfg.d)
    return np.maximum(interp(pts), 0.0)


def minimize(cfg: SolveConfig, initial: ScalarField | None = None) -> SolveReport:
    """Minimize the obstacle energy for ``cfg``.

    Parameters
    ----------
    cfg : SolveConfig
    initial : ScalarField, optional
        Warm start (interpolated onto the grid); by default the harmonic
        extension of the datum clipped at zero.

    Raises
    ------
    ConfigurationError
        If the datum is negative at a fixed node.
    NumericalError
        If non-finite values appear.
    """
    grid = _Grid(cfg)
    mode = cfg.mode
    datum = make_datum(cfg.boundary_datum)
    dvals = np.zeros(len(grid.nodes))
    dvals[grid.bnd] = np.asarray(datum(grid.nodes[grid.bnd]), dtype=float)
    if not np.all(np.isfinite(dvals)) or dvals.min() < 0:
        raise ConfigurationError("boundary datum must be finite and non-negative")
    if initial is None:
        u = harmonic_extension(grid, dvals)
    else:
        u = prolongate(initial, cfg)
        u[grid.bnd] = dvals[grid.bnd]
    free, D = grid.free, grid.diag
    E = grid.energy(u, mode)
    energy_hist = [E]
    pg_hist: list[float] = []
    converged = False
    it = 0
    notes: list[str] = []
    for it in range(cfg.max_iter + 1):
        Ku = grid.K_f @ u
        b = D * u[free] - Ku
        tstar = _coordinate_minimizer(b, D, mode)
        pg = float(D * np.max(np.abs(u[free] - tstar))) if len(free) else 0.0
        if not math.isfinite(pg):
            raise NumericalError("non-finite projected gradient", it)
        pg_hist.append(pg)
        if pg <= cfg.tol:
            converged = True
            break
        if it == cfg.max_iter:
            break
        u, E = _newton_step(grid, u, E, Ku, pg, cfg, it)
        u, E = _sweep(grid, u, E, mode, it)
        energy_hist.append(E)
    if not converged:
        notes.append(f"maximum iterations reached with projected-gradient norm {pg_hist[-1]:.3e}")
    field = ScalarField(cfg.lower, cfg.spacing, u.reshape(grid.shape), nonneg=True)
    thr = cfg.threshold_rel * float(u.max()) if u.max() > 0 else 0.0
    return SolveReport(field, it, E, converged, pg_hist, energy_hist, _residual_stats(grid, u, mode, thr), thr, cfg.to_dict(), notes)


def _newton_step(grid: _Grid, u, E, Ku, pg, cfg: SolveConfig, it: int):
    mode, free, D = cfg.mode, grid.free, grid.diag
    uf = u[free]
    g = Ku + _potential_slope(uf, mode)  # per unit volume
    eps = min(1e-3 * max(float(u.max()), 1e-300), pg / D)
    active = (uf <= eps) & (g > 0)
    inactive = np.nonzero(~active)[0]
    if len(inactive) == 0:
        return u, E
    # zero nodes in log mode have infinite slope; they only move in the coordinate sweep
    g = np.where(np.isfinite(g), g, 0.0)
    p = np.zeros_like(uf)
    p[active] = -g[active] / D
    H = grid.K_ff[inactive][:, inactive]
    gi = g[inactive]
    spd = True
    if mode == LOG:
        curv = np.minimum(1.0 / np.maximum(uf[inactive], 1e-300), 0.5 * D)
        Hn = (H - sp.diags(curv)).tocsc()
        try:
            pn = _solve(Hn, -gi, spd=False) if Hn.shape[0] <= DIRECT_SOLVE_LIMIT else None
        except RuntimeError:
            pn = None
        if pn is not None and np.all(np.isfinite(pn)) and float(gi @ pn) < 0:
            p[inactive] = pn
            spd = False
    if spd:
        p[inactive] = _solve(H, -gi, spd=True)
    if not np.all(np.isfinite(p)):
        raise NumericalError("non-finite search direction", it)
    t = 1.0
    vol = grid.vol
    for _ in range(cfg.max_backtracks):
        trial = u.copy()
        trial[free] = np.maximum(uf + t * p, 0.0)
        Et = grid.energy(trial, mode)
        if not math.isfinite(Et):
            raise NumericalError("non-finite energy during line search", it)
        step = trial[free] - uf
        predicted = t * float(gi @ p[inactive]) + float(g[active] @ step[active])
        if Et <= E + cfg.armijo_sigma * vol * predicted and Et <= E:
            return trial, Et
        t *= cfg.armijo_beta
    return u, E


def _sweep(grid: _Grid, u, E, mode: str, it: int):
    free, D = grid.free, grid.diag
    new = u.copy()
    for colour in (0, 1):
        sel = free[grid.color == colour]
        rows = grid.K[sel]
        b = D * new[sel] - rows @ new
        new[sel] = _coordinate_minimizer(b, D, mode)
    En = grid.energy(new, mode)
    if not math.isfinite(En):
        raise NumericalError("non-finite energy after coordinate sweep", it)
    if En > E + 1e-12 * (1 + abs(E)):
        # exact coordinate minimization cannot increase the energy beyond roundoff
        return u, E
    return new, min(En, E)


def _residual_stats(grid: _Grid, u, mode: str, thr: float) -> dict[str, float]:
    free = grid.free
    r = grid.K_f @ u
    uf = u[free]
    pos = uf > thr
    if mode == CLASSICAL:
        res = r + 1.0
    else:
        with np.errstate(divide="ignore"):
            res = r - np.log(np.where(pos, uf, 1.0))
    res = np.where(pos, res, 0.0)
    # nodes whose stencil stays in the positivity set
    nb_pos = np.asarray((abs(grid.K_f) @ (u > thr).astype(float)) == abs(grid.K_f) @ np.ones_like(u))
    inner = pos & nb_pos
    return {
        "max_abs_positive_set": float(np.max(np.abs(res))) if np.any(pos) else 0.0,
        "max_abs_interior": float(np.max(np.abs(res[inner]))) if np.any(inner) else 0.0,
        "mean_abs_interior": float(np.mean(np.abs(res[inner]))) if np.any(inner) else 0.0,
        "positive_nodes": int(np.sum(pos)),
        "free_nodes": int(len(free)),
    }


# ---------------------------------------------------------------------------
# Free boundary diagnostics
# ---------------------------------------------------------------------------


def extract_free_boundary(u: ScalarField, threshold: float | None = None) -> np.ndarray:
    """Centers of grid cells where ``u`` crosses ``threshold``.

    Returns an ``(n, d)`` array (empty if ``u`` is entirely above or below).
    """
    V = u.values
    if threshold is None:
        threshold = 10 * np.finfo(float).eps * max(float(V.max()), 0.0)
    if threshold <= 0 and V.max() <= 0:
        return np.zeros((0, u.d))
    d = u.d
    corners = []
    for c in range(2**d):
        sl = tuple(slice(1, None) if (c >> k) & 1 else slice(None, -1) for k in range(d))
        corners.append(V[sl])
    stack = np.stack(corners)
    cross = (stack.min(axis=0) <= threshold) & (stack.max(axis=0) > threshold)
    idx = np.argwhere(cross)
    return u.lower + (idx + 0.5) * np.asarray(u.spacing)


def contact_density(u: Evaluable, x0: Sequence[float], r: float, threshold: float, n_radial: int = 48) -> float:
    """Fraction of ``B_r(x0)`` where ``u <= threshold`` (quadrature measure)."""
    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    rule = ball_rule(d, n_radial, 256 if d == 2 else 64)
    pts, w = rule.mapped(x0, r)
    vals = np.asarray(u(pts))
    return float(np.dot(w, vals <= threshold) / (ball_volume(d) * r**d))


@dataclass
class GrowthReport:
    radii: list[float]
    ratios: list[float]
    spread: float
    degenerate: bool


def growth_ratio(u: Evaluable, x0: Sequence[float], radii: Sequence[float]) -> GrowthReport:
    """``sup_{B_r(x0)} u / (r² |log r|)`` per radius and the max/min spread.

    The supremum is taken over grid nodes inside the ball for grid fields and
    over a dense ball rule (boundary included) for analytic fields.
    """
    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    ratios = []
    for r in radii:
        if isinstance(u, ScalarField):
            sup = _grid_sup(u, x0, r)
        else:
            rule = ball_rule(d, 24, 128 if d == 2 else 32)
            sup = float(np.max(np.concatenate([u(x0 + r * rule.nodes), u(x0 + r * rule.nodes / np.linalg.norm(rule.nodes, axis=1)[:, None])])))
        ratios.append(sup / (r * r * abs(math.log(r))))
    ratios_arr = np.asarray(ratios)
    degenerate = bool(np.all(ratios_arr == 0))
    spread = float("inf") if degenerate or ratios_arr.min() <= 0 else float(ratios_arr.max() / ratios_arr.min())
    return GrowthReport(list(map(float, radii)), list(map(float, ratios)), spread, degenerate)


def _grid_sup(u: ScalarField, x0: np.ndarray, r: float) -> float:
    lo = np.maximum(np.floor((x0 - r - u.lower) / u.spacing).astype(int), 0)
    hi = np.minimum(np.ceil((x0 + r - u.lower) / u.spacing).astype(int) + 1, np.asarray(u.extents))
    sl = tuple(slice(a, b) for a, b in zip(lo, hi))
    axes = [u.axis(k)[sl[k]] for k in range(u.d)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = np.linalg.norm(pts - x0, axis=-1) <= r
    vals = u.values[sl][inside]
    return float(vals.max()) if vals.size else 0.0


def write_report_json(report: SolveReport, path: str | PathLike, extra: dict | None = None) -> None:
    data = report.to_dict()
    if extra:
        data.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")
