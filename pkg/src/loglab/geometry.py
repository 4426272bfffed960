"""Uniform-grid scalar fields, interpolation, gradients and ball/sphere quadrature.

An *evaluable* throughout the package is any callable mapping an ``(n, d)``
array of points to an ``(n,)`` array of values.  If it also has a ``grad``
method returning ``(n, d)`` gradients, that is used; otherwise gradients are
obtained by central differences (see :func:`evaluate_gradient`).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from os import PathLike
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError, DomainError

Evaluable = Callable[[np.ndarray], np.ndarray]


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2*pi for d=2, 4*pi for d=3)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(d: int) -> float:
    return sphere_area(d) / d


# ---------------------------------------------------------------------------
# Scalar fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Samples of a function on a uniform rectangular grid.

    Parameters
    ----------
    origin : sequence of float
        Coordinates of the node with index ``(0, ..., 0)``.
    spacing : sequence of float
        Grid spacing per axis, strictly positive.
    values : ndarray
        Samples with shape equal to the per-axis node counts (row-major,
        last axis fastest).
    nonneg : bool
        Whether the field is declared non-negative; checked on construction.
    """

    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    values: np.ndarray
    nonneg: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        d = values.ndim
        if d not in (2, 3):
            raise DomainError(f"fields must be 2- or 3-dimensional, got {d}")
        if len(self.origin) != d or len(self.spacing) != d:
            raise DomainError("origin and spacing must have one entry per axis")
        if min(self.spacing) <= 0:
            raise DomainError("grid spacing must be strictly positive")
        if min(values.shape) < 2:
            raise DomainError("fields need at least 2 nodes per axis")
        if not np.all(np.isfinite(values)):
            raise DomainError("field values must be finite")
        if self.nonneg and values.min() < 0:
            raise DomainError(f"field flagged non-negative has minimum {values.min()!r}")

    @classmethod
    def from_function(
        cls,
        f: Evaluable,
        lo: Sequence[float],
        hi: Sequence[float],
        n: Sequence[int] | int,
        nonneg: bool = False,
    ) -> "ScalarField":
        """Sample ``f`` on the box ``[lo, hi]`` with ``n`` nodes per axis."""
        d = len(lo)
        n = (n,) * d if np.isscalar(n) else tuple(n)
        axes = [np.linspace(lo[i], hi[i], n[i]) for i in range(d)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = np.asarray(f(grid.reshape(-1, d)), dtype=float).reshape(n)
        spacing = [(hi[i] - lo[i]) / (n[i] - 1) for i in range(d)]
        return cls(tuple(lo), tuple(spacing), vals, nonneg)

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def extents(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def h(self) -> float:
        """Largest grid spacing."""
        return max(self.spacing)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + np.asarray(self.spacing) * (np.asarray(self.extents) - 1)

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.extents[i])

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape ``extents + (d,)``."""
        return np.stack(np.meshgrid(*[self.axis(i) for i in range(self.d)], indexing="ij"), axis=-1)

    def with_values(self, values: np.ndarray, nonneg: bool | None = None) -> "ScalarField":
        return ScalarField(self.origin, self.spacing, values, self.nonneg if nonneg is None else nonneg)

    @cached_property
    def gradient(self) -> np.ndarray:
        return gradient_field(self)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return interpolate(self, points)

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Interpolated finite-difference gradient at ``points``."""
        pts = np.asarray(points, dtype=float)
        idx, frac = _locate(self, pts)
        return np.stack([_multilinear(self.gradient[..., k], idx, frac) for k in range(self.d)], axis=-1)

    def contains_ball(self, center: Sequence[float], r: float) -> bool:
        """True when ``B_r(center)`` lies inside the box shrunk by one cell."""
        c = np.asarray(center, dtype=float)
        lo = self.lower + np.asarray(self.spacing)
        hi = self.upper - np.asarray(self.spacing)
        return bool(np.all(c - r >= lo - 1e-12) and np.all(c + r <= hi + 1e-12))


def _locate(field: ScalarField, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = field.d
    if pts.shape[-1] != d:
        raise DomainError(f"points must have {d} coordinates")
    h = np.asarray(field.spacing)
    s = (pts - field.lower) / h
    n = np.asarray(field.extents)
    tol = 1e-9
    if np.any(s < 1 - tol) or np.any(s > n - 2 + tol):
        bad = pts[np.any((s < 1 - tol) | (s > n - 2 + tol), axis=-1)][0]
        raise DomainError(f"point {bad.tolist()} outside the field domain shrunk by one cell")
    idx = np.clip(np.floor(s).astype(np.int64), 0, n - 2)
    frac = np.clip(s - idx, 0.0, 1.0)
    return idx, frac


def _multilinear(values: np.ndarray, idx: np.ndarray, frac: np.ndarray) -> np.ndarray:
    d = values.ndim
    out = np.zeros(idx.shape[:-1])
    for corner in range(2**d):
        bits = [(corner >> k) & 1 for k in range(d)]
        w = np.ones(idx.shape[:-1])
        sel = []
        for k, b in enumerate(bits):
            w = w * (frac[..., k] if b else 1.0 - frac[..., k])
            sel.append(idx[..., k] + b)
        out = out + w * values[tuple(sel)]
    return out


def interpolate(field: ScalarField, p: np.ndarray) -> np.ndarray | float:
    """Multilinear interpolation of ``field`` at one or many points.

    Parameters
    ----------
    field : ScalarField
    p : array_like
        A single point of shape ``(d,)`` or an array ``(..., d)``.

    Returns
    -------
    float or ndarray
        Interpolated values; exact for fields affine along each axis.

    Raises
    ------
    DomainError
        If a point lies outside the bounding box shrunk by one cell.
    """
    pts = np.asarray(p, dtype=float)
    idx, frac = _locate(field, pts)
    out = _multilinear(field.values, idx, frac)
    return float(out) if pts.ndim == 1 else out


def gradient_field(field: ScalarField) -> np.ndarray:
    """Finite-difference gradient at every node.

    Central differences in the interior and first-order one-sided differences
    on the faces.  Returns an array of shape ``extents + (d,)``.
    """
    if min(field.extents) < 3:
        raise DomainError("gradient_field needs at least 3 nodes per axis")
    grads = np.gradient(field.values, *field.spacing, edge_order=1)
    return np.stack(grads, axis=-1)


def evaluate_gradient(f: Evaluable, points: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Gradient of an evaluable, analytic if it provides ``grad``."""
    grad = getattr(f, "grad", None)
    if grad is not None:
        return np.asarray(grad(points), dtype=float)
    points = np.asarray(points, dtype=float)
    out = np.empty_like(points)
    for k in range(points.shape[-1]):
        e = np.zeros(points.shape[-1])
        e[k] = step
        out[..., k] = (np.asarray(f(points + e)) - np.asarray(f(points - e))) / (2 * step)
    return out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Quadrature nodes and positive weights on the unit ball or unit sphere.

    ``integrate_ball`` and ``integrate_sphere`` map the rule to ``B_r(c)`` or
    ``∂B_r(c)``.  ``degree`` is the polynomial degree integrated exactly.
    Ball rules built by :func:`ball_rule` are tensor products; their radial
    nodes and weights (including ``r^{d-1}``) and the sphere factor are kept
    so that homogeneous functions can be evaluated once per direction.
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: str
    degree: int
    radial_nodes: np.ndarray | None = None
    radial_weights: np.ndarray | None = None
    sphere: "QuadratureRule | None" = None

    def __post_init__(self):
        if self.domain not in ("ball", "sphere"):
            raise ConfigurationError(f"unknown quadrature domain {self.domain!r}")
        if np.any(self.weights <= 0):
            raise ConfigurationError("quadrature weights must be positive")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def d(self) -> int:
        return self.nodes.shape[1]

    @property
    def measure(self) -> float:
        return float(np.sum(self.weights))

    def mapped(self, center: Sequence[float], r: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights transported to the ball or sphere of radius ``r``."""
        if r <= 0:
            raise DomainError("radius must be positive")
        c = np.asarray(center, dtype=float)
        power = self.d if self.domain == "ball" else self.d - 1
        return c + r * self.nodes, self.weights * r**power


def _rotation_to(axis: np.ndarray) -> np.ndarray:
    """Orthogonal matrix whose last column is ``axis`` (unit vector in R^3)."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    helper = np.eye(3)[np.argmin(np.abs(a))]
    u = np.cross(a, helper)
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    return np.column_stack([u, v, a])


def sphere_rule(d: int, n: int = 64, axis: Sequence[float] | None = None) -> QuadratureRule:
    """Product rule on the unit sphere.

    For ``d=2`` the rule is the ``n``-point trapezoid rule on the circle,
    ``n`` rounded up to a multiple of 4; when ``axis`` is given the nodes
    include ``axis`` and its perpendiculars.  For ``d=3`` the polar variable
    ``t = cos(theta)`` uses Gauss-Legendre on each hemisphere with ``n // 2``
    points, times ``n`` equispaced longitudes; ``axis`` becomes the pole so
    that the great circle orthogonal to it separates the hemispheres.
    """
    if d == 2:
        n = 4 * math.ceil(n / 4)
        offset = 0.0 if axis is None else math.atan2(axis[1], axis[0])
        th = offset + 2 * math.pi * np.arange(n) / n
        nodes = np.column_stack([np.cos(th), np.sin(th)])
        weights = np.full(n, 2 * math.pi / n)
        return QuadratureRule(nodes, weights, "sphere", n - 1)
    if d == 3:
        nh = max(2, n // 2)
        x, w = leggauss(nh)
        t = np.concatenate([(x - 1) / 2, (x + 1) / 2])
        wt = np.concatenate([w / 2, w / 2])
        nphi = n
        phi = 2 * math.pi * np.arange(nphi) / nphi
        T, P = np.meshgrid(t, phi, indexing="ij")
        st = np.sqrt(1 - T**2)
        nodes = np.column_stack([(st * np.cos(P)).ravel(), (st * np.sin(P)).ravel(), T.ravel()])
        weights = np.outer(wt, np.full(nphi, 2 * math.pi / nphi)).ravel()
        if axis is not None:
            nodes = nodes @ _rotation_to(np.asarray(axis)).T
        return QuadratureRule(nodes, weights, "sphere", min(2 * nh - 1, nphi - 1))
    raise DomainError(f"unsupported dimension {d}")


def ball_rule(d: int, n_radial: int = 32, n_angular: int = 64, axis: Sequence[float] | None = None) -> QuadratureRule:
    """Gauss-Legendre in the radius times :func:`sphere_rule` on the unit ball."""
    sph = sphere_rule(d, n_angular, axis)
    x, w = leggauss(n_radial)
    r = (x + 1) / 2
    wr = w / 2 * r ** (d - 1)
    nodes = (r[:, None, None] * sph.nodes[None, :, :]).reshape(-1, d)
    weights = np.outer(wr, sph.weights).ravel()
    return QuadratureRule(nodes, weights, "ball", min(2 * n_radial - d, sph.degree), r, wr, sph)


@lru_cache(maxsize=None)
def default_sphere_rule(d: int) -> QuadratureRule:
    return sphere_rule(d, 128 if d == 2 else 48)


@lru_cache(maxsize=None)
def default_ball_rule(d: int) -> QuadratureRule:
    return ball_rule(d, 48, 128) if d == 2 else ball_rule(d, 24, 40)


def _check_rule(rule: QuadratureRule, domain: str, d: int | None = None) -> None:
    if rule.domain != domain:
        raise ConfigurationError(f"expected a {domain} rule, got a {rule.domain} rule")
    if d is not None and rule.d != d:
        raise ConfigurationError("rule dimension does not match the center")


def integrate_ball(f: Evaluable, center: Sequence[float], r: float, rule: QuadratureRule) -> float:
    """Approximate ``∫_{B_r(center)} f dx`` with a ball rule.

    Examples
    --------
    >>> rule = ball_rule(2, 8, 16)
    >>> round(integrate_ball(lambda x: np.ones(len(x)), (0.0, 0.0), 1.0, rule), 10)
    3.1415926536
    """
    _check_rule(rule, "ball", len(center))
    x, w = rule.mapped(center, r)
    return float(np.dot(w, np.asarray(f(x), dtype=float)))


def integrate_sphere(f: Evaluable, center: Sequence[float], r: float, rule: QuadratureRule) -> float:
    """Approximate ``∫_{∂B_r(center)} f dH^{d-1}`` with a sphere rule."""
    _check_rule(rule, "sphere", len(center))
    x, w = rule.mapped(center, r)
    return float(np.dot(w, np.asarray(f(x), dtype=float)))


# ---------------------------------------------------------------------------
# FLD1 snapshots
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_fld1(field: ScalarField, dest: str | PathLike | io.TextIOBase, comments: Sequence[str] = ()) -> None:
    """Write ``field`` in the FLD1 text format (17 significant digits).

    ``comments`` become ``#`` lines between the header and the values.
    """
    header = "FLD1 d={} n={} h={} o={} flags={}".format(
        field.d,
        ",".join(str(n) for n in field.extents),
        ",".join(_fmt(h) for h in field.spacing),
        ",".join(_fmt(o) for o in field.origin),
        "nonneg" if field.nonneg else "none",
    )
    rows = field.values.reshape(-1, field.extents[-1])
    body = "\n".join(" ".join(_fmt(v) for v in row) for row in rows)
    notes = "".join(f"# {c}\n" for c in comments)
    text = header + "\n" + notes + body + "\n"
    if isinstance(dest, io.TextIOBase):
        dest.write(text)
    else:
        with open(dest, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)


def read_fld1(src: str | PathLike | io.TextIOBase) -> ScalarField:
    """Read a field written by :func:`write_fld1`."""
    if isinstance(src, io.TextIOBase):
        text = src.read()
    else:
        with open(src, encoding="ascii") as fh:
            text = fh.read()
    header, _, body = text.partition("\n")
    parts = header.split()
    if not parts or parts[0] != "FLD1":
        raise ConfigurationError("not an FLD1 file")
    try:
        kv = dict(p.split("=", 1) for p in parts[1:])
        d = int(kv["d"])
        n = tuple(int(v) for v in kv["n"].split(","))
        h = tuple(float(v) for v in kv["h"].split(","))
        o = tuple(float(v) for v in kv["o"].split(","))
        flags = kv["flags"]
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"malformed FLD1 header: {header!r}") from exc
    body = "\n".join(ln for ln in body.splitlines() if not ln.startswith("#"))
    values = np.array(body.split(), dtype=float)
    if len(n) != d or values.size != math.prod(n):
        raise ConfigurationError("FLD1 value count does not match the header")
    return ScalarField(o, h, values.reshape(n), flags == "nonneg")
