"""Energy functionals of the logarithmic obstacle problem.

Notation used in the code: ``mu(r) = r^2 (1 - 2 log r)`` is the blow-up
scale, ``alpha(r) = 1 - 1/(2 log r)`` the variable homogeneity weight, and for
a function ``v`` on the unit ball

* ``M(r; v)  = alpha(r) ∫ (|∇v|²/2 + G(r; v)) - ∫_{∂B} v²``,
* ``M̃(r; v) = alpha(r) ∫ |∇v|²/2 - ∫_{∂B} v²``,
* ``M0(v)    = ∫ (|∇v|²/2 + v) - ∫_{∂B} v²``,

with ``G(r; v) = v/(1 - 2 log r) * (1 - log(v mu(r)))``.  The Weiss energy
``W(r; u, x0)`` equals ``M(r; u_r)`` for ``u_r(x) = u(x0 + r x)/mu(r)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field
from os import PathLike
from typing import Sequence

import numpy as np

from .errors import DomainError
from .geometry import (
    Evaluable,
    QuadratureRule,
    ScalarField,
    ball_rule,
    default_ball_rule,
    default_sphere_rule,
    evaluate_gradient,
    sphere_area,
    sphere_rule,
)
from .spherical import HalfSpaceSolution, HomogeneousExtension, SphereTrace

LOG = "log_obstacle"
CLASSICAL = "classical_obstacle"


def theta_constant(d: int) -> float:
    """Energy density of quadratic blow-ups, ``area(S^{d-1}) / (4 d (d+2))``."""
    return sphere_area(d) / (4 * d * (d + 2))


@dataclass(frozen=True)
class ScalingFactors:
    r: float
    mu: float
    alpha: float


def mu(r: float | np.ndarray) -> float | np.ndarray:
    """Blow-up scale ``r^2 (1 - 2 log r)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("mu needs r > 0")
    out = r * r * (1 - 2 * np.log(r))
    return float(out) if out.ndim == 0 else out


def scaling_factors(r: float) -> ScalingFactors:
    """``mu(r)`` and ``alpha(r)`` for ``0 < r < 1``.

    Examples
    --------
    >>> s = scaling_factors(math.exp(-0.5))
    >>> round(s.mu, 7), round(s.alpha, 12)
    (0.7357589, 2.0)
    """
    if not 0 < r < 1:
        raise DomainError(f"scaling factors need 0 < r < 1, got {r}")
    return ScalingFactors(float(r), mu(r), 1.0 - 1.0 / (2.0 * math.log(r)))


def _check_nonneg(v: np.ndarray, what: str, points: np.ndarray | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    bad = v < -1e-13 * scale
    if np.any(bad):
        i = int(np.argmax(bad))
        where = f" at node {points[i].tolist()}" if points is not None else f" at index {i}"
        raise DomainError(f"{what} is negative ({v.flat[i]!r}){where}")
    return np.maximum(v, 0.0)


def _xlogx_safe(v: np.ndarray, logv: np.ndarray) -> np.ndarray:
    return np.where(v > 0, v * logv, 0.0)


def _log_pos(v: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), 0.0)


def potential_F(u, mode: str = LOG):
    """Nodewise potential ``u (1 - log u)`` (``u`` in the classical mode), ``F(0)=0``."""
    u = _check_nonneg(u, "potential argument")
    if mode == CLASSICAL:
        out = u
    else:
        out = u - _xlogx_safe(u, _log_pos(u))
    return float(out) if np.ndim(out) == 0 else out


def potential_G(r: float, v):
    """``G(r; v) = v/(1 - 2 log r) * (1 - log(v mu(r)))`` evaluated in log space."""
    if not 0 < r < 1:
        raise DomainError(f"G needs 0 < r < 1, got {r}")
    v = _check_nonneg(v, "G argument")
    lr = math.log(r)
    m = 1 - 2 * lr
    logv = _log_pos(v)
    out = (v * (1 - 2 * lr - math.log(m)) - _xlogx_safe(v, logv)) / m
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Energies on the unit ball
# ---------------------------------------------------------------------------


def _infer_dim(v) -> int | None:
    for attr in ("d",):
        if hasattr(v, attr):
            return int(getattr(v, attr))
    if isinstance(v, HomogeneousExtension):
        return v.trace.d
    if isinstance(v, HalfSpaceSolution):
        return len(v.nu)
    if hasattr(v, "A"):
        return np.asarray(v.A).shape[0]
    return None


def _kink_axis(v) -> np.ndarray | None:
    """Direction of a half-space kink carried by ``v``, if there is exactly one."""
    if isinstance(v, HalfSpaceSolution):
        return v.nu if np.any(v.nu) else None
    trace = getattr(v, "trace", None)
    if isinstance(trace, SphereTrace) and len(trace.tails) == 1:
        return np.asarray(trace.tails[0][1])
    axis = getattr(v, "kink_axis", None)
    return None if axis is None else np.asarray(axis)


def unit_ball_rules(d: int, v=None, fine: bool = False) -> tuple[QuadratureRule, QuadratureRule]:
    """Ball and sphere rules, aligned with a half-space kink of ``v`` if present."""
    axis = _kink_axis(v) if v is not None else None
    if axis is None and not fine:
        return default_ball_rule(d), default_sphere_rule(d)
    n_ang = (256 if fine else 128) if d == 2 else (64 if fine else 48)
    n_rad = 64 if fine else 48
    return ball_rule(d, n_rad, n_ang, axis), sphere_rule(d, n_ang, axis)


def dirichlet_and_potential(v: Evaluable, rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values, squared gradients and nodes of ``v`` on a unit-ball rule."""
    x = rule.nodes
    tensor = getattr(v, "tensor_eval", None)
    if tensor is not None and rule.sphere is not None:
        vals, g = tensor(rule.radial_nodes, rule.sphere.nodes)
        return vals.reshape(-1), np.einsum("...d,...d->...", g, g).reshape(-1), x
    vals = np.asarray(v(x), dtype=float)
    g = evaluate_gradient(v, x)
    return vals, np.einsum("nd,nd->n", g, g), x


def m_energy(
    variant: str,
    v: Evaluable,
    r: float | None = None,
    d: int | None = None,
    rules: tuple[QuadratureRule, QuadratureRule] | None = None,
) -> float:
    """Quadrature value of ``M``, ``M_tilde`` or ``M0`` for ``v`` on the unit ball.

    Parameters
    ----------
    variant : {"M", "M_tilde", "M0"}
    v : evaluable
        Function on the unit ball; must be non-negative for ``M`` and ``M0``.
    r : float, optional
        Scale in ``(0, 1)``; required unless ``variant == "M0"``.
    d : int, optional
        Dimension, inferred from ``v`` when possible.
    rules : (ball rule, sphere rule), optional
        Unit rules; chosen automatically (aligned with half-space kinks).

    Raises
    ------
    DomainError
        Negative ``v`` at a node for ``M``/``M0``, or ``r`` outside ``(0, 1)``.
    """
    if variant not in ("M", "M_tilde", "M0"):
        raise DomainError(f"unknown energy variant {variant!r}")
    d = d or _infer_dim(v)
    if d is None:
        raise DomainError("dimension could not be inferred; pass d")
    ball, sph = rules if rules is not None else unit_ball_rules(d, v)
    vals, g2, x = dirichlet_and_potential(v, ball)
    bvals = np.asarray(v(sph.nodes), dtype=float)
    boundary = float(np.dot(sph.weights, bvals * bvals))
    if variant == "M0":
        vals = _check_nonneg(vals, "v", x)
        return float(np.dot(ball.weights, 0.5 * g2 + vals)) - boundary
    if r is None:
        raise DomainError(f"{variant} needs a scale r")
    a = scaling_factors(r).alpha
    if variant == "M_tilde":
        return a * float(np.dot(ball.weights, 0.5 * g2)) - boundary
    vals = _check_nonneg(vals, "v", x)
    return a * float(np.dot(ball.weights, 0.5 * g2 + potential_G(r, vals))) - boundary


# ---------------------------------------------------------------------------
# Weiss energy and its correction term
# ---------------------------------------------------------------------------


def _check_ball(u, x0, r) -> None:
    if isinstance(u, ScalarField) and not u.contains_ball(x0, r):
        raise DomainError(f"ball of radius {r} around {list(x0)} is not inside the field domain")


def _dim_of(u, x0) -> int:
    return len(x0)


def weiss_energy(
    u: Evaluable,
    x0: Sequence[float],
    r: float,
    rules: tuple[QuadratureRule, QuadratureRule] | None = None,
) -> float:
    """Weiss energy ``W(r; u, x0)`` in original variables.

    ``W = alpha/(r^{d-2} mu^2) ∫_{B_r}(|∇u|²/2 + F(u)) - 1/(r^{d-1} mu^2) ∫_{∂B_r} u²``,
    which equals ``M(r; u_r)`` after the change of variables.
    """
    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    _check_ball(u, x0, r)
    s = scaling_factors(r)
    ball, sph = rules if rules is not None else unit_ball_rules(d, u)
    xb, wb = ball.mapped(x0, r)
    vals = _check_nonneg(u(xb), "u", xb)
    g = evaluate_gradient(u, xb)
    bulk = float(np.dot(wb, 0.5 * np.einsum("nd,nd->n", g, g) + potential_F(vals)))
    xs, ws = sph.mapped(x0, r)
    bvals = np.asarray(u(xs), dtype=float)
    surf = float(np.dot(ws, bvals * bvals))
    return s.alpha * bulk / (r ** (d - 2) * s.mu**2) - surf / (r ** (d - 1) * s.mu**2)


def _rescaled_samples(u, x0, r, rule: QuadratureRule):
    s = scaling_factors(r)
    x = x0 + r * rule.nodes
    vals = _check_nonneg(u(x), "u", x) / s.mu
    grads = evaluate_gradient(u, x) * (r / s.mu)
    return vals, grads, s


def i_correction(
    u: Evaluable,
    x0: Sequence[float],
    r: float,
    rules: tuple[QuadratureRule, QuadratureRule] | None = None,
) -> float:
    """Correction integrand ``I(r; u, x0)`` of the almost-monotonicity formula.

    With ``L = log r``, ``m = 1 - 2L`` and ``u_r = u(x0 + r x)/mu(r)``::

        I = 1/(2 r L²) ∫ (|∇u_r|²/2 + (u_r/m)(1 - log(u_r r² m)))
            + (1 - 1/(2L)) ∫ (2 u_r/(r m²)) (1 - log(u_r m))

    over the unit ball.
    """
    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    _check_ball(u, x0, r)
    ball, _ = rules if rules is not None else unit_ball_rules(d, u)
    v, g, s = _rescaled_samples(u, x0, r, ball)
    L = math.log(r)
    m = 1 - 2 * L
    logv = _log_pos(v)
    first = 0.5 * np.einsum("nd,nd->n", g, g) + (v * (1 - 2 * L - math.log(m)) - _xlogx_safe(v, logv)) / m
    second = 2.0 / (r * m * m) * (v * (1 - math.log(m)) - _xlogx_safe(v, logv))
    return float(np.dot(ball.weights, first)) / (2 * r * L * L) + (1 - 1 / (2 * L)) * float(np.dot(ball.weights, second))


def weiss_rhs(
    u: Evaluable,
    x0: Sequence[float],
    r: float,
    rules: tuple[QuadratureRule, QuadratureRule] | None = None,
) -> float:
    """Right-hand side ``(alpha/r) ∫_{∂B}(∇u_r·x - (2/alpha) u_r)² + I(r)`` of ``dW/dr``."""
    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    rules = rules if rules is not None else unit_ball_rules(d, u)
    _, sph = rules
    v, g, s = _rescaled_samples(u, x0, r, sph)
    radial = np.einsum("nd,nd->n", g, sph.nodes) - (2 / s.alpha) * v
    return s.alpha / r * float(np.dot(sph.weights, radial * radial)) + i_correction(u, x0, r, rules)


def weiss_derivative(u: Evaluable, x0: Sequence[float], r: float, rel_step: float = 1e-4, rules=None) -> float:
    """Central finite difference of ``W`` in ``r``."""
    dr = rel_step * r
    return (weiss_energy(u, x0, r + dr, rules) - weiss_energy(u, x0, r - dr, rules)) / (2 * dr)


def t_term(s: float, c, d: int | None = None) -> float:
    """Auxiliary term ``(d+2)^{-2} ∫_{∂B} c / log s``.

    ``c`` is a :class:`SphereTrace` or an evaluable on the unit sphere (then
    ``d`` is required).
    """
    if not 0 < s < 1:
        raise DomainError(f"T needs 0 < s < 1, got {s}")
    if isinstance(c, SphereTrace):
        d, integral = c.d, c.integral()
    else:
        if d is None:
            raise DomainError("pass d for evaluable traces")
        rule = default_sphere_rule(d)
        integral = float(np.dot(rule.weights, c(rule.nodes)))
    return integral / ((d + 2) ** 2 * math.log(s))


# ---------------------------------------------------------------------------
# Corrected excess table
# ---------------------------------------------------------------------------


def envelope_tail(r_min: float, c: float) -> float:
    """``∫_0^{r_min} c log(-log ρ)/(ρ log²ρ) dρ = c (1 + log t)/t`` with ``t = -log r_min``."""
    t = -math.log(r_min)
    if t <= 1:
        raise DomainError("the envelope tail needs r_min < 1/e")
    return c * (1 + math.log(t)) / t


def envelope_constant(radii: np.ndarray, I: np.ndarray) -> float:
    """Smallest ``C`` with ``|I(ρ)| <= C log(-log ρ)/(ρ log² ρ)`` on the samples below ``1/e``."""
    mask = radii < math.exp(-1) * (1 - 1e-12)
    if not np.any(mask):
        return 0.0
    rho = radii[mask]
    env = np.log(-np.log(rho)) / (rho * np.log(rho) ** 2)
    return float(np.max(np.abs(I[mask]) / env))


@dataclass
class EnergyTable:
    """Per-radius energies along a blow-up sequence."""

    center: tuple[float, ...]
    radii: np.ndarray
    W: np.ndarray
    I: np.ndarray
    int_I: np.ndarray
    W_I: np.ndarray
    M: np.ndarray
    excess: np.ndarray
    limit: float
    tail: float = 0.0
    envelope_C: float = 0.0
    notes: list[str] = dc_field(default_factory=list)

    COLUMNS = ("r", "W", "I", "int_I", "W_I", "M", "excess")

    def rows(self):
        cols = [self.radii, self.W, self.I, self.int_I, self.W_I, self.M, self.excess]
        return list(zip(*[np.asarray(c, dtype=float) for c in cols]))

    def to_csv(self, comments: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in comments:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in self.rows():
            w.writerow([format(v, ".17g") for v in row])
        return buf.getvalue()

    def write_csv(self, path: str | PathLike, comments: Sequence[str] = ()) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv(comments))

    def monotonicity_violations(self, rel_tol: float = 1e-3) -> list[int]:
        """Indices ``i`` where ``W_I`` drops from ``radii[i]`` to ``radii[i+1]`` beyond tolerance."""
        W_I = self.W_I
        drops = W_I[:-1] - W_I[1:]
        allowance = rel_tol * (1 + np.abs(W_I[1:]))
        return [int(i) for i in np.nonzero(drops > allowance)[0]]


def read_energy_csv(path: str | PathLike) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    return {name: data[:, i] for i, name in enumerate(header)}


def corrected_excess_table(
    u: Evaluable,
    x0: Sequence[float],
    radii: Sequence[float],
    limit: float | None = None,
    include_tail: bool = True,
    rules: tuple[QuadratureRule, QuadratureRule] | None = None,
) -> EnergyTable:
    """Tabulate ``W``, ``I``, ``∫_0^r I``, ``W_I``, ``M(r; u_r)`` and the excess.

    ``∫_0^r I`` is the trapezoid integral over the supplied radii plus a tail
    below the smallest radius obtained from the envelope
    ``C log(-log ρ)/(ρ log²ρ)`` matched to ``|I|`` at the smallest radius
    (reported separately as ``tail``; its sign follows ``I`` there).  The
    reported ``envelope_C`` is the bound constant over all samples.

    Parameters
    ----------
    limit : float, optional
        Estimate of ``W_I(0+)``; defaults to the quadratic energy density.
    """
    from .blowup import rescale  # local import: blowup depends on this module

    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) < 1 or np.any(np.diff(radii) <= 0):
        raise DomainError("radii must be strictly increasing")
    limit = theta_constant(d) if limit is None else float(limit)
    rules = rules if rules is not None else unit_ball_rules(d, u)
    W = np.array([weiss_energy(u, x0, r, rules) for r in radii])
    I = np.array([i_correction(u, x0, r, rules) for r in radii])
    M = np.array([m_energy("M", rescale(u, x0, r), r, d, rules) for r in radii])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (I[1:] + I[:-1]) * np.diff(radii))])
    notes: list[str] = []
    C = envelope_constant(radii, I)
    tail = 0.0
    if include_tail and C > 0:
        if radii[0] < math.exp(-1):
            # the bound constant is a max over all radii; the tail uses the
            # envelope matched to I at the smallest radius
            c_tail = envelope_constant(radii[:1], I[:1])
            tail = math.copysign(envelope_tail(radii[0], c_tail), I[0])
        else:
            notes.append("no tail: smallest radius is not below 1/e")
    int_I = cum + tail
    W_I = W - int_I
    return EnergyTable(tuple(x0.tolist()), radii, W, I, int_I, W_I, M, W_I - limit, limit, tail, C, notes)
