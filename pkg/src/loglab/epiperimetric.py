"""Competitors that lower the corrected excess of traces close to the quadratic cone.

A trace ``c`` on the unit sphere splits as ``c = q_nu + Q_A + phi`` (half-space
part, quadratic part, modes above degree 2).  The competitor keeps the
non-negative quadratic part ``Q_B`` chosen from ``Q_A`` and the half-space
part 2-homogeneous, and extends the remainder ``psi = Q_A - Q_B + phi``
``alpha``-homogeneously with ``alpha > 2``:

    v = q_nu + Q_B + |x|^alpha psi(x/|x|).

``check_inequality`` compares ``M_I(s; v) - Θ`` with the contracted excess of
the 2-homogeneous extension ``z`` of ``c`` plus the auxiliary term ``T``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from .energy import (
    EnergyTable,
    m_energy,
    scaling_factors,
    t_term,
    theta_constant,
    unit_ball_rules,
)
from .errors import ConfigurationError, DomainError, RejectionError
from .geometry import sphere_rule
from .spherical import (
    DEFAULT_CUTOFF,
    HalfSpaceSolution,
    HomogeneousExtension,
    QuadraticForm,
    SphereTrace,
    dist_to_K,
    mode_list,
    split_modes,
)

ETA_VARIANTS = ("positive", "negative")
CONVENTIONS = ("exact", "doubled")
ALPHA_MAX = 2.5


def decay_exponent(d: int) -> float:
    """Exponent of the excess in the contraction factor: 0 in the plane, (d-1)/(d+3) otherwise."""
    return 0.0 if d == 2 else (d - 1) / (d + 3)


@dataclass(frozen=True)
class ContractionParams:
    d: int
    alpha: float
    s: float
    eps_alpha: float
    lam_alpha: float
    eta_alpha: float
    alpha_s: float
    gamma: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def contraction_params(d: int, alpha: float, s: float, eta_variant: str = "positive") -> ContractionParams:
    """Constants attached to the homogeneity ``alpha`` at scale ``s``.

    ``eta_variant="negative"`` flips the sign of the log correction, which is positive for ``s < 1`` by default.

    Examples
    --------
    >>> p = contraction_params(2, 2.5, math.exp(-10))
    >>> round(p.eps_alpha, 12), p.lam_alpha, round(p.eta_alpha, 12), round(p.alpha_s, 12)
    (0.111111111111, 6.25, 0.8125, 1.05)
    """
    if d not in (2, 3):
        raise DomainError(f"unsupported dimension {d}")
    if not 2 < alpha <= ALPHA_MAX:
        raise DomainError(f"homogeneity must lie in (2, {ALPHA_MAX}], got {alpha}")
    if not 0 < s < 1:
        raise DomainError(f"scale must lie in (0, 1), got {s}")
    if eta_variant not in ETA_VARIANTS:
        raise ConfigurationError(f"unknown eta variant {eta_variant!r}")
    eta = -((alpha + 2) * (d + alpha) - 4) / (2 * math.log(s))
    if eta_variant == "negative":
        eta = -eta
    return ContractionParams(
        d=d,
        alpha=float(alpha),
        s=float(s),
        eps_alpha=(alpha - 2) / (d + alpha),
        lam_alpha=alpha * (alpha + d - 2),
        eta_alpha=eta,
        alpha_s=scaling_factors(s).alpha,
        gamma=decay_exponent(d),
    )


def alpha_from_eps(eps_alpha: float, d: int) -> float:
    """Inverse of ``eps_alpha = (alpha - 2)/(d + alpha)``."""
    return (2 + d * eps_alpha) / (1 - eps_alpha)


# ---------------------------------------------------------------------------
# Fourier form of the homogeneity gain
# ---------------------------------------------------------------------------


def _check_high_modes(phi: SphereTrace) -> None:
    low = phi.eigenvalues <= 2 * phi.d
    scale = max(1.0, float(np.max(np.abs(phi.coeffs))))
    if np.any(np.abs(phi.coeffs[low]) > 1e-12 * scale):
        raise DomainError("phi must only contain modes with eigenvalue above 2d")


def fourier_identity(
    phi: SphereTrace,
    alpha: float,
    s: float,
    eta_variant: str = "positive",
    convention: str = "exact",
) -> float:
    """Closed form of ``M̃(s; |x|^alpha phi) - (1 - eps_alpha) M̃(s; |x|^2 phi)``.

    Per mode of eigenvalue ``λ_j`` and coefficient ``c_j`` the contribution is
    ``k c_j² eps_alpha/(d + 2 alpha - 2) (λ_alpha + eta_alpha - alpha(s) λ_j)``
    with ``k = 1/2`` for ``convention="exact"`` (the value matching quadrature)
    and ``k = 1`` for ``"doubled"``.  Sums over modes use ``‖phi‖²`` and
    ``‖∇_θ phi‖²``, so half-space tails are handled exactly.

    Raises
    ------
    DomainError
        If ``phi`` has a nonzero mode of eigenvalue at most ``2d``.
    """
    if convention not in CONVENTIONS:
        raise ConfigurationError(f"unknown convention {convention!r}")
    _check_high_modes(phi)
    p = contraction_params(phi.d, alpha, s, eta_variant)
    n2 = phi.norm() ** 2
    g2 = phi.grad_norm() ** 2
    k = 0.5 if convention == "exact" else 1.0
    return k * p.eps_alpha / (p.d + 2 * alpha - 2) * ((p.lam_alpha + p.eta_alpha) * n2 - p.alpha_s * g2)


def fourier_identity_quadrature(phi: SphereTrace, alpha: float, s: float) -> float:
    """Quadrature of ``M̃(s; |x|^alpha phi) - (1 - eps_alpha) M̃(s; |x|^2 phi)``."""
    p = contraction_params(phi.d, alpha, s)
    rules = unit_ball_rules(phi.d, HomogeneousExtension(phi, 2.0))
    hi = m_energy("M_tilde", HomogeneousExtension(phi, float(alpha)), s, phi.d, rules)
    lo = m_energy("M_tilde", HomogeneousExtension(phi, 2.0), s, phi.d, rules)
    return hi - (1 - p.eps_alpha) * lo


# ---------------------------------------------------------------------------
# Non-negative quadratic part and competitor
# ---------------------------------------------------------------------------


def choose_qb(A: QuadraticForm | np.ndarray, tol: float = 1e-12) -> QuadraticForm:
    """Positive semidefinite ``Q_B`` with ``Q_A - Q_B`` harmonic.

    In the eigenbasis ``Q_A = Σ a_j x_j²``.  Negative coefficients are set to
    zero and their total is removed from the largest one, which keeps the
    trace of ``A - B`` at zero.

    Raises
    ------
    RejectionError
        Unless ``a_max >= 1/(2d) >= Σ |a_j|`` over negative ``a_j``.
    """
    Q = A if isinstance(A, QuadraticForm) else QuadraticForm(A)
    w, V = np.linalg.eigh(Q.A)
    a = w / 2
    neg = a < 0
    if not np.any(neg):
        return Q
    d = Q.d
    deficit = float(-a[neg].sum())
    if not (a[-1] >= 1 / (2 * d) - tol and 1 / (2 * d) >= deficit - tol):
        raise RejectionError(
            f"trace not delta-close to the quadratic cone: largest coefficient {a[-1]:.6g}, "
            f"negative mass {deficit:.6g}, threshold {1 / (2 * d):.6g}"
        )
    b = np.where(neg, 0.0, a)
    b[-1] = a[-1] - deficit
    B = V @ np.diag(2 * b) @ V.T
    return QuadraticForm(0.5 * (B + B.T))


def negative_coefficients(A: QuadraticForm) -> np.ndarray:
    """Negative eigen-coefficients ``a_j`` of ``Q_A = Σ a_j x_j²``."""
    a = A.eigenvalues / 2
    return a[a < 0]


@dataclass(frozen=True, eq=False)
class Competitor:
    """``v = q_nu + Q_B + |x|^alpha psi(x/|x|)`` on the unit ball."""

    nu: np.ndarray
    B: QuadraticForm
    psi: SphereTrace
    alpha: float

    @property
    def d(self) -> int:
        return self.B.d

    @property
    def kink_axis(self):
        return self.nu if np.any(self.nu) else None

    def _fixed(self):
        parts = [self.B]
        if np.any(self.nu):
            parts.append(HalfSpaceSolution(self.nu))
        return parts

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = HomogeneousExtension(self.psi, self.alpha)(x)
        for f in self._fixed():
            out = out + f(x)
        return out

    def grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = HomogeneousExtension(self.psi, self.alpha).grad(x)
        for f in self._fixed():
            out = out + f.grad(x)
        return out

    def tensor_eval(self, radii, theta):
        vals, grads = HomogeneousExtension(self.psi, self.alpha).tensor_eval(radii, theta)
        for f in self._fixed():
            fv, fg = f.tensor_eval(radii, theta)
            vals, grads = vals + fv, grads + fg
        return vals, grads


@dataclass(frozen=True)
class IContext:
    """Source of ``∫_0^s I``: zero, or interpolated from an energy table in ``log r``."""

    radii: tuple[float, ...] = ()
    int_I: tuple[float, ...] = ()
    label: str = "zero"

    @classmethod
    def zero(cls) -> "IContext":
        return cls()

    @classmethod
    def from_table(cls, table: EnergyTable) -> "IContext":
        return cls(tuple(map(float, table.radii)), tuple(map(float, table.int_I)), "table")

    def integral(self, s: float) -> float:
        if not self.radii:
            return 0.0
        r = np.asarray(self.radii)
        if not r[0] * (1 - 1e-12) <= s <= r[-1] * (1 + 1e-12):
            raise DomainError(f"scale {s} outside the tabulated radii [{r[0]}, {r[-1]}]")
        return float(np.interp(math.log(s), np.log(r), np.asarray(self.int_I)))

    def to_dict(self) -> dict:
        return {"label": self.label, "radii": list(self.radii), "int_I": list(self.int_I)}


@dataclass(frozen=True)
class CompetitorBuild:
    v: object
    z: HomogeneousExtension
    params: ContractionParams | None
    excess: float
    alpha: float
    eps_alpha: float
    grad_norm_phi: float
    is_z: bool
    clamped: bool
    B: QuadraticForm
    nu: np.ndarray
    psi: SphereTrace
    notes: tuple[str, ...] = ()


def _trace_min(c: SphereTrace) -> float:
    rule = sphere_rule(c.d, max(64, 8 * c.L) if c.d == 2 else max(48, 6 * c.L))
    return float(np.min(c(rule.nodes)))


def build_competitor(
    c: SphereTrace,
    s: float,
    eps: float = 0.05,
    context: IContext | None = None,
    delta: float = 0.05,
    c4: float = 1.0,
) -> CompetitorBuild:
    """Competitor with the boundary values of ``c`` at scale ``s``.

    The homogeneity follows ``eps_alpha = eps (c4 ‖∇_θ phi‖²)^gamma``, clamped
    so that ``alpha <= 5/2``.  When the excess of ``z`` is not positive, or
    ``phi`` vanishes, the competitor is ``z`` itself.

    Raises
    ------
    RejectionError
        Negative trace, distance to the cone above ``delta``, ``M0(z) - Θ > 1``,
        or a quadratic part violating the hypothesis of :func:`choose_qb`.
    """
    if not 0 < s < 1:
        raise DomainError(f"scale must lie in (0, 1), got {s}")
    context = context or IContext.zero()
    d = c.d
    cmin = _trace_min(c)
    if cmin < -1e-12:
        raise RejectionError(f"trace is negative on the sphere (min {cmin:.3e})")
    dist, _ = dist_to_K(c)
    if dist > delta:
        raise RejectionError(f"trace not delta-close to the quadratic cone: distance {dist:.6g} > {delta}")
    z = HomogeneousExtension(c, 2.0)
    rules = unit_ball_rules(d, z)
    theta = theta_constant(d)
    m0 = m_energy("M0", z, None, d, rules)
    if m0 - theta > 1:
        raise RejectionError(f"M0(z) - Θ = {m0 - theta:.6g} exceeds 1")
    excess = m_energy("M", z, s, d, rules) - context.integral(s) - theta

    split = split_modes(c)
    B = choose_qb(QuadraticForm(split.A))
    psi = (QuadraticForm(split.A).trace(c.L) - B.trace(c.L)) + split.phi
    gphi = split.phi.grad_norm()
    notes: list[str] = []
    if excess <= 0 or gphi <= 1e-12:
        notes.append("competitor is z: " + ("non-positive excess" if excess <= 0 else "no higher modes"))
        return CompetitorBuild(z, z, None, excess, 2.0, 0.0, gphi, True, False, B, split.nu, psi, tuple(notes))
    gamma = decay_exponent(d)
    eps_alpha = eps * (c4 * gphi**2) ** gamma
    alpha = alpha_from_eps(eps_alpha, d) if eps_alpha < 1 else math.inf
    clamped = alpha > ALPHA_MAX
    if clamped:
        notes.append(f"alpha {alpha:.6g} clamped to {ALPHA_MAX}")
        alpha = ALPHA_MAX
    params = contraction_params(d, alpha, s)
    v = Competitor(np.asarray(split.nu), B, psi, alpha)
    return CompetitorBuild(v, z, params, excess, alpha, params.eps_alpha, gphi, False, clamped, B, split.nu, psi, tuple(notes))


# ---------------------------------------------------------------------------
# Inequality check
# ---------------------------------------------------------------------------


@dataclass
class EpiReport:
    trace: SphereTrace
    s: float
    eps: float
    delta: float
    c4: float
    context: str
    excess: float
    alpha: float
    eps_alpha: float
    grad_norm_phi: float
    T: float
    lhs: float
    rhs: float
    passed: bool
    competitor_is_z: bool
    diagnostics: dict = dc_field(default_factory=dict)
    notes: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "trace"}
        out["trace"] = self.trace.to_dict()
        return out


def _boundary_error(v, c: SphereTrace) -> float:
    rule = sphere_rule(c.d, 4 * c.L + 8 if c.d == 2 else 2 * c.L + 8)
    diff = np.asarray(v(rule.nodes)) - c(rule.nodes)
    return math.sqrt(float(np.dot(rule.weights, diff * diff)))


def check_inequality(
    c: SphereTrace,
    s: float,
    eps: float = 0.05,
    context: IContext | None = None,
    delta: float = 0.05,
    c4: float = 1.0,
    tol: float = 1e-10,
) -> EpiReport:
    """Evaluate ``M_I(s; v) - Θ <= e (1 - eps |e|^gamma) + T`` for the competitor ``v``.

    ``e = M_I(s; z) - Θ``.  Diagnostics hold the three parts of
    ``LHS - (1 - eps_alpha) e - T``: the closed-form quadratic part, the
    quadrature value ``M̃(s; ψ̃) - (1 - eps_alpha) M̃(s; ψ)``, and the
    remainder, each with its sign; plus boundary agreement and the minimum
    of ``v`` at the quadrature nodes.
    """
    context = context or IContext.zero()
    build = build_competitor(c, s, eps, context, delta, c4)
    d = c.d
    theta = theta_constant(d)
    gamma = decay_exponent(d)
    T = t_term(s, c)
    e = build.excess
    rhs = e * (1 - eps * abs(e) ** gamma) + T
    rules = unit_ball_rules(d, build.v)
    ball = rules[0]
    vals = build.v.tensor_eval(ball.radial_nodes, ball.sphere.nodes)[0] if hasattr(build.v, "tensor_eval") else build.v(ball.nodes)
    vmin = float(np.min(vals))
    diag: dict = {
        "boundary_error": _boundary_error(build.v, c),
        "min_sample": vmin,
        "negative_samples": int(np.sum(vals < -1e-13 * max(1.0, float(np.max(np.abs(vals)))))),
        "clamped": build.clamped,
        "b": float(np.trace(build.B.A)),
        "c0": float(np.dot(build.nu, build.nu)),
    }
    notes = list(build.notes)
    if diag["negative_samples"]:
        notes.append("competitor negative at sampled nodes; potential term undefined")
        lhs = math.nan
    else:
        lhs = m_energy("M", build.v, s, d, rules) - context.integral(s) - theta
    if not build.is_z and math.isfinite(lhs):
        p = build.params
        b, c0 = diag["b"], diag["c0"]
        part1 = -p.alpha_s * p.eps_alpha * theta * ((1 - b - c0) ** 2 + (1 - b) ** 2) / 2
        part3 = m_energy("M_tilde", HomogeneousExtension(build.psi, p.alpha), s, d, rules) - (1 - p.eps_alpha) * m_energy(
            "M_tilde", HomogeneousExtension(build.psi, 2.0), s, d, rules
        )
        total = lhs - (1 - p.eps_alpha) * e - T
        part2 = total - part1 - part3
        diag.update(
            part1=part1,
            part2=part2,
            part3=part3,
            part_signs=[int(np.sign(part1)), int(np.sign(part2)), int(np.sign(part3))],
            contracted_total=total,
            params=p.to_dict(),
        )
    passed = bool(math.isfinite(lhs) and lhs <= rhs + tol)
    return EpiReport(
        trace=c,
        s=float(s),
        eps=float(eps),
        delta=float(delta),
        c4=float(c4),
        context=context.label,
        excess=float(e),
        alpha=float(build.alpha),
        eps_alpha=float(build.eps_alpha),
        grad_norm_phi=float(build.grad_norm_phi),
        T=float(T),
        lhs=float(lhs),
        rhs=float(rhs),
        passed=passed,
        competitor_is_z=build.is_z,
        diagnostics=diag,
        notes=notes,
    )


def write_report_json(report: EpiReport | Sequence[EpiReport], path: str | PathLike, extra: dict | None = None) -> None:
    payload = [r.to_dict() for r in report] if isinstance(report, (list, tuple)) else report.to_dict()
    data = dict(extra or {}, reports=payload) if extra is not None else payload
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, allow_nan=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Measured constants
# ---------------------------------------------------------------------------


def trace_excess(c: SphereTrace, s: float, context: IContext | None = None) -> float:
    """``M_I(s; z) - Θ`` for the 2-homogeneous extension ``z`` of ``c``."""
    context = context or IContext.zero()
    z = HomogeneousExtension(c, 2.0)
    return m_energy("M", z, s, c.d, unit_ball_rules(c.d, z)) - context.integral(s) - theta_constant(c.d)


def c4_ratios(traces: Iterable[SphereTrace], s: float, context: IContext | None = None) -> list[float | None]:
    """``excess / ‖∇_θ phi‖²`` per trace, ``None`` when ``phi`` vanishes."""
    out: list[float | None] = []
    for c in traces:
        g2 = split_modes(c).phi.grad_norm() ** 2
        out.append(None if g2 <= 1e-24 else trace_excess(c, s, context) / g2)
    return out


def c4_measure(traces: Iterable[SphereTrace], s: float, context: IContext | None = None) -> float:
    """Largest ``excess / ‖∇_θ phi‖²`` over the family (traces without higher modes skipped).

    Returns ``nan`` when every trace is skipped.
    """
    vals = [r for r in c4_ratios(traces, s, context) if r is not None]
    return max(vals) if vals else math.nan


def higher_mode_ratio(c: SphereTrace) -> float | None:
    """``Σ a_j² / ‖∇_θ phi‖^{2(1-gamma)}`` over negative quadratic coefficients ``a_j``."""
    split = split_modes(c)
    g = split.phi.grad_norm()
    if g <= 1e-12:
        return None
    neg = negative_coefficients(QuadraticForm(split.A))
    return float(np.sum(neg**2)) / g ** (2 * (1 - decay_exponent(c.d)))


# ---------------------------------------------------------------------------
# Sweeps over constructed traces
# ---------------------------------------------------------------------------


def _random_psd(d: int, rng: np.random.Generator) -> np.ndarray:
    w = rng.dirichlet(np.ones(d))
    V, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return V @ np.diag(w) @ V.T


def random_trace_family(
    d: int,
    n: int,
    delta: float = 0.05,
    seed: int = 0,
    L: int | None = None,
    max_degree: int = 6,
    margin: float = 1e-3,
) -> list[SphereTrace]:
    """``n`` non-negative traces ``Q_A + t·m`` with ``A ⪰ 0``, ``tr A = 1``.

    ``m`` is a unit-norm random combination of modes of degree 3 to
    ``max_degree`` (weights decaying like ``degree^-2``) and ``t`` is uniform
    in ``[delta/10, delta]``, so the distance to the cone is ``t``.  Draws
    whose minimum on the sphere is below ``margin`` are redrawn.
    """
    L = L if L is not None else min(DEFAULT_CUTOFF[d], max_degree)
    if L < 3:
        raise ConfigurationError("cutoff must be at least 3")
    rng = np.random.default_rng(seed)
    modes = mode_list(d, L)
    deg = np.array([k for k, _ in modes])
    high = (deg >= 3) & (deg <= max_degree)
    out: list[SphereTrace] = []
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise RejectionError("could not draw non-negative traces; lower delta or margin")
        A = _random_psd(d, rng)
        coeffs = np.zeros(len(modes))
        coeffs[high] = rng.standard_normal(int(high.sum())) / deg[high] ** 2
        coeffs *= rng.uniform(delta / 10, delta) / np.linalg.norm(coeffs)
        c = QuadraticForm(A).trace(L) + SphereTrace(d, L, coeffs)
        if _trace_min(c) >= margin:
            out.append(c.with_nonneg(True))
    return out


@dataclass
class SweepResult:
    d: int
    reports: list[tuple[int, EpiReport]]
    c4: float
    c3: float
    config: dict

    @property
    def pass_rate(self) -> float:
        return sum(r.passed for _, r in self.reports) / len(self.reports) if self.reports else math.nan

    def pass_rates_by_scale(self) -> dict[str, float]:
        out: dict[str, list[bool]] = {}
        for _, r in self.reports:
            out.setdefault(format(r.s, ".17g"), []).append(r.passed)
        return {k: sum(v) / len(v) for k, v in out.items()}

    def failures(self) -> list[tuple[int, EpiReport]]:
        return [(i, r) for i, r in self.reports if not r.passed]

    def summary(self) -> dict:
        return {
            "d": self.d,
            "count": len(self.reports),
            "pass_rate": self.pass_rate,
            "pass_rate_by_scale": self.pass_rates_by_scale(),
            "c4_measured": self.c4,
            "c3_measured": self.c3,
            "failures": len(self.failures()),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trace_id", "s", "excess", "alpha", "lhs", "rhs", "T", "pass"])
        for i, r in self.reports:
            w.writerow([i] + [format(x, ".17g") for x in (r.s, r.excess, r.alpha, r.lhs, r.rhs, r.T)] + [str(r.passed).lower()])
        return buf.getvalue()

    def write_csv(self, path: str | PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _check_task(args):
    c, s, eps, delta, c4, tol = args
    return check_inequality(c, s, eps, None, delta, c4, tol)


def sweep(
    d: int,
    n: int = 200,
    scales: Sequence[float] = (1e-2, 1e-3, 1e-4),
    delta: float = 0.05,
    eps: float = 0.05,
    seed: int = 0,
    c4: float | None = None,
    jobs: int = 1,
    tol: float = 1e-10,
) -> SweepResult:
    """Check the inequality on ``n`` constructed traces at each scale (zero ``I`` context).

    When ``c4`` is not given it is measured on the family at the largest
    scale.  Output order does not depend on ``jobs``.
    """
    traces = random_trace_family(d, n, delta, seed)
    if c4 is None:
        c4 = c4_measure(traces, max(scales))
        c4 = c4 if math.isfinite(c4) and c4 > 0 else 1.0
    ratios = [higher_mode_ratio(c) for c in traces]
    c3 = max((r for r in ratios if r is not None), default=math.nan)
    tasks = [(c, s, eps, delta, c4, tol) for s in scales for c in traces]
    ids = [i for _ in scales for i in range(len(traces))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_check_task, tasks, chunksize=8))
    else:
        reports = [_check_task(t) for t in tasks]
    config = {"d": d, "n": n, "scales": list(scales), "delta": delta, "eps": eps, "seed": seed, "c4": c4, "tol": tol}
    return SweepResult(d, list(zip(ids, reports)), float(c4), float(c3), config)
