"""Rescalings, blow-up candidates, classification of free-boundary points and strata."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field as dc_field
from os import PathLike
from typing import Sequence

import numpy as np

from .energy import scaling_factors, theta_constant, unit_ball_rules, weiss_energy
from .errors import DomainError, PreconditionError
from .geometry import Evaluable, ScalarField, ball_rule, evaluate_gradient, sphere_rule
from .spherical import (
    DEFAULT_CUTOFF,
    HalfSpaceSolution,
    QuadraticForm,
    SphereTrace,
    analysis_rule,
    analyze,
    dist_to_K,
    mode_list,
    solid_harmonics,
)

REGULAR = "Regular"
SINGULAR = "Singular"
UNDECIDED = "Undecided"


@dataclass(frozen=True, eq=False)
class Rescaled:
    """``x -> u(x0 + r x) / mu(r)`` on the unit ball."""

    u: Evaluable
    x0: np.ndarray
    r: float
    mu: float

    @property
    def d(self) -> int:
        return len(self.x0)

    @property
    def kink_axis(self):
        return getattr(self.u, "kink_axis", None)

    def __call__(self, x):
        return np.asarray(self.u(self.x0 + self.r * np.atleast_2d(x)), dtype=float) / self.mu

    def grad(self, x):
        return evaluate_gradient(self.u, self.x0 + self.r * np.atleast_2d(x)) * (self.r / self.mu)


def rescale(u: Evaluable, x0: Sequence[float], r: float) -> Rescaled:
    """Blow-up rescaling ``u_r(x) = u(x0 + r x)/mu(r)``.

    Raises
    ------
    DomainError
        If ``r`` is not in ``(0, 1)`` or the ball leaves the field domain.
    """
    x0 = np.asarray(x0, dtype=float)
    s = scaling_factors(r)
    if isinstance(u, ScalarField) and not u.contains_ball(x0, r):
        raise DomainError(f"ball of radius {r} around {x0.tolist()} is not inside the field domain")
    return Rescaled(u, x0, float(r), s.mu)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass
class Classification:
    label: str
    radius: float | None
    energy: float | None
    density: float | None
    band: float
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "radius": self.radius,
            "energy": self.energy,
            "contact_density": self.density,
            "band": self.band,
            "reason": self.reason,
        }


def reliable_radii(u, radii: Sequence[float], min_cells: float = 8.0) -> np.ndarray:
    """Radii that span at least ``min_cells`` grid cells (all radii for analytic fields)."""
    radii = np.asarray(radii, dtype=float)
    if isinstance(u, ScalarField):
        return radii[radii >= min_cells * u.h * (1 - 1e-12)]
    return radii


def _default_threshold(u, x0, r) -> float:
    if isinstance(u, ScalarField):
        return 1e-8 * float(np.max(u.values))
    rule = ball_rule(len(x0), 8, 16)
    vals = np.asarray(u(np.asarray(x0) + r * rule.nodes))
    return 1e-8 * float(np.max(vals)) if vals.size else 0.0


def _check_free_boundary_point(u, x0, r, threshold) -> None:
    d = len(x0)
    rho = 2 * u.h if isinstance(u, ScalarField) else r / 4
    pts = np.vstack([np.asarray(x0)[None, :], np.asarray(x0) + rho * ball_rule(d, 4, 16).nodes])
    vals = np.asarray(u(pts))
    if np.min(vals) > threshold:
        raise PreconditionError(
            f"{np.asarray(x0).tolist()} is not a free-boundary point: u > {threshold:.3g} on a ball of radius {rho:.3g}"
        )


def classify_point(
    u: Evaluable,
    x0: Sequence[float],
    radii: Sequence[float],
    band_fraction: float = 0.15,
    threshold: float | None = None,
    density_split: float = 0.2,
    rules=None,
) -> Classification:
    """Classify a free-boundary point by its Weiss energy density.

    The energy is evaluated at the smallest reliable radius.  It is compared
    with ``Θ/2`` (half-space blow-ups) and ``Θ`` (quadratic blow-ups) within
    ``band_fraction * Θ``; the contact density must agree (at least
    ``density_split`` for regular points, at most that for singular points),
    otherwise the point is Undecided.

    Raises
    ------
    PreconditionError
        If ``u`` stays above the threshold near ``x0``.
    """
    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    theta = theta_constant(d)
    band = band_fraction * theta
    usable = reliable_radii(u, radii)
    if len(usable) == 0:
        return Classification(UNDECIDED, None, None, None, band, "no reliable radius")
    r = float(np.min(usable))
    threshold = _default_threshold(u, x0, r) if threshold is None else threshold
    if threshold <= 0:
        return Classification(UNDECIDED, r, 0.0, None, band, "degenerate")
    _check_free_boundary_point(u, x0, r, threshold)
    W = weiss_energy(u, x0, r, rules)
    from .solver import contact_density

    density = contact_density(u, x0, r, threshold)
    if abs(W - theta / 2) <= band:
        label = REGULAR if density >= density_split else UNDECIDED
        reason = "energy near half-space density" + ("" if label == REGULAR else "; contact density too small")
    elif abs(W - theta) <= band:
        label = SINGULAR if density <= density_split else UNDECIDED
        reason = "energy near quadratic density" + ("" if label == SINGULAR else "; contact density too large")
    else:
        label, reason = UNDECIDED, "energy outside both bands"
    return Classification(label, r, W, density, band, reason)


def stratum(A: QuadraticForm | np.ndarray, tol: float = 1e-8) -> int:
    """Dimension of the kernel of a blow-up matrix (eigenvalues within ``tol`` of 0).

    Raises
    ------
    DomainError
        If ``|tr A - 1| > tol`` or ``A`` has an eigenvalue below ``-tol``.
    """
    A = A.A if isinstance(A, QuadraticForm) else np.asarray(A, dtype=float)
    if abs(np.trace(A) - 1) > tol:
        raise DomainError(f"trace {np.trace(A)!r} differs from 1 by more than {tol}")
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    if w.min() < -tol:
        raise DomainError("blow-up matrix is not positive semidefinite")
    return int(np.sum(np.abs(w) <= tol))


# ---------------------------------------------------------------------------
# Blow-up records
# ---------------------------------------------------------------------------


@dataclass
class BlowupRecord:
    """Traces of the rescalings, the limit candidate and the convergence distances."""

    center: tuple[float, ...]
    radii: list[float]
    reliable: list[bool]
    traces: list[SphereTrace]
    candidate_kind: str | None
    candidate_A: np.ndarray | None
    candidate_nu: np.ndarray | None
    distances: list[float]
    classification: Classification
    stratum: int | None = None
    diagnostics: list[str] = dc_field(default_factory=list)

    def candidate(self):
        if self.candidate_kind == "quadratic":
            return QuadraticForm(self.candidate_A)
        if self.candidate_kind == "halfspace":
            return HalfSpaceSolution(self.candidate_nu)
        return None

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "radii": list(self.radii),
            "reliable": list(self.reliable),
            "candidate": {
                "kind": self.candidate_kind,
                "A": None if self.candidate_A is None else np.asarray(self.candidate_A).tolist(),
                "nu": None if self.candidate_nu is None else np.asarray(self.candidate_nu).tolist(),
            },
            "l1_distances": list(self.distances),
            "classification": self.classification.to_dict(),
            "stratum": self.stratum,
            "diagnostics": list(self.diagnostics),
            "traces": [t.to_dict() for t in self.traces],
        }

    def traces_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "reliable", "degree", "index", "value"])
        for r, ok, t in zip(self.radii, self.reliable, self.traces):
            for (k, m), v in zip(mode_list(t.d, t.L), t.coeffs):
                w.writerow([format(r, ".17g"), int(ok), k, m, format(float(v), ".17g")])
        return buf.getvalue()


def _halfspace_fit(samples: np.ndarray, trace: SphereTrace, rule) -> tuple[np.ndarray, float]:
    """Best multiple of a half-space profile; direction from the degree-1 modes."""
    d = trace.d
    one = trace.degrees == 1
    grads = solid_harmonics(d, trace.L, np.zeros((1, d)))[1][0]
    beta = grads[one].T @ trace.coeffs[one]
    n = np.linalg.norm(beta)
    if n == 0:
        return np.zeros(d), float(np.sqrt(np.dot(rule.weights, samples**2)))
    e = beta / n
    h = HalfSpaceSolution(e)(rule.nodes)
    amp = max(float(np.dot(rule.weights, samples * h) / np.dot(rule.weights, h * h)), 0.0)
    resid = samples - amp * h
    return math.sqrt(amp) * e, float(math.sqrt(np.dot(rule.weights, resid * resid)))


def estimate_blowup(
    u: Evaluable,
    x0: Sequence[float],
    radii: Sequence[float],
    L: int | None = None,
    band_fraction: float = 0.15,
    threshold: float | None = None,
) -> BlowupRecord:
    """Analyze the rescalings ``u_r`` and pick a limit candidate.

    Traces are computed at every radius (radii below eight grid cells are
    marked unreliable).  The candidate is the nearer of the projection onto
    quadratic solutions and the best half-space fit of the smallest reliable
    trace; L^1 distances of all traces to it are recorded.
    """
    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    L = DEFAULT_CUTOFF[d] if L is None else L
    radii = sorted((float(r) for r in radii), reverse=True)
    ok_set = set(reliable_radii(u, radii).tolist())
    rule = analysis_rule(d, L)
    fine = sphere_rule(d, 512 if d == 2 else 96)
    traces, samples, reliable = [], [], []
    for r in radii:
        ur = rescale(u, x0, r)
        vals = ur(fine.nodes)
        samples.append(vals)
        traces.append(analyze(ur(rule.nodes), L, rule))
        reliable.append(r in ok_set)
    diagnostics: list[str] = []
    band = band_fraction * theta_constant(d)
    ok_idx = [i for i, ok in enumerate(reliable) if ok]
    if not ok_idx:
        cls = Classification(UNDECIDED, None, None, None, band, "no reliable radius")
        return BlowupRecord(tuple(x0.tolist()), radii, reliable, traces, None, None, None, [], cls, None, ["no reliable radius"])
    last = ok_idx[-1]
    if max(np.max(np.abs(samples[i])) for i in ok_idx) <= 1e-300:
        cls = Classification(UNDECIDED, radii[last], 0.0, None, band, "degenerate")
        return BlowupRecord(tuple(x0.tolist()), radii, reliable, traces, None, None, None, [0.0] * len(radii), cls, None, ["degenerate"])
    dist_q, Q = dist_to_K(traces[last])
    nu, dist_h = _halfspace_fit(samples[last], analyze(samples[last], L, fine), fine)
    if dist_q <= dist_h:
        kind, A, cand = "quadratic", Q.A, Q
        nu_out = None
    else:
        kind, A, cand = "halfspace", None, HalfSpaceSolution(nu)
        nu_out = nu
    diagnostics.append(f"L2 distance to quadratic {dist_q:.6g}, to half-space {dist_h:.6g}")
    cvals = cand(fine.nodes)
    distances = [float(np.dot(fine.weights, np.abs(s - cvals))) for s in samples]
    try:
        cls = classify_point(u, x0, radii, band_fraction, threshold)
    except PreconditionError as exc:
        cls = Classification(UNDECIDED, radii[last], None, None, band, str(exc))
        diagnostics.append("precondition: " + str(exc))
    strat = None
    if cls.label == SINGULAR and kind == "quadratic":
        strat = stratum(A, 1e-6)
    elif cls.label == SINGULAR:
        diagnostics.append("energy suggests a singular point but the nearest candidate is a half-space profile")
    return BlowupRecord(tuple(x0.tolist()), radii, reliable, traces, kind, A, nu_out, distances, cls, strat, diagnostics)


def write_blowup_json(record: BlowupRecord, path: str | PathLike, extra: dict | None = None) -> None:
    data = dict(extra or {})
    data["record"] = record.to_dict()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")
