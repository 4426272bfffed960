"""Decay-rate fits for the corrected excess and the blow-up convergence.

Two models are fitted:

* ``log_power``: ``e(r) = (-C gamma log(r/r0))^(-1/gamma)``, which is affine
  after the change of variables ``e^-gamma`` against ``-log r``;
* ``holder``: ``e(r) = C r^beta``, affine in log-log coordinates.

All fits report the RMS residual of ``log e`` and are flagged as poor above
``POOR_RESIDUAL``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field as dc_field
from os import PathLike
from typing import Sequence

import numpy as np

from .blowup import SINGULAR, BlowupRecord, classify_point
from .energy import EnergyTable, corrected_excess_table
from .errors import DomainError, InsufficientDataError
from .geometry import Evaluable, ball_rule, sphere_rule
from .spherical import QuadraticForm

LOG_POWER = "log_power"
HOLDER = "holder"
POOR_RESIDUAL = 0.1


def default_gamma(d: int) -> float:
    return 0.0 if d == 2 else (d - 1) / (d + 3)


@dataclass
class DecayFit:
    model: str
    params: dict
    residual: float
    n: int
    dropped: int = 0
    notes: list[str] = dc_field(default_factory=list)

    @property
    def poor(self) -> bool:
        return not math.isfinite(self.residual) or self.residual > POOR_RESIDUAL

    def predict(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        p = self.params
        if self.model == HOLDER:
            return p["C"] * r ** p["beta"]
        if "exponent" in p:
            return p["C"] * (-np.log(r)) ** p["exponent"]
        base = -p["C"] * p["gamma"] * np.log(r / p["r0"])
        return np.where(base > 0, np.abs(base) ** (-1 / p["gamma"]), np.nan)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": dict(self.params),
            "residual": self.residual,
            "n": self.n,
            "dropped": self.dropped,
            "poor": self.poor,
            "notes": list(self.notes),
        }


def _positive_samples(r, e, minimum: int) -> tuple[np.ndarray, np.ndarray, int]:
    r = np.asarray(r, dtype=float)
    e = np.asarray(e, dtype=float)
    if r.shape != e.shape or r.ndim != 1:
        raise DomainError("radii and values must be 1-d arrays of equal length")
    if np.any((r <= 0) | (r >= 1)):
        raise DomainError("radii must lie in (0, 1)")
    keep = np.isfinite(e) & (e > 0)
    if keep.sum() < minimum:
        raise InsufficientDataError(f"insufficient data: {int(keep.sum())} usable samples, need {minimum}")
    return r[keep], e[keep], int((~keep).sum())


def _rms_log(e: np.ndarray, model: np.ndarray) -> float:
    if np.any(~np.isfinite(model)) or np.any(model <= 0):
        return math.inf
    return float(np.sqrt(np.mean((np.log(e) - np.log(model)) ** 2)))


def fit_log_decay(r, e, gamma: float, fit_r0: bool = True, r0: float = 1.0) -> DecayFit:
    """Fit ``e(r) = (-C gamma log(r/r0))^(-1/gamma)``.

    ``e^-gamma = C gamma (-log r) + C gamma log r0`` is fitted by least squares;
    with ``fit_r0=False`` only ``C`` is fitted and ``r0`` is held fixed.
    Non-positive values are dropped and counted.

    Examples
    --------
    >>> r = np.array([0.05, 0.01, 1e-3, 1e-4])
    >>> e = (-(2 / 3) * np.log(r / 0.5)) ** -3
    >>> f = fit_log_decay(r, e, 1 / 3)
    >>> round(f.params["C"], 9), round(f.params["r0"], 9)
    (2.0, 0.5)
    """
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    r, e, dropped = _positive_samples(r, e, 2 if fit_r0 else 1)
    x = -np.log(r)
    y = e ** (-gamma)
    notes: list[str] = []
    if fit_r0:
        slope, intercept = np.polyfit(x, y, 1)
        if slope <= 1e-9 * float(np.max(np.abs(y))):
            fit = DecayFit(LOG_POWER, {"C": float(slope / gamma), "r0": math.nan, "gamma": gamma}, math.inf, len(r), dropped)
            fit.notes.append("non-positive slope: data do not decay like the model")
            return fit
        C = slope / gamma
        r0_fit = math.exp(min(intercept / slope, 700.0))
        if not 0 < r0_fit <= 1:
            notes.append(f"fitted r0 = {r0_fit:.6g} outside (0, 1]")
    else:
        if not 0 < r0 <= 1:
            raise DomainError("r0 must lie in (0, 1]")
        basis = x + math.log(r0)
        C = float(np.dot(basis, y) / np.dot(basis, basis)) / gamma
        r0_fit = r0
    fit = DecayFit(LOG_POWER, {"C": float(C), "r0": float(r0_fit), "gamma": gamma}, 0.0, len(r), dropped, notes)
    fit.residual = _rms_log(e, fit.predict(r))
    return fit


def fit_holder(r, e) -> DecayFit:
    """Fit ``e(r) = C r^beta`` in log-log coordinates.

    Examples
    --------
    >>> r = np.geomspace(1e-4, 0.5, 12)
    >>> f = fit_holder(r, 3 * r**0.4)
    >>> round(f.params["beta"], 9), round(f.params["C"], 9)
    (0.4, 3.0)
    """
    r, e, dropped = _positive_samples(r, e, 2)
    beta, logC = np.polyfit(np.log(r), np.log(e), 1)
    fit = DecayFit(HOLDER, {"C": float(math.exp(logC)), "beta": float(beta)}, 0.0, len(r), dropped)
    fit.residual = _rms_log(e, fit.predict(r))
    if not 0 < beta < 1:
        fit.notes.append(f"exponent {beta:.6g} outside (0, 1)")
    return fit


# ---------------------------------------------------------------------------
# Series from fields and blow-up records
# ---------------------------------------------------------------------------


@dataclass
class ExcessSeries:
    radii: np.ndarray
    excess: np.ndarray
    label: str
    flagged: bool
    table: EnergyTable | None
    notes: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "radii": self.radii.tolist(),
            "excess": self.excess.tolist(),
            "label": self.label,
            "flagged": self.flagged,
            "notes": list(self.notes),
        }


def excess_series(
    u: Evaluable,
    x0: Sequence[float],
    radii: Sequence[float],
    limit: float | None = None,
    override: bool = False,
    classify_radii: Sequence[float] | None = None,
) -> ExcessSeries:
    """``e(r) = W_I(r) - W_I(0+)`` from :func:`corrected_excess_table`.

    The point is classified first; unless it is Singular (or ``override`` is
    set) the series is still produced but flagged.  A field vanishing near
    ``x0`` yields the zero series.
    """
    radii = np.sort(np.asarray(radii, dtype=float))
    d = len(x0)
    rule = ball_rule(d, 8, 16)
    near = np.asarray(u(np.asarray(x0, dtype=float) + radii[-1] * rule.nodes))
    if not np.any(near):
        return ExcessSeries(radii, np.zeros_like(radii), "degenerate", True, None, ["field vanishes near the point"])
    cls = classify_point(u, x0, classify_radii if classify_radii is not None else radii)
    table = corrected_excess_table(u, x0, radii, limit)
    flagged = cls.label != SINGULAR and not override
    notes = [f"classified {cls.label}: {cls.reason}"] if flagged else []
    return ExcessSeries(table.radii, table.excess, cls.label, flagged, table, notes)


def blowup_modulus(
    record: BlowupRecord | None = None,
    gamma: float | None = None,
    radii: Sequence[float] | None = None,
    distances: Sequence[float] | None = None,
) -> DecayFit:
    """Fit the convergence of the rescalings to the blow-up candidate.

    For ``gamma > 0`` the model is ``C (-log r)^(-(1-gamma)/(2 gamma))`` with
    the exponent fixed; for ``gamma = 0`` a Hölder fit ``C r^beta`` is used.
    Distances come from ``record`` (reliable radii only) or are passed
    directly.

    Raises
    ------
    InsufficientDataError
        Fewer than five radii with positive distance.
    """
    if record is not None:
        mask = np.asarray(record.reliable, dtype=bool)
        radii = np.asarray(record.radii, dtype=float)[mask]
        distances = np.asarray(record.distances, dtype=float)[mask]
        gamma = default_gamma(len(record.center)) if gamma is None else gamma
    if radii is None or distances is None or gamma is None:
        raise DomainError("pass a blow-up record or radii, distances and gamma")
    r, dist, dropped = _positive_samples(radii, distances, 5)
    if gamma == 0:
        fit = fit_holder(r, dist)
        fit.dropped += dropped
        return fit
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must lie in [0, 1), got {gamma}")
    p = -(1 - gamma) / (2 * gamma)
    logC = float(np.mean(np.log(dist) - p * np.log(-np.log(r))))
    fit = DecayFit(LOG_POWER, {"C": math.exp(logC), "exponent": p, "gamma": gamma}, 0.0, len(r), dropped)
    fit.residual = _rms_log(dist, fit.predict(r))
    return fit


# ---------------------------------------------------------------------------
# Modulus of continuity of the blow-up map across singular points
# ---------------------------------------------------------------------------


@dataclass
class ModulusRecord:
    points: list[tuple[float, ...]]
    forms: list[np.ndarray]
    pairs: list[tuple[int, int]]
    separations: list[float]
    distances: list[float]
    gamma: float
    beta: float | None
    constant: float
    notes: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "points": [list(p) for p in self.points],
            "forms": [np.asarray(A).tolist() for A in self.forms],
            "pairs": [list(p) for p in self.pairs],
            "separations": list(self.separations),
            "distances": list(self.distances),
            "gamma": self.gamma,
            "beta": self.beta,
            "constant": self.constant,
            "notes": list(self.notes),
        }


def form_distance(A1, A2, d: int | None = None) -> float:
    """``‖Q_{A1} - Q_{A2}‖`` in ``L²`` of the unit sphere, by quadrature."""
    Q = QuadraticForm(np.asarray(A1, dtype=float) - np.asarray(A2, dtype=float))
    rule = sphere_rule(Q.d, 32 if Q.d == 2 else 16)
    vals = Q(rule.nodes)
    return math.sqrt(float(np.dot(rule.weights, vals * vals)))


def singular_modulus(points: Sequence[Sequence[float]], forms: Sequence, gamma: float, beta: float = 0.5) -> ModulusRecord:
    """Pairwise distances of blow-up forms and the empirical modulus constant.

    The constant is the largest ratio of the distance to
    ``(-log |x1 - x2|)^(-(1-gamma)/(2 gamma))`` (``gamma > 0``) or to
    ``|x1 - x2|^beta`` (``gamma = 0``).  Coincident points are skipped, as are
    pairs at separation ``>= 1`` for the logarithmic model.
    """
    if len(points) != len(forms):
        raise DomainError("one form per point is required")
    if len(points) < 2:
        raise InsufficientDataError("insufficient data: need at least two singular points")
    pts = [tuple(float(x) for x in p) for p in points]
    As = [np.asarray(f.A if isinstance(f, QuadraticForm) else f, dtype=float) for f in forms]
    pairs, seps, dists, ratios, notes = [], [], [], [], []
    for i, j in itertools.combinations(range(len(pts)), 2):
        sep = float(np.linalg.norm(np.subtract(pts[i], pts[j])))
        if sep == 0:
            notes.append(f"pair {i},{j}: coincident points skipped")
            continue
        dist = form_distance(As[i], As[j])
        pairs.append((i, j))
        seps.append(sep)
        dists.append(dist)
        if gamma > 0:
            if sep >= 1:
                notes.append(f"pair {i},{j}: separation {sep:.3g} >= 1 excluded from the constant")
                continue
            ratios.append(dist / (-math.log(sep)) ** (-(1 - gamma) / (2 * gamma)))
        else:
            ratios.append(dist / sep**beta)
    if not pairs:
        raise InsufficientDataError("insufficient data: no distinct pairs")
    constant = max(ratios) if ratios else math.nan
    return ModulusRecord(pts, As, pairs, seps, dists, float(gamma), None if gamma > 0 else float(beta), constant, notes)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


FIT_COLUMNS = ("label", "model", "n", "dropped", "residual", "poor", "C", "r0", "gamma", "beta", "exponent")


def fit_summary_csv(fits: Sequence[tuple[str, DecayFit]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIT_COLUMNS)
    for label, f in fits:
        p = f.params
        vals = [p.get(k, math.nan) for k in ("C", "r0", "gamma", "beta", "exponent")]
        w.writerow([label, f.model, f.n, f.dropped, format(f.residual, ".17g"), str(f.poor).lower()] + [format(float(v), ".17g") for v in vals])
    return buf.getvalue()


def write_json(obj, path: str | PathLike, extra: dict | None = None) -> None:
    data = obj.to_dict() if hasattr(obj, "to_dict") else obj
    if extra:
        data = dict(extra, result=data)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")
