"""Eigenfunctions of the Laplace-Beltrami operator on the unit sphere, traces,
the three-way mode split and homogeneous extensions.

Eigenfunctions are evaluated as homogeneous harmonic polynomials (solid
harmonics), so values and Euclidean gradients are exact anywhere in R^d and
restrict to an L^2-orthonormal basis on the unit sphere.  Modes are indexed by
``(degree k, index m)``:

* ``d=2``: ``(0, 0)`` is the constant, ``(k, k)`` is ``cos(k t)`` and ``(k, -k)``
  is ``sin(k t)``, normalized.
* ``d=3``: ``(l, m)`` with ``-l <= m <= l`` are real spherical harmonics;
  ``m > 0`` are cosine-type and ``m < 0`` sine-type.

A :class:`SphereTrace` may carry *half-space tails*.  A tail ``(w, e)`` stands
for ``w * (h_e - P_L h_e)`` where ``h_e(x) = ((x.e)_+)^2 / 2`` and ``P_L`` is
the projection onto degrees ``<= L``.  Tails let traces of half-space solutions
be represented exactly even though they are not band-limited.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from os import PathLike
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError, DomainError
from .geometry import QuadratureRule, sphere_area, sphere_rule

DEFAULT_CUTOFF = {2: 16, 3: 10}


def eigenvalue(k: int, d: int) -> int:
    """Laplace-Beltrami eigenvalue ``k(k+d-2)`` of degree-``k`` modes."""
    return k * (k + d - 2)


@lru_cache(maxsize=None)
def mode_list(d: int, L: int) -> tuple[tuple[int, int], ...]:
    """All ``(degree, index)`` pairs up to degree ``L`` in storage order."""
    if d == 2:
        modes = [(0, 0)]
        for k in range(1, L + 1):
            modes += [(k, k), (k, -k)]
        return tuple(modes)
    if d == 3:
        return tuple((l, m) for l in range(L + 1) for m in range(-l, l + 1))
    raise DomainError(f"unsupported dimension {d}")


@lru_cache(maxsize=None)
def _degrees(d: int, L: int) -> np.ndarray:
    arr = np.array([k for k, _ in mode_list(d, L)])
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def _eigenvalues(d: int, L: int) -> np.ndarray:
    arr = np.array([eigenvalue(k, d) for k, _ in mode_list(d, L)], dtype=float)
    arr.setflags(write=False)
    return arr


def _raw_solid_2d(L: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = x[:, 0] + 1j * x[:, 1]
    n = len(z)
    vals = np.empty((n, 2 * L + 1))
    grads = np.empty((n, 2 * L + 1, 2))
    vals[:, 0] = 1.0
    grads[:, 0] = 0.0
    zk1 = np.ones(n, dtype=complex)  # z^(k-1)
    for k in range(1, L + 1):
        zk = zk1 * z
        w = k * zk1
        vals[:, 2 * k - 1] = zk.real
        vals[:, 2 * k] = zk.imag
        grads[:, 2 * k - 1, 0] = w.real
        grads[:, 2 * k - 1, 1] = -w.imag
        grads[:, 2 * k, 0] = w.imag
        grads[:, 2 * k, 1] = w.real
        zk1 = zk
    return vals, grads


def _raw_solid_3d(L: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real regular solid harmonics by the standard recurrences, forward-mode gradients."""
    n = len(x)
    X, Y, Z = x[:, 0], x[:, 1], x[:, 2]
    r2 = X * X + Y * Y + Z * Z
    dX = np.tile([1.0, 0.0, 0.0], (n, 1))
    dY = np.tile([0.0, 1.0, 0.0], (n, 1))
    dZ = np.tile([0.0, 0.0, 1.0], (n, 1))
    dr2 = 2 * x
    C: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    S: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    zero = (np.zeros(n), np.zeros((n, 3)))
    C[0, 0] = (np.ones(n), np.zeros((n, 3)))
    S[0, 0] = zero
    for l in range(L):
        # diagonal step
        f = -math.sqrt((2.0 if l == 0 else 1.0) * (2 * l + 1) / (2 * l + 2))
        (c, dc), (s, ds) = C[l, l], S[l, l]
        C[l + 1, l + 1] = (
            f * (X * c - Y * s),
            f * (dX * c[:, None] + X[:, None] * dc - dY * s[:, None] - Y[:, None] * ds),
        )
        S[l + 1, l + 1] = (
            f * (Y * c + X * s),
            f * (dY * c[:, None] + Y[:, None] * dc + dX * s[:, None] + X[:, None] * ds),
        )
        # vertical step for m <= l
        for m in range(0, l + 1):
            a = (2 * l + 1) / math.sqrt((l + m + 1) * (l - m + 1))
            b = math.sqrt((l + m) * (l - m)) / math.sqrt((l + m + 1) * (l - m + 1))
            for T in (C, S):
                v, dv = T[l, m]
                vm, dvm = T.get((l - 1, m), zero)
                T[l + 1, m] = (
                    a * Z * v - b * r2 * vm,
                    a * (dZ * v[:, None] + Z[:, None] * dv) - b * (dr2 * vm[:, None] + r2[:, None] * dvm),
                )
    M = (L + 1) ** 2
    vals = np.empty((n, M))
    grads = np.empty((n, M, 3))
    j = 0
    for l in range(L + 1):
        for m in range(-l, l + 1):
            v, dv = S[l, -m] if m < 0 else C[l, m]
            vals[:, j] = v
            grads[:, j] = dv
            j += 1
    return vals, grads


def _raw_solid(d: int, L: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return _raw_solid_2d(L, x) if d == 2 else _raw_solid_3d(L, x)


@lru_cache(maxsize=None)
def _normalization(d: int, L: int) -> np.ndarray:
    rule = sphere_rule(d, 4 * L + 8)
    vals, _ = _raw_solid(d, L, rule.nodes)
    norms = np.sqrt(np.einsum("n,nj,nj->j", rule.weights, vals, vals))
    out = 1.0 / norms
    out.setflags(write=False)
    return out


def solid_harmonics(d: int, L: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal eigenfunctions extended as homogeneous harmonic polynomials.

    Parameters
    ----------
    d : int
        Dimension, 2 or 3.
    L : int
        Cutoff degree.
    x : ndarray, shape (n, d)
        Evaluation points (any radius).

    Returns
    -------
    values : ndarray, shape (n, M)
    gradients : ndarray, shape (n, M, d)
        Euclidean gradients of the polynomials.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    vals, grads = _raw_solid(d, L, x)
    scale = _normalization(d, L)
    return vals * scale, grads * scale[None, :, None]


def eigenfunctions(d: int, L: int, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenfunction values and tangential gradients at unit vectors ``theta``."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    vals, grads = solid_harmonics(d, L, theta)
    k = _degrees(d, L)
    tang = grads - (k[None, :] * vals)[:, :, None] * theta[:, None, :]
    return vals, tang


# ---------------------------------------------------------------------------
# Half-space profile h_e(x) = ((x.e)_+)^2 / 2 and its projections
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def halfspace_multipliers(d: int, L: int) -> np.ndarray:
    """Funk-Hecke multipliers of ``t -> (t_+)^2/2`` for degrees ``0..L``.

    The coefficient of ``h_e`` on an eigenfunction ``Y`` of degree ``k`` is
    ``multiplier[k] * Y(e)``.
    """
    out = np.empty(L + 1)
    if d == 2:
        x, w = leggauss(2 * L + 40)
        t = x * math.pi / 2
        w = w * math.pi / 2
        for k in range(L + 1):
            out[k] = np.dot(w, 0.5 * np.cos(t) ** 2 * np.cos(k * t))
    else:
        x, w = leggauss(L + 8)
        t = (x + 1) / 2
        w = w / 2
        for k in range(L + 1):
            pk = np.polynomial.legendre.legval(t, [0] * k + [1])
            out[k] = 2 * math.pi * np.dot(w, 0.5 * t**2 * pk)
    out.setflags(write=False)
    return out


def degree_one_constant(d: int) -> float:
    """Constant ``kappa`` with ``P_1 h_e = kappa (x.e)``: ``2/(3 pi)`` or ``3/16``."""
    return 2.0 / (3.0 * math.pi) if d == 2 else 3.0 / 16.0


def _halfspace_norm2(d: int) -> float:
    return 3 * math.pi / 32 if d == 2 else math.pi / 10


def _halfspace_grad_norm2(d: int) -> float:
    return math.pi / 8 if d == 2 else 4 * math.pi / 15


def _tail_norms(d: int, L: int) -> tuple[float, float]:
    """Squared L^2 norm and tangential-gradient norm of ``h_e - P_L h_e``."""
    lam = halfspace_multipliers(d, L)
    k = np.arange(L + 1)
    # addition theorem: sum_m Y_km(e)^2 = dim_k / area
    dim = np.where(k == 0, 1, 2) if d == 2 else 2 * k + 1
    proj = lam**2 * dim / sphere_area(d)
    ev = np.array([eigenvalue(int(j), d) for j in k], dtype=float)
    return (
        max(_halfspace_norm2(d) - float(np.sum(proj)), 0.0),
        max(_halfspace_grad_norm2(d) - float(np.sum(ev * proj)), 0.0),
    )


def halfspace_coefficients(e: Sequence[float], L: int) -> np.ndarray:
    """Coefficients of ``P_L h_e`` for a unit vector ``e``."""
    e = np.asarray(e, dtype=float)
    d = len(e)
    e = e / np.linalg.norm(e)
    vals, _ = solid_harmonics(d, L, e[None, :])
    return halfspace_multipliers(d, L)[_degrees(d, L)] * vals[0]


# ---------------------------------------------------------------------------
# Evaluables: quadratic forms, half-space solutions, extensions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``Q_A(x) = x.Ax / 2`` for a symmetric matrix ``A``."""

    A: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] not in (2, 3):
            raise DomainError("A must be a 2x2 or 3x3 matrix")
        if np.max(np.abs(A - A.T)) > 1e-12 * max(1.0, np.max(np.abs(A))):
            raise DomainError("A must be symmetric")
        A = 0.5 * (A + A.T)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.A)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.A, x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.A

    def tensor_eval(self, radii, theta):
        v = self(theta)
        return homogeneous_tensor(radii, 2.0, v, self.grad(theta) - 2 * v[:, None] * theta, theta)

    def trace(self, L: int | None = None) -> "SphereTrace":
        """Restriction to the unit sphere as a :class:`SphereTrace`."""
        L = DEFAULT_CUTOFF[self.d] if L is None else L
        return SphereTrace(self.d, L, quadratic_coefficients(self.A, L))


@dataclass(frozen=True, eq=False)
class HalfSpaceSolution:
    """``q_nu(x) = ((x.nu)_+)^2 / 2``; ``|nu|^2`` scales the profile."""

    nu: np.ndarray

    def __post_init__(self):
        nu = np.array(self.nu, dtype=float)
        nu.setflags(write=False)
        object.__setattr__(self, "nu", nu)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        t = np.maximum(np.asarray(x, dtype=float) @ self.nu, 0.0)
        return 0.5 * t * t

    def grad(self, x: np.ndarray) -> np.ndarray:
        t = np.maximum(np.asarray(x, dtype=float) @ self.nu, 0.0)
        return t[..., None] * self.nu

    def tensor_eval(self, radii, theta):
        v = self(theta)
        return homogeneous_tensor(radii, 2.0, v, self.grad(theta) - 2 * v[:, None] * theta, theta)

    def trace(self, L: int | None = None) -> "SphereTrace":
        return trace_of_halfspace(self.nu, L)


@lru_cache(maxsize=None)
def _quadratic_map(d: int, L: int) -> tuple[np.ndarray, tuple[tuple[int, int], ...]]:
    """Matrix sending the upper-triangular entries of A to all mode coefficients."""
    pairs = tuple((a, b) for a in range(d) for b in range(a, d))
    rule = sphere_rule(d, 2 * L + 8)
    vals, _ = solid_harmonics(d, L, rule.nodes)
    cols = []
    for a, b in pairs:
        E = np.zeros((d, d))
        E[a, b] = E[b, a] = 1.0
        q = 0.5 * np.einsum("ni,ij,nj->n", rule.nodes, E, rule.nodes)
        cols.append((rule.weights * q) @ vals)
    mat = np.column_stack(cols)
    mat[np.abs(mat) < 1e-15] = 0.0
    mat.setflags(write=False)
    return mat, pairs


def quadratic_coefficients(A: np.ndarray, L: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    mat, pairs = _quadratic_map(A.shape[0], L)
    return mat @ np.array([A[a, b] for a, b in pairs])


def _matrix_from_low_modes(coeffs: np.ndarray, d: int, L: int) -> np.ndarray:
    """Symmetric A whose trace matches the degree-0 and degree-2 coefficients."""
    mat, pairs = _quadratic_map(d, L)
    low = np.isin(_degrees(d, L), (0, 2))
    sol = np.linalg.solve(mat[low], coeffs[low])
    A = np.zeros((d, d))
    for (a, b), v in zip(pairs, sol):
        A[a, b] = A[b, a] = v
    return A


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SphereTrace:
    """A function on the unit sphere in the eigenbasis up to degree ``L``.

    Parameters
    ----------
    d, L : int
        Dimension and cutoff degree.
    coeffs : ndarray
        Coefficients in :func:`mode_list` order.
    tails : tuple of (weight, direction)
        Half-space tails; see the module docstring.
    nonneg : bool
        Declared non-negativity (not verified).
    """

    d: int
    L: int
    coeffs: np.ndarray
    tails: tuple[tuple[float, tuple[float, ...]], ...] = ()
    nonneg: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (len(mode_list(self.d, self.L)),):
            raise DomainError("coefficient vector does not match the cutoff")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "tails", _merge_tails(self.tails))

    @classmethod
    def zero(cls, d: int, L: int | None = None) -> "SphereTrace":
        L = DEFAULT_CUTOFF[d] if L is None else L
        return cls(d, L, np.zeros(len(mode_list(d, L))))

    @classmethod
    def from_modes(cls, d: int, L: int, modes: dict[tuple[int, int], float]) -> "SphereTrace":
        index = {m: j for j, m in enumerate(mode_list(d, L))}
        c = np.zeros(len(index))
        for key, v in modes.items():
            if key not in index:
                raise DomainError(f"mode {key} not available at cutoff {L}")
            c[index[key]] = v
        return cls(d, L, c)

    @property
    def degrees(self) -> np.ndarray:
        return _degrees(self.d, self.L)

    @property
    def eigenvalues(self) -> np.ndarray:
        return _eigenvalues(self.d, self.L)

    def coefficient(self, k: int, m: int) -> float:
        return float(self.coeffs[mode_list(self.d, self.L).index((k, m))])

    def is_bandlimited(self) -> bool:
        return not self.tails

    # values ---------------------------------------------------------------
    def __call__(self, theta: np.ndarray) -> np.ndarray:
        """Values at unit vectors ``theta`` (shape ``(n, d)``)."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        vals, _ = solid_harmonics(self.d, self.L, theta)
        out = vals @ self.coeffs
        for w, e in self.tails:
            out = out + w * (HalfSpaceSolution(e)(theta) - vals @ halfspace_coefficients(e, self.L))
        return out

    def tangential_grad(self, theta: np.ndarray) -> np.ndarray:
        """Tangential gradient at unit vectors ``theta``, shape ``(n, d)``."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        _, tang = eigenfunctions(self.d, self.L, theta)
        out = np.einsum("njd,j->nd", tang, self.coeffs)
        for w, e in self.tails:
            e = np.asarray(e)
            t = theta @ e
            g = np.maximum(t, 0.0)[:, None] * (e[None, :] - t[:, None] * theta)
            out = out + w * (g - np.einsum("njd,j->nd", tang, halfspace_coefficients(e, self.L)))
        return out

    # algebra --------------------------------------------------------------
    def _check_compatible(self, other: "SphereTrace") -> None:
        if (self.d, self.L) != (other.d, other.L):
            raise DomainError("traces must share dimension and cutoff")

    def __add__(self, other: "SphereTrace") -> "SphereTrace":
        self._check_compatible(other)
        return SphereTrace(self.d, self.L, self.coeffs + other.coeffs, self.tails + other.tails)

    def __sub__(self, other: "SphereTrace") -> "SphereTrace":
        return self + other.scaled(-1.0)

    def scaled(self, t: float) -> "SphereTrace":
        return SphereTrace(self.d, self.L, t * self.coeffs, tuple((t * w, e) for w, e in self.tails), self.nonneg and t >= 0)

    def with_nonneg(self, flag: bool = True) -> "SphereTrace":
        return SphereTrace(self.d, self.L, self.coeffs, self.tails, flag)

    def restricted(self, mask: np.ndarray) -> "SphereTrace":
        """Band-limited part keeping only the coefficients selected by ``mask``."""
        return SphereTrace(self.d, self.L, np.where(mask, self.coeffs, 0.0))

    # norms ----------------------------------------------------------------
    def inner(self, other: "SphereTrace") -> float:
        """L^2(unit sphere) inner product."""
        return _inner(self, other, gradient=False)

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self), 0.0))

    def grad_norm(self) -> float:
        """L^2 norm of the tangential gradient."""
        return math.sqrt(max(_inner(self, self, gradient=True), 0.0))

    def integral(self) -> float:
        """Integral over the unit sphere (only the constant mode contributes)."""
        return float(self.coeffs[0] * math.sqrt(sphere_area(self.d)))

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        out = {
            "d": self.d,
            "L": self.L,
            "coeffs": [
                {"degree": k, "index": m, "value": float(v)}
                for (k, m), v in zip(mode_list(self.d, self.L), self.coeffs)
            ],
        }
        if self.tails:
            out["halfspace_tails"] = [{"weight": float(w), "direction": [float(x) for x in e]} for w, e in self.tails]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SphereTrace":
        try:
            d, L = int(data["d"]), int(data["L"])
            modes = {(int(c["degree"]), int(c["index"])): float(c["value"]) for c in data["coeffs"]}
            tails = tuple((float(t["weight"]), tuple(float(x) for x in t["direction"])) for t in data.get("halfspace_tails", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed trace JSON: {exc}") from exc
        base = cls.from_modes(d, L, modes)
        return cls(d, L, base.coeffs, tails)


def _merge_tails(tails) -> tuple[tuple[float, tuple[float, ...]], ...]:
    merged: dict[tuple[float, ...], float] = {}
    for w, e in tails:
        e = np.asarray(e, dtype=float)
        e = e / np.linalg.norm(e)
        key = tuple(float(x) for x in np.round(e, 14))
        for existing in merged:
            if np.max(np.abs(np.asarray(existing) - e)) < 1e-12:
                key = existing
                break
        merged[key] = merged.get(key, 0.0) + float(w)
    return tuple((w, e) for e, w in merged.items() if w != 0.0)


def _inner(a: SphereTrace, b: SphereTrace, gradient: bool) -> float:
    a._check_compatible(b)
    d, L = a.d, a.L
    weight = a.eigenvalues if gradient else 1.0
    total = float(np.sum(weight * a.coeffs * b.coeffs))
    # tails are orthogonal to every mode of degree <= L
    for wa, ea in a.tails:
        for wb, eb in b.tails:
            if np.allclose(ea, eb, atol=1e-12, rtol=0):
                total += wa * wb * _tail_norms(d, L)[1 if gradient else 0]
            else:
                total += wa * wb * _tail_cross(d, L, ea, eb, gradient)
    return total


@lru_cache(maxsize=256)
def _tail_cross(d: int, L: int, ea: tuple, eb: tuple, gradient: bool) -> float:
    rule = sphere_rule(d, 4096 if d == 2 else 512)
    ta = SphereTrace(d, L, np.zeros(len(mode_list(d, L))), ((1.0, ea),))
    tb = SphereTrace(d, L, np.zeros(len(mode_list(d, L))), ((1.0, eb),))
    if gradient:
        f = np.einsum("nd,nd->n", ta.tangential_grad(rule.nodes), tb.tangential_grad(rule.nodes))
    else:
        f = ta(rule.nodes) * tb(rule.nodes)
    return float(np.dot(rule.weights, f))


def trace_of_halfspace(nu: Sequence[float], L: int | None = None) -> SphereTrace:
    """Exact trace of ``q_nu = ((x.nu)_+)^2/2`` (``|nu|^2`` times ``h_e``)."""
    nu = np.asarray(nu, dtype=float)
    d = len(nu)
    L = DEFAULT_CUTOFF[d] if L is None else L
    amp = float(nu @ nu)
    if amp == 0.0:
        return SphereTrace.zero(d, L)
    e = nu / math.sqrt(amp)
    return SphereTrace(d, L, amp * halfspace_coefficients(e, L), ((amp, tuple(e)),), nonneg=True)


# ---------------------------------------------------------------------------
# Analysis and synthesis
# ---------------------------------------------------------------------------


def analysis_rule(d: int, L: int, axis: Sequence[float] | None = None) -> QuadratureRule:
    """A sphere rule exact to degree ``>= 2L`` with some margin."""
    return sphere_rule(d, 4 * L + 8 if d == 2 else 2 * L + 4, axis)


def analyze(samples, L: int | None = None, rule: QuadratureRule | None = None, d: int | None = None, nonneg: bool = False) -> SphereTrace:
    """Expansion coefficients ``c_j = ∫ c Y_j`` computed by quadrature.

    Parameters
    ----------
    samples : ndarray or callable
        Values at ``rule.nodes``, or an evaluable that is sampled there.
    L : int, optional
        Cutoff degree; defaults to 16 (d=2) or 10 (d=3).
    rule : QuadratureRule, optional
        Sphere rule; defaults to :func:`analysis_rule`.
    d : int, optional
        Dimension, required when ``rule`` is omitted.

    Raises
    ------
    ConfigurationError
        If the rule is not exact to degree ``2L``.
    """
    if rule is None:
        if d is None:
            raise ConfigurationError("either a rule or the dimension is required")
        L = DEFAULT_CUTOFF[d] if L is None else L
        rule = analysis_rule(d, L)
    d = rule.d
    L = DEFAULT_CUTOFF[d] if L is None else L
    if rule.domain != "sphere":
        raise ConfigurationError("analysis needs a sphere rule")
    if rule.degree < 2 * L:
        raise ConfigurationError(f"rule exact to degree {rule.degree} cannot resolve cutoff {L}")
    values = samples(rule.nodes) if callable(samples) else samples
    values = np.asarray(values, dtype=float)
    if values.shape != (len(rule.weights),):
        raise ConfigurationError("sample count does not match the rule")
    basis, _ = solid_harmonics(d, L, rule.nodes)
    return SphereTrace(d, L, (rule.weights * values) @ basis, nonneg=nonneg)


def synthesize(trace: SphereTrace, theta: np.ndarray) -> np.ndarray | float:
    """Value of the eigen-expansion at one direction or an array of them."""
    theta = np.asarray(theta, dtype=float)
    out = trace(theta.reshape(-1, trace.d))
    return float(out[0]) if theta.ndim == 1 else out


# ---------------------------------------------------------------------------
# Mode split and projection onto quadratic solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModeSplit:
    """Decomposition ``c = trace(q_nu) + trace(Q_A) + phi``."""

    nu: np.ndarray
    A: np.ndarray
    phi: SphereTrace

    @property
    def quadratic(self) -> QuadraticForm:
        return QuadraticForm(self.A)

    @property
    def halfspace(self) -> HalfSpaceSolution:
        return HalfSpaceSolution(self.nu)

    def reconstruct(self) -> SphereTrace:
        L = self.phi.L
        return trace_of_halfspace(self.nu, L) + QuadraticForm(self.A).trace(L) + self.phi


def split_modes(trace: SphereTrace) -> ModeSplit:
    """Split a trace into half-space, quadratic and higher-mode parts.

    The degree-1 content fixes ``nu`` (its direction is that of the degree-1
    coefficient vector, ``|nu|^2`` the matched amplitude).  After removing the
    half-space trace, the degree-0 and degree-2 content defines ``A``; the
    remainder ``phi`` lives on modes of degree ``>= 3``.
    """
    d, L = trace.d, trace.L
    deg = trace.degrees
    one = deg == 1
    grads = solid_harmonics(d, L, np.zeros((1, d)))[1][0]  # constant for degree 1
    beta = grads[one].T @ trace.coeffs[one]
    amp = float(np.linalg.norm(beta))
    if amp > 1e-14:
        nu = math.sqrt(amp / degree_one_constant(d)) * beta / amp
    else:
        nu = np.zeros(d)
    rest = trace - trace_of_halfspace(nu, L)
    A = _matrix_from_low_modes(rest.coeffs, d, L)
    rest = rest - QuadraticForm(A).trace(L)
    phi = SphereTrace(d, L, np.where(deg >= 3, rest.coeffs, 0.0), rest.tails)
    return ModeSplit(nu, A, phi)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum x = 1}``."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def project_to_K(A: np.ndarray) -> np.ndarray:
    """Nearest positive semidefinite trace-one matrix in Frobenius norm."""
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return (V * _project_simplex(w)) @ V.T


def dist_to_K(trace: SphereTrace) -> tuple[float, QuadraticForm]:
    """L^2(unit sphere) distance from ``trace`` to traces of ``Q_A``, ``A >= 0``, ``tr A = 1``.

    On the span of degree-0 and degree-2 modes the squared norm of a quadratic
    trace is ``c ((tr M)^2 + 2 |M|_F^2)``, and the trace of ``M = A_ls - A`` is
    fixed by the constraint, so the optimum is the Frobenius projection of the
    least-squares matrix onto the constraint set.

    Returns
    -------
    distance : float
    nearest : QuadraticForm
    """
    d, L = trace.d, trace.L
    A_ls = _matrix_from_low_modes(trace.coeffs, d, L)
    A = project_to_K(A_ls)
    dist = (trace - QuadraticForm(A).trace(L)).norm()
    return dist, QuadraticForm(A)


# ---------------------------------------------------------------------------
# Homogeneous extensions
# ---------------------------------------------------------------------------


def homogeneous_tensor(radii, alpha: float, vals, tang, theta) -> tuple[np.ndarray, np.ndarray]:
    """Values and gradients of ``rho^alpha c(theta)`` on a radius-by-direction grid.

    ``vals`` and ``tang`` are the values and tangential gradients of ``c`` at
    the directions ``theta``; returns arrays of shape ``(n_r, n_s)`` and
    ``(n_r, n_s, d)``.
    """
    radii = np.asarray(radii, dtype=float)
    ra = radii**alpha
    ra1 = radii ** (alpha - 1)
    values = ra[:, None] * vals[None, :]
    g_dir = alpha * vals[:, None] * theta + tang
    return values, ra1[:, None, None] * g_dir[None, :, :]


@dataclass(frozen=True, eq=False)
class HomogeneousExtension:
    """``x -> |x|^alpha c(x/|x|)`` with value 0 at the origin."""

    trace: SphereTrace
    alpha: float

    def _polar(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rho = np.linalg.norm(x, axis=1)
        safe = np.where(rho > 0, rho, 1.0)
        theta = x / safe[:, None]
        theta[rho == 0] = np.eye(x.shape[1])[0]
        return rho, theta

    def __call__(self, x: np.ndarray) -> np.ndarray:
        rho, theta = self._polar(x)
        return rho**self.alpha * self.trace(theta)

    def grad(self, x: np.ndarray) -> np.ndarray:
        rho, theta = self._polar(x)
        radial = self.alpha * rho ** (self.alpha - 1) * self.trace(theta)
        tang = rho[:, None] ** (self.alpha - 1) * self.trace.tangential_grad(theta)
        return radial[:, None] * theta + tang

    def tensor_eval(self, radii, theta):
        return homogeneous_tensor(radii, self.alpha, self.trace(theta), self.trace.tangential_grad(theta), theta)


def homogeneous_extension(trace: SphereTrace, alpha: float) -> HomogeneousExtension:
    """The ``alpha``-homogeneous extension of ``trace`` to the unit ball."""
    if not alpha >= 2:
        raise ConfigurationError(f"homogeneity degree must be >= 2, got {alpha}")
    return HomogeneousExtension(trace, float(alpha))


# ---------------------------------------------------------------------------
# Trace JSON
# ---------------------------------------------------------------------------


def write_trace_json(trace: SphereTrace, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trace.to_dict(), fh, indent=1, sort_keys=False)
        fh.write("\n")


def read_trace_json(path: str | PathLike) -> SphereTrace:
    with open(path, encoding="utf-8") as fh:
        return SphereTrace.from_dict(json.load(fh))
