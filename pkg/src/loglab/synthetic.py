"""Analytic fields used as oracles: blow-up profiles and exact solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError
from .spherical import HalfSpaceSolution, QuadraticForm, SphereTrace


def _sphere_parts(c, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and tangential gradients of a function on the unit sphere.

    ``c`` is a :class:`SphereTrace` or a 2-homogeneous evaluable with ``grad``
    (a quadratic form or half-space solution), whose tangential gradient is
    ``∇c - 2 c θ``.
    """
    if isinstance(c, SphereTrace):
        return c(theta), c.tangential_grad(theta)
    v = c(theta)
    return v, c.grad(theta) - 2 * v[:, None] * theta


@dataclass(frozen=True, eq=False)
class BlowupProfileField:
    """``u(x) = mu(|x - x0|) c((x - x0)/|x - x0|)`` for ``|x - x0| < sqrt(e)``.

    Along ``r -> 0`` its rescalings converge to ``|x|^2 c(x/|x|)``.
    """

    shape: object
    center: tuple[float, ...]

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def kink_axis(self):
        if isinstance(self.shape, HalfSpaceSolution):
            return self.shape.nu
        if isinstance(self.shape, SphereTrace) and len(self.shape.tails) == 1:
            return np.asarray(self.shape.tails[0][1])
        return None

    def _polar(self, x):
        y = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(self.center)
        rho = np.linalg.norm(y, axis=1)
        if np.any(rho >= math.sqrt(math.e)):
            raise DomainError("blow-up profile fields are defined for |x - x0| < sqrt(e)")
        safe = np.where(rho > 0, rho, 1.0)
        theta = y / safe[:, None]
        theta[rho == 0] = np.eye(y.shape[1])[0]
        return rho, safe, theta

    def __call__(self, x):
        rho, safe, theta = self._polar(x)
        mu = np.where(rho > 0, safe * safe * (1 - 2 * np.log(safe)), 0.0)
        v, _ = _sphere_parts(self.shape, theta)
        return mu * v

    def grad(self, x):
        rho, safe, theta = self._polar(x)
        v, tang = _sphere_parts(self.shape, theta)
        dmu = np.where(rho > 0, -4 * safe * np.log(safe), 0.0)
        mu_over_rho = np.where(rho > 0, safe * (1 - 2 * np.log(safe)), 0.0)
        return (dmu * v)[:, None] * theta + mu_over_rho[:, None] * tang


def quadratic_profile(A, center: Sequence[float] | None = None) -> BlowupProfileField:
    Q = QuadraticForm(A)
    return BlowupProfileField(Q, tuple(center) if center is not None else (0.0,) * Q.d)


def halfspace_profile(nu, center: Sequence[float] | None = None) -> BlowupProfileField:
    q = HalfSpaceSolution(nu)
    return BlowupProfileField(q, tuple(center) if center is not None else (0.0,) * len(q.nu))


@dataclass(frozen=True, eq=False)
class PerturbedQuadraticProfile:
    """``mu(|x|) Q_A(x/|x|) + amp |x|^3 (1 + cos 3θ)/2`` in the plane.

    The rescaled traces equal ``Q_A + amp r^3/mu(r) (1 + cos 3θ)/2``, so their
    L¹ distance to ``Q_A`` on the unit circle is ``π amp r^3/mu(r)``.
    """

    A: np.ndarray
    amp: float = 1.0
    d: int = 2

    def __post_init__(self):
        if np.shape(self.A) != (2, 2):
            raise DomainError("the perturbed profile is planar")

    @cached_property
    def _base(self) -> BlowupProfileField:
        return quadratic_profile(self.A)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        # r^3 (1 + cos 3θ)/2 = (r^3 + Re (x + iy)^3)/2
        return self._base(x) + 0.5 * self.amp * (r**3 + x[:, 0] ** 3 - 3 * x[:, 0] * x[:, 1] ** 2)

    def grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        gx = 1.5 * (r * x[:, 0] + x[:, 0] ** 2 - x[:, 1] ** 2)
        gy = 1.5 * r * x[:, 1] - 3 * x[:, 0] * x[:, 1]
        return self._base.grad(x) + self.amp * np.column_stack([gx, gy])


@dataclass(frozen=True, eq=False)
class ConstantField:
    value: float
    d: int

    def __call__(self, x):
        return np.full(np.atleast_2d(x).shape[0], float(self.value))

    def grad(self, x):
        return np.zeros(np.atleast_2d(x).shape)


@dataclass(frozen=True, eq=False)
class ClassicalRadialSolution:
    """Radial solution of ``Δu = χ_{u>0}`` in the plane with contact disc of radius ``a``.

    ``u(ρ) = (ρ² - a²)/4 - (a²/2) log(ρ/a)`` for ``ρ >= a`` and 0 inside.
    """

    a: float = 0.5
    center: tuple[float, ...] = (0.0, 0.0)
    d: int = 2

    def profile(self, rho):
        rho = np.asarray(rho, dtype=float)
        a = self.a
        safe = np.maximum(rho, a)
        return np.where(rho > a, (safe**2 - a * a) / 4 - (a * a / 2) * np.log(safe / a), 0.0)

    def __call__(self, x):
        y = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(self.center)
        return self.profile(np.linalg.norm(y, axis=1))

    def grad(self, x):
        y = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(self.center)
        rho = np.linalg.norm(y, axis=1)
        safe = np.maximum(rho, self.a)
        slope = np.where(rho > self.a, safe / 2 - self.a**2 / (2 * safe), 0.0)
        return (slope / safe)[:, None] * y


@dataclass(frozen=True, eq=False)
class RadialLogSolution:
    """Positive radial solution of ``-Δu = log u`` with ``u(0) = u0`` (smooth while positive).

    Solves ``u'' + (d-1)/ρ u' = -log u`` numerically to high accuracy on
    ``[0, rho_max]``.
    """

    u0: float
    d: int = 2
    center: tuple[float, ...] | None = None
    rho_max: float = 1.5

    @cached_property
    def _spline(self):
        u0, d = self.u0, self.d
        rho0 = 1e-4
        c2 = -math.log(u0) / (2 * d)
        y0 = [u0 + c2 * rho0**2, 2 * c2 * rho0]

        def rhs(rho, y):
            return [y[1], -math.log(y[0]) - (d - 1) / rho * y[1]]

        def hit_zero(rho, y):
            return y[0] - 1e-12

        hit_zero.terminal = True
        sol = solve_ivp(rhs, (rho0, self.rho_max), y0, method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True, events=hit_zero)
        if sol.status != 0:
            raise DomainError("radial solution reaches zero before rho_max")
        t = np.concatenate([[0.0], np.linspace(rho0, self.rho_max, 4001)])
        vals = sol.sol(t[1:])
        y = np.concatenate([[u0], vals[0]])
        dy = np.concatenate([[0.0], vals[1]])
        ddy = -np.log(y) - np.concatenate([[0.0], (d - 1) / t[1:] * vals[1]])
        ddy[0] = 2 * c2
        return CubicHermiteSpline(t, y, dy), CubicHermiteSpline(t, dy, ddy)

    def _rho(self, x):
        c = np.zeros(self.d) if self.center is None else np.asarray(self.center)
        y = np.atleast_2d(np.asarray(x, dtype=float)) - c
        rho = np.linalg.norm(y, axis=1)
        if np.any(rho > self.rho_max):
            raise DomainError("point outside the tabulated range of the radial solution")
        return y, rho

    def __call__(self, x):
        _, rho = self._rho(x)
        return self._spline[0](rho)

    def grad(self, x):
        y, rho = self._rho(x)
        slope = self._spline[1](rho)
        safe = np.where(rho > 0, rho, 1.0)
        return np.where(rho[:, None] > 0, (slope / safe)[:, None] * y, 0.0)


@dataclass(frozen=True, eq=False)
class PlanarLogSolution:
    """One-dimensional solution ``u(x) = g((x·e)_+)`` with ``g'' = -log g``, ``g(0) = g'(0) = 0``.

    The first integral ``g'^2/2 = g(1 - log g)`` gives ``t(g) = ∫_0^g ds/sqrt(2 s (1 - log s))``,
    valid up to ``g = 1`` (beyond which ``g'' < 0`` and the profile bends back).
    The field has a regular free-boundary point at the origin.
    """

    e: tuple[float, ...]

    @property
    def d(self) -> int:
        return len(self.e)

    @property
    def kink_axis(self):
        return np.asarray(self.e)

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        # tabulate t(g) on a graded grid, then interpolate g(t) with exact slopes
        g = np.concatenate([[0.0], np.geomspace(1e-14, 1.0, 3000)])
        t = np.zeros_like(g)
        t[1] = math.sqrt(2 * g[1] / (1 - math.log(g[1])))
        density = lambda s: 1.0 / math.sqrt(2 * s * (1 - math.log(s)))
        for i in range(2, len(g)):
            t[i] = t[i - 1] + quad(density, g[i - 1], g[i], epsabs=0, epsrel=1e-13)[0]
        return CubicHermiteSpline(t, g, self._slope(g))

    @staticmethod
    def _slope(g):
        g = np.maximum(g, 0.0)
        F = np.where(g > 0, g * (1 - np.log(np.where(g > 0, g, 1.0))), 0.0)
        return np.sqrt(2 * F)

    @property
    def t_max(self) -> float:
        return float(self._spline.x[-1])

    def _profile(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s > self.t_max):
            raise DomainError("point beyond the tabulated planar profile")
        g = np.where(s > 0, self._spline(np.maximum(s, 0.0)), 0.0)
        return np.maximum(g, 0.0), self._slope(g)

    def __call__(self, x):
        s = np.atleast_2d(np.asarray(x, dtype=float)) @ np.asarray(self.e)
        return self._profile(s)[0]

    def grad(self, x):
        s = np.atleast_2d(np.asarray(x, dtype=float)) @ np.asarray(self.e)
        return self._profile(s)[1][:, None] * np.asarray(self.e)
