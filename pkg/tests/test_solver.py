import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loglab.errors import ConfigurationError
from loglab.geometry import ScalarField
from loglab.solver import (
    CLASSICAL,
    SolveConfig,
    contact_density,
    extract_free_boundary,
    growth_ratio,
    minimize,
    write_report_json,
)
from loglab.spherical import HalfSpaceSolution, QuadraticForm
from loglab.synthetic import ClassicalRadialSolution, ConstantField, RadialLogSolution

ORACLE = {"type": "classical_radial", "a": 0.5}


def discrete_energy(U, h, mode="log_obstacle"):
    """Independent 2-d evaluation: forward differences plus trapezoid potential."""
    grad = sum(0.5 * np.sum(np.diff(U, axis=k) ** 2) for k in range(2)) / (h * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        F = U if mode == CLASSICAL else np.where(U > 0, U * (1 - np.log(np.where(U > 0, U, 1))), 0.0)
    w = np.ones_like(U)
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    return h * h * (grad + np.sum(w * F))


def laplacian(U, h):
    return (U[2:, 1:-1] + U[:-2, 1:-1] + U[1:-1, 2:] + U[1:-1, :-2] - 4 * U[1:-1, 1:-1]) / (h * h)


@pytest.fixture(scope="module")
def classical_65():
    return minimize(SolveConfig(n=65, mode=CLASSICAL, boundary_datum=ORACLE))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n=16),
            dict(tol=0.0),
            dict(mode="obstacle"),
            dict(domain_shape="torus"),
            dict(lower=(0, 0), upper=(0, 1)),
            dict(armijo_beta=1.0),
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigurationError):
            SolveConfig(**kwargs)

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError):
            SolveConfig.from_dict({"n": 33, "colour": "red"})

    def test_negative_datum(self):
        with pytest.raises(ConfigurationError):
            minimize(SolveConfig(n=17, boundary_datum=-1.0))

    @pytest.mark.filterwarnings("ignore:invalid value")
    def test_nonfinite_datum(self):
        with pytest.raises(ConfigurationError):
            minimize(SolveConfig(n=17, boundary_datum={"type": "expression", "expr": "log(x-2)"}))


class TestMinimize:
    def test_zero_datum_small_ball(self):
        cfg = SolveConfig(lower=(-0.1, -0.1), upper=(0.1, 0.1), n=33, boundary_datum=0.0, domain_shape="ball", ball_radius=0.1)
        rep = minimize(cfg)
        assert np.all(rep.field.values == 0.0)

    @pytest.mark.parametrize("amp", [1e-8, 1e-5, 1e-3, 1e-2, 1e-1])
    @pytest.mark.parametrize("patch", [1, 2, 3])
    def test_zero_beats_coarse_perturbations(self, amp, patch):
        # energy-comparison oracle on a 17x17 grid over [-0.1, 0.1]^2
        n, h = 17, 0.2 / 16
        zero = np.zeros((n, n))
        for i in range(1, n - patch):
            for j in range(1, n - patch, 3):
                U = zero.copy()
                U[i : i + patch, j : j + patch] = amp
                assert discrete_energy(U, h) > discrete_energy(zero, h)

    def test_large_datum_stays_positive(self):
        rep = minimize(SolveConfig(n=65, boundary_datum=10.0, domain_shape="ball", ball_radius=1.0))
        U, h = rep.field.values, rep.field.h
        inside = np.linalg.norm(rep.field.nodes(), axis=-1) < 1.0 - 2 * h
        assert np.all(U[inside] > 0)
        res = np.abs(laplacian(U, h) + np.log(U[1:-1, 1:-1]))
        assert np.max(res[inside[1:-1, 1:-1]]) <= 10 * h
        assert rep.residual["max_abs_interior"] <= 10 * h

    def test_classical_free_boundary_radius(self, classical_65):
        u = classical_65.field
        fb = extract_free_boundary(u, classical_65.threshold)
        rad = np.linalg.norm(fb, axis=1)
        assert len(fb) > 0
        assert np.all(np.abs(rad - 0.5) <= 2 * u.h)

    def test_classical_matches_exact_solution(self, classical_65):
        u = classical_65.field
        exact = ClassicalRadialSolution(0.5)(u.nodes().reshape(-1, 2)).reshape(u.extents)
        assert np.max(np.abs(u.values - exact)) < 1e-3

    def test_classical_complementarity(self, classical_65):
        u = classical_65.field
        U, h = u.values, u.h
        thr = classical_65.threshold
        res = np.abs(laplacian(U, h) - 1.0)
        pos = U[1:-1, 1:-1] > thr
        nb = (U[2:, 1:-1] > thr) & (U[:-2, 1:-1] > thr) & (U[1:-1, 2:] > thr) & (U[1:-1, :-2] > thr)
        assert np.max(np.where(pos & nb, res, 0.0)) <= 10 * h
        assert U.min() >= 0

    @pytest.mark.parametrize("datum", [0.05, {"type": "expression", "expr": "0.3*(x**2+y**2)**2"}])
    def test_feasibility_and_descent(self, datum):
        cfg = SolveConfig(n=65, boundary_datum=datum)
        rep = minimize(cfg)
        U = rep.field.values
        assert U.min() >= 0.0
        nodes = rep.field.nodes()
        from loglab.solver import make_datum

        edge = np.zeros(U.shape, dtype=bool)
        edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
        assert np.array_equal(U[edge], make_datum(datum)(nodes[edge]))
        E = np.asarray(rep.energy_history)
        assert np.all(np.diff(E) <= 1e-12 * (1 + np.abs(E[:-1])))
        assert rep.energy == pytest.approx(discrete_energy(U, rep.field.h), rel=1e-12)
        assert rep.converged

    def test_free_boundary_forms(self):
        rep = minimize(SolveConfig(n=65, boundary_datum=0.05))
        assert np.mean(rep.field.values <= rep.threshold) > 0.1
        assert len(extract_free_boundary(rep.field, rep.threshold)) > 0

    def test_three_dimensional(self):
        rep = minimize(SolveConfig(lower=(-1, -1, -1), upper=(1, 1, 1), n=17, boundary_datum=0.05))
        assert rep.converged and rep.field.values.min() >= 0 and rep.field.d == 3

    def test_deterministic(self):
        cfg = dict(n=33, boundary_datum={"type": "expression", "expr": "0.02+0.1*x*x"})
        a, b = minimize(SolveConfig(**cfg)), minimize(SolveConfig(**cfg))
        assert np.array_equal(a.field.values, b.field.values)
        assert a.energy_history == b.energy_history

    def test_warm_start(self):
        coarse = minimize(SolveConfig(n=33, boundary_datum=0.05))
        fine_cfg = SolveConfig(n=65, boundary_datum=0.05)
        warm, cold = minimize(fine_cfg, coarse.field), minimize(fine_cfg)
        assert warm.energy == pytest.approx(cold.energy, rel=1e-9)

    def test_report_json(self, tmp_path):
        rep = minimize(SolveConfig(n=17, boundary_datum=0.05))
        path = tmp_path / "r.json"
        write_report_json(rep, path)
        import json

        data = json.loads(path.read_text())
        assert data["label"] == "candidate minimizer"
        assert data["config"]["n"] == [17, 17]


class TestFreeBoundary:
    def test_halfspace_zero_set(self):
        f = ScalarField.from_function(HalfSpaceSolution((1.0, 0.0)), (-1, -1), (1, 1), 41)
        fb = extract_free_boundary(f, 1e-12)
        assert len(fb) > 0
        assert np.all(np.abs(fb[:, 0]) <= f.h)

    def test_positive_field(self):
        f = ScalarField.from_function(lambda x: np.ones(len(x)), (0, 0), (1, 1), 9)
        assert extract_free_boundary(f).shape == (0, 2)

    def test_zero_field(self):
        f = ScalarField.from_function(lambda x: np.zeros(len(x)), (0, 0), (1, 1), 9)
        assert extract_free_boundary(f).shape == (0, 2)

    def test_radial_oracle_circle(self):
        f = ScalarField.from_function(ClassicalRadialSolution(0.5), (-1, -1), (1, 1), 129)
        fb = extract_free_boundary(f, 1e-14)
        assert np.all(np.abs(np.linalg.norm(fb, axis=1) - 0.5) <= 2 * f.h)


class TestContactDensity:
    def test_positive(self):
        assert contact_density(ConstantField(1.0, 2), (0, 0), 0.5, 1e-12) == 0.0

    @pytest.mark.parametrize("d", [2, 3])
    def test_halfspace(self, d):
        val = contact_density(HalfSpaceSolution(np.eye(d)[0]), (0.0,) * d, 0.5, 0.0)
        assert val == pytest.approx(0.5, abs=0.02)

    def test_halfspace_grid(self):
        f = ScalarField.from_function(HalfSpaceSolution((1.0, 0.0)), (-1, -1), (1, 1), 65)
        val = contact_density(f, (0.0, 0.0), 0.5, 0.0)
        assert abs(val - 0.5) <= 2 * f.h / 0.5

    def test_quadratic(self):
        assert contact_density(QuadraticForm(np.eye(2) / 2), (0.0, 0.0), 0.5, 0.0) == 0.0

    @given(st.floats(-1, 1), st.floats(-1, 1))
    def test_in_unit_interval(self, a, b):
        v = contact_density(HalfSpaceSolution((a, b)), (0.0, 0.0), 0.3, 0.0)
        assert 0.0 <= v <= 1.0


class TestGrowthRatio:
    def test_synthetic_radial(self):
        u = lambda x: (lambda r: np.where(r > 0, r * r * (1 - 2 * np.log(np.where(r > 0, r, 1))), 0.0))(np.linalg.norm(x, axis=1)) / 4
        radii = 2.0 ** -np.arange(2, 9)
        g = growth_ratio(u, (0.0, 0.0), radii)
        assert g.spread <= 3.0
        assert not g.degenerate
        # mu(r) / (r^2 |log r|) -> 2, so the ratio tends to 2/(2d)
        assert g.ratios[-1] == pytest.approx(0.5 * (1 + 1 / (2 * 8 * math.log(2))), rel=1e-2)

    def test_zero(self):
        g = growth_ratio(ConstantField(0.0, 2), (0.0, 0.0), [0.1, 0.2])
        assert g.degenerate and g.ratios == [0.0, 0.0]

    def test_positive_radial_solution_is_finite(self):
        g = growth_ratio(RadialLogSolution(0.5), (0.0, 0.0), [0.1, 0.2])
        assert all(math.isfinite(r) and r > 0 for r in g.ratios)
