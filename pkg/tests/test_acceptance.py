"""One check per headline criterion; each records a PASS/FAIL line in the terminal summary."""

import json
import math
import time

import numpy as np
import pytest

from loglab.blowup import REGULAR, SINGULAR, classify_point, estimate_blowup, stratum
from loglab.cli import main
from loglab.decay import blowup_modulus, fit_holder, fit_log_decay, singular_modulus
from loglab.energy import corrected_excess_table, m_energy, theta_constant, weiss_derivative, weiss_energy, weiss_rhs
from loglab.epiperimetric import fourier_identity, fourier_identity_quadrature, sweep
from loglab.geometry import ScalarField
from loglab.solver import CLASSICAL, SolveConfig, extract_free_boundary, growth_ratio, minimize
from loglab.spherical import HalfSpaceSolution, QuadraticForm, SphereTrace
from loglab.synthetic import (
    ClassicalRadialSolution,
    PerturbedQuadraticProfile,
    RadialLogSolution,
    halfspace_profile,
    quadratic_profile,
)

from conftest import SOLVED_INSTANCES


def test_theta_constants(acceptance):
    t0 = time.perf_counter()
    errs = []
    for d, theta in ((2, math.pi / 16), (3, math.pi / 15)):
        q = m_energy("M0", QuadraticForm(np.eye(d) / d), d=d)
        h = m_energy("M0", HalfSpaceSolution(np.eye(d)[0]), d=d)
        errs += [abs(q / theta - 1), abs(h / (theta / 2) - 1), abs(theta_constant(d) / theta - 1)]
    elapsed = time.perf_counter() - t0
    ok = acceptance("Theta constants", max(errs) <= 1e-6 and elapsed < 1.0, f"max rel err {max(errs):.2e}, {elapsed:.2f} s")
    assert ok


def test_fourier_identity_grid(acceptance):
    t0 = time.perf_counter()
    worst, worst_doubled = 0.0, math.inf
    for d in (2, 3):
        for k in (3, 4, 5):  # the three lowest eigenvalues above 2d
            m = k if d == 2 else 0
            phi = SphereTrace.from_modes(d, 8, {(k, m): 1.0})
            for alpha in (2.1, 2.3, 2.5):
                for s in (1e-2, 1e-4, 1e-6):
                    quad = fourier_identity_quadrature(phi, alpha, s)
                    worst = max(worst, abs(fourier_identity(phi, alpha, s) - quad) / abs(quad))
                    doubled = fourier_identity(phi, alpha, s, convention="doubled")
                    worst_doubled = min(worst_doubled, abs(doubled - quad) / abs(quad))
    elapsed = time.perf_counter() - t0
    detail = f"max rel err {worst:.2e} with positive eta; doubled form off by >= {worst_doubled:.2f}; {elapsed:.1f} s"
    assert acceptance("Fourier energy identity", worst <= 1e-6 and elapsed < 10, detail)


@pytest.mark.slow
def test_classical_oracle(acceptance):
    t0 = time.perf_counter()
    exact = ClassicalRadialSolution(0.5)
    errs, hs, fb_ok, prev = [], [], True, None
    for n in (257, 513, 1025):
        # finer grids start from the interpolated coarser solution
        rep = minimize(SolveConfig(n=n, mode=CLASSICAL, boundary_datum={"type": "classical_radial", "a": 0.5}), prev)
        u = prev = rep.field
        errs.append(float(np.max(np.abs(u.values - exact(u.nodes().reshape(-1, 2)).reshape(u.extents)))))
        hs.append(u.h)
        if n == 257:
            fb = extract_free_boundary(u, rep.threshold)
            fb_ok = len(fb) > 0 and bool(np.all(np.abs(np.linalg.norm(fb, axis=1) - 0.5) <= 2 * u.h))
            base_time = time.perf_counter() - t0
    pairwise = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    order = math.log2(errs[0] / errs[2]) / 2
    detail = (
        f"errors {errs[0]:.3e}, {errs[1]:.3e}, {errs[2]:.3e}; order over h -> h/4 {order:.2f} "
        f"(pairwise {pairwise[0]:.2f}, {pairwise[1]:.2f}); base grid {base_time:.1f} s"
    )
    assert acceptance("Classical-obstacle oracle", order >= 1.8 and fb_ok and base_time < 120, detail)


def _weiss_points(name, rep, count=4):
    """Free-boundary points whose test balls of radius >= 8h·2^(1/2) avoid the fixed boundary data."""
    u, h = rep.field, rep.field.h
    cfg = SOLVED_INSTANCES[name]
    if cfg.get("domain_shape") == "ball":
        room = lambda p: cfg["ball_radius"] - np.linalg.norm(p) - h
    else:
        room = lambda p: 1 - np.max(np.abs(p)) - h
    fb = extract_free_boundary(u, rep.threshold)
    pts = [(p, min(0.25, room(p))) for p in fb if room(p) >= 8 * h * 2**0.5]
    step = max(1, len(pts) // count)
    return pts[::step][:count]


@pytest.mark.slow
def test_weiss_monotonicity(acceptance, solved_instances):
    drops, checked = [], 0
    for name, rep in solved_instances.items():
        h = rep.field.h
        for p, r0 in _weiss_points(name, rep):
            radii = 8 * h * 2.0 ** (np.arange(0, 40) / 4)
            radii = radii[radii <= r0 * (1 + 1e-12)]
            table = corrected_excess_table(rep.field, p, radii)
            checked += 1
            drops += [(name, tuple(np.round(p, 3)), i) for i in table.monotonicity_violations(1e-3)]
    synthetic = [
        (quadratic_profile(np.eye(2) / 2), (0.0, 0.0)),
        (quadratic_profile(np.diag([0.7, 0.3])), (0.0, 0.0)),
        (RadialLogSolution(0.5), (0.2, 0.1)),
        (RadialLogSolution(0.3, 3), (0.1, 0.0, -0.1)),
    ]
    worst = 0.0
    for u, x0 in synthetic:
        for r in (0.05, 0.1, 0.2):
            rhs = weiss_rhs(u, x0, r)
            worst = max(worst, abs(weiss_derivative(u, x0, r) - rhs) / abs(rhs))
    ok = not drops and checked >= 3 * 3 and worst <= 0.05
    detail = f"{checked} points on {len(solved_instances)} instances, drops {drops}; finite-difference dW/dr vs formula max rel err {worst:.3f}"
    assert acceptance("Weiss monotonicity", ok, detail)


@pytest.mark.slow
def test_growth_sandwich(acceptance, solved_instances):
    spreads = []
    for rep in solved_instances.values():
        u = rep.field
        radii = 8 * u.h * 2.0 ** np.arange(0, 3)
        spreads += [growth_ratio(u, p, radii).spread for p in extract_free_boundary(u, rep.threshold)]
    worst = max(spreads)
    assert acceptance("Growth sandwich", worst <= 10, f"max spread {worst:.2f} over {len(spreads)} free-boundary points")


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="cone traces carry a positive excess of order 1/|log s| and T is negative")
def test_log_epiperimetric_sweep(acceptance):
    t0 = time.perf_counter()
    rates, diagnosed = {}, True
    for d in (2, 3):
        res = sweep(d, n=200, scales=(1e-2, 1e-3, 1e-4), delta=0.05, eps=0.05, seed=0)
        rates[d] = res.pass_rate
        diagnosed &= all({"boundary_error", "min_sample", "b", "c0"} <= set(r.diagnostics) for _, r in res.failures())
    elapsed = time.perf_counter() - t0
    ok = min(rates.values()) >= 0.95 and diagnosed and elapsed < 300
    detail = f"pass rate d=2 {rates[2]:.3f}, d=3 {rates[3]:.3f}; diagnostics on every failure: {diagnosed}; {elapsed:.0f} s"
    acceptance("Log-epiperimetric sweep", ok, detail)
    assert ok


@pytest.mark.xfail(strict=True, reason="W(2^-8) sits 0.156 Θ above Θ for the quadratic profile")
def test_blowup_singular_classification(acceptance):
    radii = 2.0 ** -np.arange(8, 1, -1)
    rows = []
    for A in (np.eye(2) / 2, np.diag([0.7, 0.3]), np.diag([0.9, 0.1])):
        u = quadratic_profile(A)
        c = classify_point(u, (0.0, 0.0), radii)
        rel = abs(weiss_energy(u, (0.0, 0.0), 2.0**-8) - theta_constant(2)) / theta_constant(2)
        rows.append((c.label, rel))
    ok = all(label == SINGULAR and rel <= 0.15 for label, rel in rows)
    detail = ", ".join(f"{label} |W-Θ|/Θ={rel:.3f}" for label, rel in rows)
    acceptance("Blow-up classification: quadratic profiles Singular at 2^-8", ok, detail)
    assert ok


def test_blowup_regular_classification(acceptance):
    radii = 2.0 ** -np.arange(8, 1, -1)
    rows = []
    for nu in ((1.0, 0.0), (0.6, 0.8), (0.0, 0.6, 0.8)):
        c = classify_point(halfspace_profile(nu), (0.0,) * len(nu), radii)
        theta = theta_constant(len(nu))
        rows.append((c.label, abs(c.energy - theta / 2) / theta))
    ok = all(label == REGULAR and rel <= 0.15 for label, rel in rows)
    detail = ", ".join(f"{label} |W-Θ/2|/Θ={rel:.3f}" for label, rel in rows)
    assert acceptance("Blow-up classification: half-space profiles Regular", ok, detail)


def test_stratum_labels(acceptance):
    cases = [
        (np.eye(2) / 2, 0),
        (np.diag([1.0, 0.0]), 1),
        (np.eye(3) / 3, 0),
        (np.diag([0.5, 0.5, 0.0]), 1),
        (np.diag([1.0, 0.0, 0.0]), 2),
    ]
    got = [stratum(A) for A, _ in cases]
    rec = estimate_blowup(quadratic_profile(np.diag([0.5, 0.5, 0.0])), (0.0,) * 3, 2.0 ** -np.arange(10, 1, -1))
    ok = got == [k for _, k in cases] and rec.stratum == 1
    assert acceptance("Blow-up stratum labels", ok, f"labels {got}, estimated stratum {rec.stratum}")


@pytest.mark.slow
def test_decay_fits(acceptance):
    r = np.geomspace(1e-6, 0.05, 12)
    e_log = (-(2 / 3) * np.log(r / 0.5)) ** -3
    f_log = fit_log_decay(r, e_log, 1 / 3)
    f_hol = fit_holder(r, 3 * r**0.4)
    roundtrip = (
        abs(f_log.params["C"] / 2 - 1) <= 0.01
        and abs(f_log.params["r0"] / 0.5 - 1) <= 0.01
        and abs(f_hol.params["beta"] / 0.4 - 1) <= 0.01
        and abs(f_hol.params["C"] / 3 - 1) <= 0.01
    )
    radii = 2.0 ** -np.arange(10, 1, -1)
    u = PerturbedQuadraticProfile(np.eye(2) / 2)
    analytic = estimate_blowup(u, (0.0, 0.0), radii)
    grid = estimate_blowup(ScalarField.from_function(u, (-0.6, -0.6), (0.6, 0.6), 513, nonneg=True), (0.0, 0.0), radii)
    last4 = [np.asarray(rec.distances)[rec.reliable][-4:] for rec in (analytic, grid)]
    monotone = all(len(d) == 4 and np.all(np.diff(d) <= 0) for d in last4)
    modulus_fit = blowup_modulus(analytic)
    points = [(0.0, 0.0), (0.05, 0.0), (0.0, 0.1), (0.2, 0.2)]
    forms = [np.diag([0.5, 0.5]), np.diag([0.55, 0.45]), np.diag([0.6, 0.4]), np.diag([0.7, 0.3])]
    found = [estimate_blowup(quadratic_profile(A, p), p, radii).candidate_A for p, A in zip(points, forms)]
    mod2 = singular_modulus(points, found, gamma=0.0)
    mod3 = singular_modulus([(0, 0, 0), (0.1, 0, 0)], [np.eye(3) / 3, np.diag([0.4, 0.3, 0.3])], gamma=1 / 3)
    finite = all(math.isfinite(x) for x in (mod2.constant, mod3.constant, modulus_fit.params["C"]))
    detail = (
        f"log-model C={f_log.params['C']:.4f} r0={f_log.params['r0']:.4f}; Hoelder C={f_hol.params['C']:.4f} "
        f"beta={f_hol.params['beta']:.4f}; last four L1 distances analytic {np.array2string(last4[0], precision=3)}, "
        f"grid {np.array2string(last4[1], precision=3)}; modulus constants {mod2.constant:.3g} (d=2), {mod3.constant:.3g} (d=3)"
    )
    assert acceptance("Decay fits and convergence", roundtrip and monotone and finite, detail)


def _pipeline(tmp):
    out = tmp / "run"
    configs = {
        "solve": {"solver": {"n": 65, "boundary_datum": 0.05}},
        "weiss": {"field": {"synthetic": {"kind": "quadratic", "A": [[0.5, 0], [0, 0.5]]}}, "x0": [0, 0], "radii": [0.01, 0.05, 0.1]},
        "blowup": {"field": {"synthetic": {"kind": "halfspace", "nu": [1, 0]}}, "x0": [0, 0], "radii": [0.01, 0.05, 0.1]},
        "epi": {"d": 2, "n": 3, "scales": [0.01], "seed": 5},
        "decay": {"samples": {"r": [0.05, 0.01, 0.001], "e": [0.3, 0.1, 0.05]}, "model": "holder"},
        "classify": {"field": {"synthetic": {"kind": "quadratic", "A": [[0.5, 0], [0, 0.5]]}}, "points": [[0, 0]], "radii": [0.01, 0.1]},
    }
    codes = []
    for cmd, cfg in configs.items():
        path = tmp / f"{cmd}.json"
        path.write_text(json.dumps(cfg))
        codes.append(main([cmd, "--config", str(path), "--out", str(out / cmd), "--seed", "7"]))
    codes.append(main(["plot", str(out / "weiss" / "energy_table.csv"), "--y", "W", "--out", str(out / "plot")]))
    return codes, {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_determinism(acceptance, tmp_path):
    codes_a, files_a = _pipeline(tmp_path)
    codes_b, files_b = _pipeline(tmp_path)
    same = files_a.keys() == files_b.keys() and all(files_a[k] == files_b[k] for k in files_a)
    ok = set(codes_a) == {0} and codes_a == codes_b and same
    assert acceptance("Determinism", ok, f"{len(files_a)} artifacts from 7 subcommands, byte-identical: {same}")
