import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from loglab import __version__
from loglab.cli import main, plot_svg, resolve_radii, tolerance_scale
from loglab.errors import ConfigurationError
from loglab.geometry import read_fld1

CONFIGS = {
    "solve": {
        "solver": {"n": 65, "mode": "classical_obstacle", "boundary_datum": {"type": "classical_radial", "a": 0.5}},
        "center": [0, 0],
    },
    "weiss": {
        "field": {"synthetic": {"kind": "quadratic", "A": [[0.5, 0], [0, 0.5]]}},
        "x0": [0, 0],
        "radii": {"r_min": 0.001, "r_max": 0.25, "count": 9},
    },
    "blowup": {
        "field": {"synthetic": {"kind": "halfspace", "nu": [1, 0]}},
        "x0": [0, 0],
        "radii": {"r_min": 0.001, "r_max": 0.25, "count": 6},
    },
    "epi": {"d": 2, "n": 4, "scales": [0.01, 0.001]},
    "decay": {
        "samples": {"r": [0.05, 0.01, 0.001, 0.0001], "e": [0.2765, 0.1, 0.05, 0.03]},
        "model": "log_power",
        "gamma": 1 / 3,
        "modulus": {"points": [[0, 0], [0.1, 0]], "forms": [[[0.6, 0], [0, 0.4]], [[0.5, 0], [0, 0.5]]], "gamma": 0},
    },
    "classify": {
        "field": {"synthetic": {"kind": "quadratic", "A": [[0.5, 0], [0, 0.5]]}},
        "points": [[0, 0]],
        "radii": [2**-8, 2**-7, 2**-6],
    },
}

OUTPUTS = {
    "solve": ["field.fld1", "solve_report.json"],
    "weiss": ["energy_table.csv"],
    "blowup": ["blowup.json", "blowup_traces.csv"],
    "epi": ["epi_sweep.csv", "epi_report.json"],
    "decay": ["decay_fit.json", "fit_summary.csv"],
    "classify": ["labels.json"],
}


def write_config(tmp_path: Path, name: str, config) -> str:
    path = tmp_path / f"{name}.json"
    path.write_text(config if isinstance(config, str) else json.dumps(config))
    return str(path)


def run(tmp_path, command, config, out="out", extra=()):
    cfg = write_config(tmp_path, f"{command}_{out}", config)
    return main([command, "--config", cfg, "--out", str(tmp_path / out), *extra])


@pytest.mark.parametrize("command", list(OUTPUTS))
def test_subcommand_outputs_are_reproducible(tmp_path, command):
    assert run(tmp_path, command, CONFIGS[command], "a") == 0
    assert run(tmp_path, command, CONFIGS[command], "b") == 0
    for name in OUTPUTS[command]:
        a, b = (tmp_path / d / name for d in "ab")
        assert a.read_bytes() == b.read_bytes(), name


@pytest.mark.parametrize("command", ["weiss", "blowup", "epi", "decay", "classify"])
def test_artifacts_embed_config_and_version(tmp_path, command):
    assert run(tmp_path, command, CONFIGS[command]) == 0
    for name in OUTPUTS[command]:
        text = (tmp_path / "out" / name).read_text()
        if name.endswith(".json"):
            meta = json.loads(text)["meta"]
        else:
            meta = json.loads(text.splitlines()[0].lstrip("# "))
        assert meta["version"] == __version__ and meta["subcommand"] == command
        assert "config" in meta


def test_solve_classical_free_boundary(tmp_path):
    assert run(tmp_path, "solve", CONFIGS["solve"]) == 0
    data = json.loads((tmp_path / "out" / "solve_report.json").read_text())
    fb = data["free_boundary"]
    assert fb["count"] > 0
    assert abs(fb["radius_min"] - 0.5) <= 2 * fb["h"] and abs(fb["radius_max"] - 0.5) <= 2 * fb["h"]
    assert data["meta"]["config"]["solver"]["n"] == [65, 65]
    field = read_fld1(tmp_path / "out" / "field.fld1")
    assert field.values.shape == (65, 65) and field.values.min() >= 0


def test_epi_jobs_do_not_change_output(tmp_path):
    assert run(tmp_path, "epi", CONFIGS["epi"], "j1") == 0
    assert run(tmp_path, "epi", CONFIGS["epi"], "j2", ["--jobs", "2"]) == 0
    for name in OUTPUTS["epi"]:
        assert (tmp_path / "j1" / name).read_bytes() == (tmp_path / "j2" / name).read_bytes()


def test_epi_seed_flag(tmp_path):
    assert run(tmp_path, "epi", CONFIGS["epi"], "s1", ["--seed", "1"]) == 0
    assert run(tmp_path, "epi", CONFIGS["epi"], "s2", ["--seed", "2"]) == 0
    assert (tmp_path / "s1" / "epi_sweep.csv").read_bytes() != (tmp_path / "s2" / "epi_sweep.csv").read_bytes()
    lines = (tmp_path / "s1" / "epi_sweep.csv").read_text().splitlines()
    assert lines[1] == "trace_id,s,excess,alpha,lhs,rhs,T,pass"
    assert len(lines) == 2 + 4 * 2


def test_plot_svg(tmp_path):
    assert run(tmp_path, "weiss", CONFIGS["weiss"]) == 0
    table = str(tmp_path / "out" / "energy_table.csv")
    code = main(["plot", table, "--x", "r", "--y", "W", "--y", "M", "--logx", "--out", str(tmp_path / "plot")])
    assert code == 0
    root = ET.parse(tmp_path / "plot" / "plot.svg").getroot()
    ns = "{http://www.w3.org/2000/svg}"
    assert root.tag == f"{ns}svg"
    assert len(root.findall(f".//{ns}polyline")) == 2
    assert "loglab" in (tmp_path / "plot" / "plot.svg").read_text()


class TestExitCodes:
    def test_invalid_json(self, tmp_path):
        assert run(tmp_path, "solve", '{"bad json') == 2

    def test_invalid_solver_config(self, tmp_path):
        assert run(tmp_path, "solve", {"n": 5}) == 2

    def test_missing_keys(self, tmp_path):
        assert run(tmp_path, "weiss", {"x0": [0, 0]}) == 2

    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == 2

    def test_bad_jobs(self, tmp_path):
        assert run(tmp_path, "epi", CONFIGS["epi"], extra=["--jobs", "0"]) == 2

    def test_numerical_failure(self, tmp_path):
        with np.errstate(all="ignore"):
            code = run(tmp_path, "solve", {"n": 17, "boundary_datum": 1e300})
        assert code == 3
        diag = json.loads((tmp_path / "out" / "failure.json").read_text())
        assert diag["subcommand"] == "solve" and diag["version"] == __version__

    def test_precondition_negative_trace(self, tmp_path):
        coeffs = [{"degree": 0, "index": 0, "value": 0.1}, {"degree": 3, "index": 3, "value": 1.0}]
        trace = write_config(tmp_path, "neg_trace", {"d": 2, "L": 4, "coeffs": coeffs})
        assert run(tmp_path, "epi", {"trace": trace, "s": 1e-3}) == 4

    def test_precondition_positive_point(self, tmp_path):
        cfg = {"field": {"synthetic": {"kind": "radial_log", "u0": 0.5}}, "x0": [0, 0], "radii": [0.01, 0.1]}
        assert run(tmp_path, "decay", cfg) == 4

    def test_insufficient_data(self, tmp_path):
        assert run(tmp_path, "decay", {"samples": {"r": [0.1], "e": [0.2]}, "model": "holder"}) == 4


class TestTolerance:
    def test_default(self, monkeypatch):
        monkeypatch.delenv("LOGLAB_TOL", raising=False)
        assert tolerance_scale() == 1.0

    def test_scaling(self, monkeypatch, tmp_path):
        monkeypatch.setenv("LOGLAB_TOL", "10")
        assert tolerance_scale() == 10.0
        assert run(tmp_path, "epi", CONFIGS["epi"]) == 0
        meta = json.loads((tmp_path / "out" / "epi_report.json").read_text())["meta"]
        assert meta["config"]["tol"] == pytest.approx(1e-9)

    @pytest.mark.parametrize("value", ["abc", "-1", "0", "inf"])
    def test_rejects(self, monkeypatch, tmp_path, value):
        monkeypatch.setenv("LOGLAB_TOL", value)
        with pytest.raises(ConfigurationError):
            tolerance_scale()
        assert run(tmp_path, "epi", CONFIGS["epi"]) == 2


class TestHelpers:
    def test_geometric_radii(self):
        radii = resolve_radii({"r_min": 0.01, "r_max": 1.0, "count": 3})
        assert radii == pytest.approx([0.01, 0.1, 1.0])

    def test_list_radii_sorted(self):
        assert resolve_radii([0.2, 0.1]) == [0.1, 0.2]

    @pytest.mark.parametrize("spec", [[0.1], [0.1, 0.1], {"r_min": 0.1}, {"r_min": 1, "r_max": 0.1, "count": 3}, "x"])
    def test_rejects_radii(self, spec):
        with pytest.raises(ConfigurationError):
            resolve_radii(spec)

    def test_plot_svg_log_axes(self):
        x = np.geomspace(1e-3, 1, 5)
        svg = plot_svg({"r": x, "e": x**2}, "r", ["e"], True, True, "t")
        root = ET.fromstring(svg)
        pts = root.find(".//{http://www.w3.org/2000/svg}polyline").get("points").split()
        xy = np.array([[float(v) for v in p.split(",")] for p in pts])
        # a power law is a straight line on log axes
        slopes = np.diff(xy[:, 1]) / np.diff(xy[:, 0])
        assert np.allclose(slopes, slopes[0], rtol=1e-6)
        assert all(math.isfinite(v) for v in xy.ravel())
