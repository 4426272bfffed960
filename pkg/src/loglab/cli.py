"""Command-line pipelines: configs in, CSV/JSON/FLD1/SVG artifacts out.

Every subcommand reads a JSON config (``--config``), writes into ``--out``
and embeds the resolved config and the tool version in each artifact.
Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 rejected
precondition.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .blowup import classify_point, estimate_blowup
from .decay import (
    HOLDER,
    LOG_POWER,
    blowup_modulus,
    default_gamma,
    excess_series,
    fit_holder,
    fit_log_decay,
    fit_summary_csv,
    singular_modulus,
)
from .energy import corrected_excess_table
from .epiperimetric import check_inequality, sweep
from .errors import (
    ConfigurationError,
    DomainError,
    InsufficientDataError,
    NumericalError,
    PreconditionError,
)
from .geometry import ScalarField, read_fld1, write_fld1
from .solver import SolveConfig, extract_free_boundary, growth_ratio, minimize
from .spherical import read_trace_json
from .synthetic import (
    ClassicalRadialSolution,
    PlanarLogSolution,
    RadialLogSolution,
    halfspace_profile,
    quadratic_profile,
)

log = logging.getLogger("loglab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PRECONDITION = 0, 2, 3, 4
TOL_ENV = "LOGLAB_TOL"


# ---------------------------------------------------------------------------
# Config helpers
# ---------------------------------------------------------------------------


def tolerance_scale() -> float:
    """Global tolerance factor from ``LOGLAB_TOL`` (default 1)."""
    raw = os.environ.get(TOL_ENV)
    if raw is None or raw == "":
        return 1.0
    try:
        value = float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{TOL_ENV} must be a number, got {raw!r}") from exc
    if not value > 0 or not math.isfinite(value):
        raise ConfigurationError(f"{TOL_ENV} must be positive and finite")
    return value


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    return data


def resolve_radii(spec: Any) -> list[float]:
    """Increasing radii from a list or ``{"r_min", "r_max", "count"}`` (geometric)."""
    if isinstance(spec, dict):
        try:
            r_min, r_max, count = float(spec["r_min"]), float(spec["r_max"]), int(spec["count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError("radii spec needs r_min, r_max and count") from exc
        if not 0 < r_min < r_max or count < 2:
            raise ConfigurationError("radii spec must give 0 < r_min < r_max and count >= 2")
        radii = np.geomspace(r_min, r_max, count).tolist()
    elif isinstance(spec, (list, tuple)):
        radii = sorted(float(r) for r in spec)
    else:
        raise ConfigurationError("radii must be a list or a geometric spec")
    if len(radii) < 2 or radii[0] <= 0 or len(set(radii)) != len(radii):
        raise ConfigurationError("radii must contain at least two distinct positive values")
    return radii


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def meta(subcommand: str, config: dict) -> dict:
    return {"tool": "loglab", "version": __version__, "subcommand": subcommand, "config": _to_jsonable(config)}


def meta_line(subcommand: str, config: dict) -> str:
    return json.dumps(meta(subcommand, config), sort_keys=True, separators=(",", ":"))


def write_json(path: Path, subcommand: str, config: dict, payload: dict) -> None:
    data = {"meta": meta(subcommand, config), **_to_jsonable(payload)}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def with_comment(subcommand: str, config: dict, csv_text: str) -> str:
    return f"# {meta_line(subcommand, config)}\n" + csv_text


# ---------------------------------------------------------------------------
# Field sources
# ---------------------------------------------------------------------------


def load_field(spec: Any, tol_scale: float = 1.0):
    """A field from ``{"path": ...}``, ``{"synthetic": {...}}`` or ``{"solve": {...}}``."""
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigurationError("field must be one of {'path': ...}, {'synthetic': ...}, {'solve': ...}")
    (kind, value), = spec.items()
    if kind == "path":
        return read_fld1(value)
    if kind == "solve":
        cfg = SolveConfig.from_dict(dict(value))
        cfg.tol *= tol_scale
        return minimize(cfg).field
    if kind == "synthetic":
        return synthetic_field(value)
    raise ConfigurationError(f"unknown field source {kind!r}")


def synthetic_field(spec: dict):
    try:
        kind = spec["kind"]
        if kind == "quadratic":
            return quadratic_profile(np.asarray(spec["A"], dtype=float), spec.get("center"))
        if kind == "halfspace":
            return halfspace_profile(np.asarray(spec["nu"], dtype=float), spec.get("center"))
        if kind == "planar":
            return PlanarLogSolution(tuple(float(v) for v in spec["e"]))
        if kind == "radial_log":
            center = spec.get("center")
            return RadialLogSolution(float(spec["u0"]), int(spec.get("d", 2)), None if center is None else tuple(center))
        if kind == "classical_radial":
            return ClassicalRadialSolution(float(spec.get("a", 0.5)), tuple(spec.get("center", (0.0, 0.0))))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad synthetic field spec: {exc}") from exc
    raise ConfigurationError(f"unknown synthetic field kind {spec.get('kind')!r}")


def _require(config: dict, *keys: str) -> None:
    missing = [k for k in keys if k not in config]
    if missing:
        raise ConfigurationError(f"config is missing {missing}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_solve(config: dict, out: Path, args) -> int:
    solver_cfg = dict(config["solver"]) if "solver" in config else {k: v for k, v in config.items() if k != "center"}
    if args.seed is not None:
        solver_cfg["seed"] = args.seed
    cfg = SolveConfig.from_dict(solver_cfg)
    cfg.tol *= args.tol_scale
    report = minimize(cfg)
    resolved = {"solver": cfg.to_dict(), "tol_scale": args.tol_scale}
    field = report.field
    fb = extract_free_boundary(field, report.threshold)
    center = np.asarray(config.get("center", cfg.ball_center))
    fb_summary: dict[str, Any] = {"count": int(len(fb)), "center": center.tolist(), "h": field.h}
    if len(fb):
        dist = np.linalg.norm(fb - center, axis=1)
        fb_summary.update(radius_mean=float(dist.mean()), radius_min=float(dist.min()), radius_max=float(dist.max()))
    write_fld1(field, out / "field.fld1", comments=[meta_line("solve", resolved)])
    write_json(out / "solve_report.json", "solve", resolved, {"report": report.to_dict(), "free_boundary": fb_summary})
    if not report.converged:
        log.warning("solver stopped before reaching the tolerance")
    return EXIT_OK


def cmd_weiss(config: dict, out: Path, args) -> int:
    _require(config, "field", "x0", "radii")
    u = load_field(config["field"], args.tol_scale)
    radii = resolve_radii(config["radii"])
    table = corrected_excess_table(u, config["x0"], radii, config.get("limit"), bool(config.get("include_tail", True)))
    resolved = dict(config, radii=radii, tol_scale=args.tol_scale)
    comments = [meta_line("weiss", resolved), f"tail={table.tail!r} envelope_C={table.envelope_C!r} limit={table.limit!r}"]
    comments += table.notes
    table.write_csv(out / "energy_table.csv", comments)
    return EXIT_OK


def cmd_blowup(config: dict, out: Path, args) -> int:
    _require(config, "field", "x0", "radii")
    u = load_field(config["field"], args.tol_scale)
    radii = resolve_radii(config["radii"])
    record = estimate_blowup(u, config["x0"], radii, L=config.get("L"))
    resolved = dict(config, radii=radii, tol_scale=args.tol_scale)
    write_json(out / "blowup.json", "blowup", resolved, {"record": record.to_dict()})
    write_text(out / "blowup_traces.csv", with_comment("blowup", resolved, record.traces_csv()))
    return EXIT_OK


def cmd_epi(config: dict, out: Path, args) -> int:
    tol = 1e-10 * args.tol_scale
    eps = float(config.get("eps", 0.05))
    delta = float(config.get("delta", 0.05))
    if "trace" in config:
        trace = read_trace_json(config["trace"])
        s = float(config.get("s", 1e-3))
        report = check_inequality(trace, s, eps, None, delta, float(config.get("c4", 1.0)), tol)
        resolved = dict(config, eps=eps, delta=delta, s=s, tol=tol)
        write_json(out / "epi_report.json", "epi", resolved, {"report": report.to_dict()})
        return EXIT_OK
    seed = int(args.seed if args.seed is not None else config.get("seed", 0))
    scales = [float(s) for s in config.get("scales", [1e-2, 1e-3, 1e-4])]
    dims = config.get("dims", [config.get("d", 2)])
    n = int(config.get("n", 200))
    summaries, failures, rows = [], [], []
    header = None
    for d in dims:
        res = sweep(int(d), n, scales, delta, eps, seed, config.get("c4"), args.jobs, tol)
        summaries.append(res.summary())
        failures += [{"d": int(d), "trace_id": i, "report": r.to_dict()} for i, r in res.failures()]
        lines = res.to_csv().splitlines()
        header = lines[0]
        rows += [f"{d},{ln}" for ln in lines[1:]] if len(dims) > 1 else lines[1:]
    if len(dims) > 1:
        header = "d," + header
    resolved = dict(config, seed=seed, scales=scales, dims=dims, n=n, eps=eps, delta=delta, tol=tol)
    write_text(out / "epi_sweep.csv", with_comment("epi", resolved, "\n".join([header] + rows) + "\n"))
    write_json(out / "epi_report.json", "epi", resolved, {"summaries": summaries, "failures": failures})
    return EXIT_OK


def _read_columns(path: str) -> dict[str, np.ndarray]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise ConfigurationError(f"cannot read table {path}: {exc}") from exc
    rows = list(csv.reader(lines))
    if len(rows) < 2:
        raise ConfigurationError(f"table {path} has no data rows")
    header = rows[0]
    cols: dict[str, np.ndarray] = {}
    for i, name in enumerate(header):
        try:
            cols[name] = np.array([_parse_cell(r[i]) for r in rows[1:]], dtype=float)
        except (ValueError, IndexError):
            continue
    return cols


def _parse_cell(text: str) -> float:
    low = text.strip().lower()
    if low in ("true", "false"):
        return float(low == "true")
    return float(text)


def cmd_decay(config: dict, out: Path, args) -> int:
    resolved = dict(config, tol_scale=args.tol_scale)
    fits = []
    payload: dict[str, Any] = {}
    if "modulus" in config:
        m = config["modulus"]
        _require(m, "points", "forms")
        d = len(m["points"][0])
        rec = singular_modulus(m["points"], m["forms"], float(m.get("gamma", default_gamma(d))), float(m.get("beta", 0.5)))
        payload["modulus"] = rec.to_dict()
    if "blowup" in config:
        b = config["blowup"]
        _require(b, "field", "x0", "radii")
        u = load_field(b["field"], args.tol_scale)
        record = estimate_blowup(u, b["x0"], resolve_radii(b["radii"]), L=b.get("L"))
        fit = blowup_modulus(record, b.get("gamma"))
        fits.append(("blowup_modulus", fit))
        payload["blowup_modulus"] = fit.to_dict()
    series = None
    if "samples" in config:
        series = (np.asarray(config["samples"]["r"], dtype=float), np.asarray(config["samples"]["e"], dtype=float))
    elif "table" in config:
        cols = _read_columns(config["table"])
        x, y = config.get("x", "r"), config.get("y", "excess")
        if x not in cols or y not in cols:
            raise ConfigurationError(f"table lacks columns {x!r} and {y!r}")
        series = (cols[x], cols[y])
    elif "field" in config:
        _require(config, "x0", "radii")
        u = load_field(config["field"], args.tol_scale)
        es = excess_series(u, config["x0"], resolve_radii(config["radii"]), config.get("limit"), bool(config.get("override", False)))
        series = (es.radii, es.excess)
        payload["series"] = es.to_dict()
    if series is not None:
        r, e = series
        model = config.get("model", "auto")
        gamma = config.get("gamma")
        if model == "auto":
            model = HOLDER if (gamma == 0 or (gamma is None and config.get("d", 3) == 2)) else LOG_POWER
        if model == LOG_POWER:
            g = float(gamma) if gamma is not None else default_gamma(int(config.get("d", 3)))
            fit = fit_log_decay(r, e, g, bool(config.get("fit_r0", True)), float(config.get("r0", 1.0)))
        elif model == HOLDER:
            fit = fit_holder(r, e)
        else:
            raise ConfigurationError(f"unknown decay model {model!r}")
        fits.append(("excess", fit))
        payload["fit"] = fit.to_dict()
    if not payload:
        raise ConfigurationError("decay config needs samples, table, field, blowup or modulus")
    write_json(out / "decay_fit.json", "decay", resolved, payload)
    write_text(out / "fit_summary.csv", with_comment("decay", resolved, fit_summary_csv(fits)))
    return EXIT_OK


def _free_boundary_points(u: ScalarField, max_points: int, margin: float) -> list[list[float]]:
    pts = extract_free_boundary(u)
    keep = [p for p in pts if u.contains_ball(p, margin)]
    if not keep:
        return []
    keep = sorted(map(tuple, keep))
    step = max(1, len(keep) // max_points)
    return [list(p) for p in keep[::step][:max_points]]


def cmd_classify(config: dict, out: Path, args) -> int:
    _require(config, "field", "radii")
    u = load_field(config["field"], args.tol_scale)
    radii = resolve_radii(config["radii"])
    if "points" in config:
        points = [list(map(float, p)) for p in config["points"]]
    elif isinstance(u, ScalarField):
        points = _free_boundary_points(u, int(config.get("max_points", 8)), max(radii))
    else:
        raise ConfigurationError("analytic fields need explicit points")
    labels = []
    for p in points:
        entry: dict[str, Any] = {"x0": p}
        try:
            entry.update(classify_point(u, p, radii).to_dict())
            g = growth_ratio(u, p, radii)
            entry["growth"] = {"ratios": g.ratios, "spread": g.spread}
        except PreconditionError as exc:
            entry.update(label="Rejected", reason=str(exc))
        labels.append(entry)
    resolved = dict(config, radii=radii, points=points, tol_scale=args.tol_scale)
    write_json(out / "labels.json", "classify", resolved, {"labels": labels})
    return EXIT_OK


# ---------------------------------------------------------------------------
# SVG plots
# ---------------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b")


def _axis_map(values: np.ndarray, log_scale: bool, lo_px: float, hi_px: float) -> tuple[Callable, float, float]:
    v = np.log10(values) if log_scale else values
    vmin, vmax = float(np.min(v)), float(np.max(v))
    if vmax == vmin:
        vmin, vmax = vmin - 0.5, vmax + 0.5
    scale = (hi_px - lo_px) / (vmax - vmin)

    def to_px(x):
        x = np.log10(x) if log_scale else np.asarray(x, dtype=float)
        return lo_px + (x - vmin) * scale

    return to_px, vmin, vmax


def _ticks(vmin: float, vmax: float, count: int = 5) -> np.ndarray:
    return np.linspace(vmin, vmax, count)


def plot_svg(
    columns: dict[str, np.ndarray],
    x: str,
    ys: Sequence[str],
    logx: bool = False,
    logy: bool = False,
    title: str = "",
    width: int = 640,
    height: int = 420,
) -> str:
    """Line plot of ``ys`` against ``x`` as a standalone SVG document, one polyline per column."""
    if x not in columns:
        raise ConfigurationError(f"no column {x!r}")
    missing = [y for y in ys if y not in columns]
    if missing or not ys:
        raise ConfigurationError(f"missing y columns {missing or 'none given'}")
    xv = columns[x]
    yv = np.concatenate([columns[y] for y in ys])
    ok_x = np.isfinite(xv) & ((xv > 0) if logx else True)
    ok_y = np.isfinite(yv) & ((yv > 0) if logy else True)
    if not ok_x.any() or not ok_y.any():
        raise ConfigurationError("no plottable values (log axes need positive data)")
    left, right, top, bottom = 70.0, width - 20.0, 40.0, height - 50.0
    fx, x0, x1 = _axis_map(xv[ok_x], logx, left, right)
    fy, y0, y1 = _axis_map(yv[ok_y], logy, bottom, top)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{_esc(title)}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{left}" y2="{top}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        px = left + (t - x0) / (x1 - x0) * (right - left)
        label = f"1e{t:.2g}" if logx else f"{t:.3g}"
        parts.append(f'<text x="{px:.2f}" y="{bottom + 18:.2f}" text-anchor="middle" font-family="sans-serif" font-size="10">{label}</text>')
    for t in _ticks(y0, y1):
        py = bottom + (t - y0) / (y1 - y0) * (top - bottom)
        label = f"1e{t:.2g}" if logy else f"{t:.3g}"
        parts.append(f'<text x="{left - 6:.2f}" y="{py + 3:.2f}" text-anchor="end" font-family="sans-serif" font-size="10">{label}</text>')
    parts.append(f'<text x="{(left + right) / 2:.1f}" y="{height - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{_esc(x)}</text>')
    for k, y in enumerate(ys):
        col = columns[y]
        ok = ok_x & np.isfinite(col) & ((col > 0) if logy else True)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(fx(xv[ok]), fy(col[ok])))
        color = PALETTE[k % len(PALETTE)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"><title>{_esc(y)}</title></polyline>')
        parts.append(f'<text x="{right - 4:.1f}" y="{top + 14 * (k + 1):.1f}" text-anchor="end" fill="{color}" font-family="sans-serif" font-size="11">{_esc(y)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(text: str) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def cmd_plot(config: dict, out: Path, args) -> int:
    cfg = dict(config)
    for key in ("csv", "x", "title"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    if args.y:
        cfg["y"] = args.y
    if args.logx:
        cfg["logx"] = True
    if args.logy:
        cfg["logy"] = True
    _require(cfg, "csv", "y")
    cols = _read_columns(cfg["csv"])
    ys = [cfg["y"]] if isinstance(cfg["y"], str) else list(cfg["y"])
    svg = plot_svg(cols, cfg.get("x", "r"), ys, bool(cfg.get("logx", False)), bool(cfg.get("logy", False)), cfg.get("title", ""))
    svg = svg.replace("<svg ", f"<!-- {_esc(meta_line('plot', cfg)).replace('--', '- -')} -->\n<svg ", 1)
    write_text(out / cfg.get("name", "plot.svg"), svg)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "weiss": cmd_weiss,
    "blowup": cmd_blowup,
    "epi": cmd_epi,
    "decay": cmd_decay,
    "classify": cmd_classify,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loglab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"loglab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "plot":
            p.add_argument("csv", nargs="?", help="CSV table (lines starting with # are skipped)")
            p.add_argument("--x")
            p.add_argument("--y", action="append", help="y column; repeat for several")
            p.add_argument("--logx", action="store_true")
            p.add_argument("--logy", action="store_true")
            p.add_argument("--title")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        if args.jobs < 1:
            raise ConfigurationError("--jobs must be at least 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigurationError("--seed must be an unsigned 64-bit integer")
        args.tol_scale = tolerance_scale()
        config = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](config, out, args)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        try:
            out.mkdir(parents=True, exist_ok=True)
            diag = {"error": str(exc), "iteration": exc.iteration, "subcommand": args.command, "version": __version__}
            write_text(out / "failure.json", json.dumps(diag, indent=1, sort_keys=True) + "\n")
        except OSError:
            pass
        return EXIT_NUMERICAL
    except (PreconditionError, InsufficientDataError) as exc:
        print(f"precondition rejected: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
