"""Command line entry point: ``rgflow run|validate|sweep``.

Configs are INI files with sections ``[domain]``, ``[initial]``, ``[flow]``,
``[output]`` and, for sweeps, ``[sweep]``; unknown sections or keys are
rejected. Exit codes: 0 success, 1 failed validation, 2 configuration error,
3 the run left the ``M+`` cone (partial output is written), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import itertools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curvature import FlowParams
from .flow import Termination, run
from .initial import ANSATZE, initial_field
from .surface import build_sphere, build_torus
from .validation import parallelism_cap, report_dict, run_battery, trajectory_checks

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_CONE = 3
EXIT_NUMERICAL = 4

CSV_COLUMNS = ("t", "volume", "r", "min_R", "max_R", "entropy_N", "max_Q", "residual_R", "msq_integral")

_KEYS = {
    "domain": {"kind", "n", "n_x", "n_y", "l_x", "l_y", "subdivisions", "radius", "dealias"},
    "initial": {"ansatz", "amplitude", "kx", "ky", "center", "width", "height", "path"},
    "flow": {"alpha_prime", "t_end", "dt_safety", "sample_stride", "residual_check_stride", "entropy_floor"},
    "output": {"dir", "plots", "snapshots", "seed"},
    "sweep": {"alpha_prime", "amplitude"},
}


class ConfigError(ValueError):
    pass


@dataclass
class DomainSpec:
    kind: str = "torus"
    n_x: int = 64
    n_y: int = 64
    l_x: float = 2 * math.pi
    l_y: float = 2 * math.pi
    subdivisions: int = 4
    radius: float = 1.0
    dealias: bool = False

    def build(self):
        if self.kind == "torus":
            return build_torus(self.n_x, self.n_y, self.l_x, self.l_y, dealias=self.dealias)
        return build_sphere(self.subdivisions, self.radius)


@dataclass
class RunConfig:
    domain: DomainSpec = field(default_factory=DomainSpec)
    ansatz: str = "flat"
    ansatz_args: dict = field(default_factory=dict)
    alpha_prime: float = 0.0
    t_end: float = 1.0
    dt_safety: float = 0.9
    sample_stride: int = 50
    residual_check_stride: int = 1
    entropy_floor: float = 1e-8
    out_dir: str = "out"
    plots: bool = True
    snapshots: bool = True
    seed: int = 0
    sweep: dict = field(default_factory=dict)

    def params(self):
        return FlowParams(
            alpha_prime=self.alpha_prime,
            dt_safety=self.dt_safety,
            t_end=self.t_end,
            sample_stride=self.sample_stride,
            residual_check_stride=self.residual_check_stride,
            entropy_floor=self.entropy_floor,
        )

    def echo(self):
        d = dataclasses.asdict(self)
        d["ansatz_args"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.ansatz_args.items()}
        return d


def _num(section, key, raw, kind=float):
    try:
        val = kind(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {kind.__name__}") from None
    if kind is float and not math.isfinite(val):
        raise ConfigError(f"[{section}] {key}: must be finite")
    return val


def _bool(section, key, raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def _floats(section, key, raw):
    items = [x for x in raw.replace(",", " ").split() if x]
    if not items:
        raise ConfigError(f"[{section}] {key}: empty list")
    return [_num(section, key, x) for x in items]


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def parse_config(text):
    """Parse and range-check a run configuration.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, and out-of-range values.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for sec in cp.sections():
        if sec not in _KEYS:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp[sec]) - _KEYS[sec]
        if extra:
            raise ConfigError(f"[{sec}]: unknown keys {sorted(extra)}")

    cfg = RunConfig()
    if cp.has_section("domain"):
        s = cp["domain"]
        dom = cfg.domain
        dom.kind = s.get("kind", dom.kind).strip()
        _require(dom.kind in ("torus", "sphere"), f"[domain] kind: expected torus or sphere, got {dom.kind!r}")
        n = _num("domain", "n", s["n"], int) if "n" in s else None
        dom.n_x = _num("domain", "n_x", s["n_x"], int) if "n_x" in s else (n or dom.n_x)
        dom.n_y = _num("domain", "n_y", s["n_y"], int) if "n_y" in s else (n or dom.n_y)
        dom.l_x = _num("domain", "l_x", s["l_x"]) if "l_x" in s else dom.l_x
        dom.l_y = _num("domain", "l_y", s["l_y"]) if "l_y" in s else dom.l_y
        dom.subdivisions = _num("domain", "subdivisions", s["subdivisions"], int) if "subdivisions" in s else dom.subdivisions
        dom.radius = _num("domain", "radius", s["radius"]) if "radius" in s else dom.radius
        dom.dealias = _bool("domain", "dealias", s["dealias"]) if "dealias" in s else dom.dealias
    dom = cfg.domain
    for key in ("n_x", "n_y"):
        v = getattr(dom, key)
        _require(v >= 8 and v % 2 == 0, f"[domain] {key}: must be an even integer >= 8")
    _require(dom.l_x > 0 and dom.l_y > 0, "[domain] l_x, l_y: must be positive")
    _require(0 <= dom.subdivisions <= 8, "[domain] subdivisions: must lie in 0..8")
    _require(dom.radius > 0, "[domain] radius: must be positive")

    if cp.has_section("initial"):
        s = cp["initial"]
        cfg.ansatz = s.get("ansatz", "flat").strip()
        _require(cfg.ansatz in ANSATZE, f"[initial] ansatz: expected one of {ANSATZE}")
        allowed = {
            "flat": set(),
            "sinusoid": {"amplitude", "kx", "ky"},
            "bump": {"center", "width", "height"},
            "file": {"path"},
        }[cfg.ansatz]
        stray = set(s) - allowed - {"ansatz"}
        _require(not stray, f"[initial] keys {sorted(stray)} do not apply to ansatz {cfg.ansatz!r}")
        args = {}
        for key in ("amplitude", "width", "height"):
            if key in s:
                args[key] = _num("initial", key, s[key])
        for key in ("kx", "ky"):
            if key in s:
                args[key] = _num("initial", key, s[key], int)
                _require(args[key] >= 0, f"[initial] {key}: must be nonnegative")
        if "center" in s:
            args["center"] = tuple(_floats("initial", "center", s["center"]))
        if "width" in args:
            _require(args["width"] > 0, "[initial] width: must be positive")
        if cfg.ansatz == "file":
            _require("path" in s, "[initial] path: required for ansatz = file")
            args["path"] = s["path"].strip()
        cfg.ansatz_args = args

    if cp.has_section("flow"):
        s = cp["flow"]
        for key in ("alpha_prime", "t_end", "dt_safety", "entropy_floor"):
            if key in s:
                setattr(cfg, key, _num("flow", key, s[key]))
        for key in ("sample_stride", "residual_check_stride"):
            if key in s:
                setattr(cfg, key, _num("flow", key, s[key], int))
    try:
        cfg.params()
    except ValueError as exc:
        raise ConfigError(f"[flow] {exc}") from None

    if cp.has_section("output"):
        s = cp["output"]
        cfg.out_dir = s.get("dir", cfg.out_dir).strip()
        if "plots" in s:
            cfg.plots = _bool("output", "plots", s["plots"])
        if "snapshots" in s:
            cfg.snapshots = _bool("output", "snapshots", s["snapshots"])
        if "seed" in s:
            cfg.seed = _num("output", "seed", s["seed"], int)

    if cp.has_section("sweep"):
        s = cp["sweep"]
        cfg.sweep = {k: _floats("sweep", k, s[k]) for k in s}
        _require(all(a >= 0 for a in cfg.sweep.get("alpha_prime", [])), "[sweep] alpha_prime: values must be >= 0")
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


# --- outputs ------------------------------------------------------------------


def _cell(v):
    return "" if v is None or (isinstance(v, float) and not math.isfinite(v)) else repr(float(v))


def write_diagnostics_csv(path, trajectory):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for s in trajectory.samples:
            d = s.diagnostics
            w.writerow([_cell(getattr(d, c)) for c in CSV_COLUMNS])


def write_snapshot(directory, index, state, kind):
    """Write ``sample_NNNNN.bin`` (little-endian float64) and its text header."""
    stem = Path(directory) / f"sample_{index:05d}"
    np.asarray(state.u, dtype="<f8").tofile(stem.with_suffix(".bin"))
    stem.with_suffix(".hdr").write_text(f"node_count = {state.u.size}\nkind = {kind}\ntime = {state.t!r}\n")


def read_snapshot(stem):
    """Inverse of :func:`write_snapshot`; returns ``(u, header dict)``."""
    stem = Path(stem)
    header = {}
    for line in stem.with_suffix(".hdr").read_text().splitlines():
        k, _, v = line.partition("=")
        header[k.strip()] = v.strip()
    u = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
    if u.size != int(header["node_count"]):
        raise ValueError(f"{stem}: header says {header['node_count']} nodes, file has {u.size}")
    return u, header


def svg_plot(path, title, xs, series):
    """Line plot in a fixed 800x600 viewBox; ``series`` maps label to y values.

    ``None``/NaN values break the polyline.
    """
    W, H, m = 800, 600, 60
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    xs = np.asarray(xs, dtype=float)
    ys_all = [np.array([np.nan if v is None else v for v in ys], dtype=float) for ys in series.values()]
    finite = np.concatenate([y[np.isfinite(y)] for y in ys_all]) if ys_all else np.array([])
    x0, x1 = (xs.min(), xs.max()) if xs.size else (0.0, 1.0)
    y0, y1 = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        pad = abs(y0) * 1e-3 or 1.0
        y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return m + (x - x0) / (x1 - x0) * (W - 2 * m)

    def py(y):
        return H - m - (y - y0) / (y1 - y0) * (H - 2 * m)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}">',
        f'<rect x="{m}" y="{m}" width="{W - 2 * m}" height="{H - 2 * m}" fill="none" stroke="black"/>',
        f'<text x="{W / 2}" y="{m / 2}" text-anchor="middle" font-size="18">{title}</text>',
        f'<text x="{m}" y="{H - m / 3}" font-size="12">t = {x0:.4g}</text>',
        f'<text x="{W - m}" y="{H - m / 3}" text-anchor="end" font-size="12">t = {x1:.4g}</text>',
        f'<text x="{m - 5}" y="{H - m}" text-anchor="end" font-size="12">{y0:.4g}</text>',
        f'<text x="{m - 5}" y="{m + 12}" text-anchor="end" font-size="12">{y1:.4g}</text>',
    ]
    for i, (label, ys) in enumerate(zip(series, ys_all)):
        color = colors[i % len(colors)]
        run_pts = []
        for x, y in itertools.chain(zip(xs, ys), [(np.nan, np.nan)]):
            if np.isfinite(y):
                run_pts.append(f"{px(x):.2f},{py(y):.2f}")
                continue
            if run_pts:
                parts.append(f'<polyline fill="none" stroke="{color}" points="{" ".join(run_pts)}"/>')
            run_pts = []
        parts.append(f'<text x="{W - m - 5}" y="{m + 18 * (i + 1)}" text-anchor="end" fill="{color}" font-size="14">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def write_plots(directory, trajectory):
    t = trajectory.times
    d = [s.diagnostics for s in trajectory.samples]
    svg_plot(Path(directory) / "R_extrema.svg", "scalar curvature extrema", t,
             {"min R": [x.min_R for x in d], "max R": [x.max_R for x in d]})
    svg_plot(Path(directory) / "volume.svg", "volume", t, {"Vol": [x.volume for x in d]})
    svg_plot(Path(directory) / "entropy.svg", "entropy N", t, {"N": [x.entropy_N for x in d]})
    svg_plot(Path(directory) / "max_Q.svg", "max Harnack Q", t, {"max Q": [x.max_Q for x in d]})


# --- commands -----------------------------------------------------------------


def _log(quiet, msg):
    if not quiet:
        print(msg, file=sys.stderr)


def execute(cfg, out_dir, quiet=True):
    """Run one configuration and write every output; returns the exit code."""
    started = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        domain = cfg.domain.build()
        u0 = initial_field(domain, cfg.ansatz, **cfg.ansatz_args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    params = cfg.params()

    def progress(sample):
        d = sample.diagnostics
        _log(quiet, f"t = {d.t:.4f}  vol = {d.volume:.6g}  R in [{d.min_R:.4g}, {d.max_R:.4g}]")

    error = None
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            traj = run(domain, u0, params, progress=progress)
    except (FloatingPointError, RuntimeError, ArithmeticError) as exc:
        error = exc
        traj = None

    summary = {"config": cfg.echo()}
    if traj is None:
        summary.update(termination="NumericalFailure", error=str(error), final_diagnostics=None, battery=[])
        code = EXIT_NUMERICAL
    else:
        write_diagnostics_csv(out / "diagnostics.csv", traj)
        if cfg.snapshots and traj.samples:
            snap = out / "snapshots"
            snap.mkdir(exist_ok=True)
            for i, s in enumerate(traj.samples):
                write_snapshot(snap, i, s.state, domain.kind.value)
        if cfg.plots and traj.samples:
            write_plots(out, traj)
        battery = []
        if len(traj.samples) >= 2:
            battery = [c.to_dict() for c in trajectory_checks(domain, traj, params)]
        summary.update(
            termination=traj.termination.value,
            failure_time=traj.failure_time,
            final_diagnostics=dataclasses.asdict(traj.samples[-1].diagnostics) if traj.samples else None,
            battery=battery,
        )
        code = {
            Termination.COMPLETED: EXIT_OK,
            Termination.CONE_EXIT: EXIT_CONE,
            Termination.STEP_UNDERFLOW: EXIT_NUMERICAL,
        }[traj.termination]
    summary["wall_time_s"] = time.perf_counter() - started
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    _log(quiet, f"{summary['termination']} -> {out}")
    return code


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def cmd_run(config_path, out=None, quiet=False, stride=None):
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if stride is not None:
        cfg.sample_stride = stride
    return execute(cfg, out or cfg.out_dir, quiet=quiet)


def cmd_validate(out=None, quiet=False):
    results = run_battery()
    report = report_dict(results)
    text = json.dumps(report, indent=2) + "\n"
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "validation.json").write_text(text)
    if not quiet:
        for group, checks in results.items():
            for c in checks:
                print(f"{c.status.value:8s} {group}/{c.name}  measured={c.measured:.3e}  threshold={c.threshold:.3e}")
        print(json.dumps(report["counts"]))
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _sweep_cell(job):
    cfg, out_dir = job
    return str(out_dir), execute(cfg, out_dir, quiet=True)


def sweep_cells(cfg, out_dir):
    """Cartesian product of the ``[sweep]`` lists; one output directory per cell."""
    alphas = cfg.sweep.get("alpha_prime", [cfg.alpha_prime])
    amps = cfg.sweep.get("amplitude", [cfg.ansatz_args.get("amplitude")])
    if "amplitude" in cfg.sweep and cfg.ansatz not in ("sinusoid", "bump"):
        raise ConfigError("[sweep] amplitude needs a sinusoid or bump ansatz")
    jobs = []
    for ap, amp in itertools.product(alphas, amps):
        cell = dataclasses.replace(cfg, alpha_prime=ap, ansatz_args=dict(cfg.ansatz_args), sweep={})
        name = f"alpha_{ap:g}"
        if amp is not None:
            cell.ansatz_args["height" if cfg.ansatz == "bump" else "amplitude"] = amp
            name += f"_amp_{amp:g}"
        jobs.append((cell, Path(out_dir) / name))
    return jobs


def cmd_sweep(config_path, out=None, quiet=False, stride=None):
    """Exit 0 if every cell exits 0, else the largest cell exit code."""
    try:
        cfg = load_config(config_path)
        if not cfg.sweep:
            raise ConfigError("sweep needs a [sweep] section")
        if stride is not None:
            cfg.sample_stride = stride
        jobs = sweep_cells(cfg, out or cfg.out_dir)
        workers = min(parallelism_cap(), len(jobs))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if workers <= 1:
        results = list(map(_sweep_cell, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, jobs))
    root = Path(out or cfg.out_dir)
    (root / "sweep.json").write_text(json.dumps({"cells": [{"dir": d, "exit_code": c} for d, c in results]}, indent=2) + "\n")
    for d, c in results:
        _log(quiet, f"{c}  {d}")
    return max((c for _, c in results), default=EXIT_OK)


def build_parser():
    ap = argparse.ArgumentParser(prog="rgflow", description="Second-order renormalization group flow on surfaces.")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    common.add_argument("--stride", metavar="N", type=int, help="integrator steps between samples")
    p = sub.add_parser("run", parents=[common], help="integrate one configuration")
    p.add_argument("config")
    p = sub.add_parser("sweep", parents=[common], help="Cartesian sweep over alpha' and amplitude")
    p.add_argument("config")
    sub.add_parser("validate", parents=[common], help="run the validation battery")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.stride is not None and args.stride < 1:
        print("error: --stride must be a positive integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        return cmd_run(args.config, args.out, args.quiet, args.stride)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.out, args.quiet, args.stride)
    return cmd_validate(args.out, args.quiet)
