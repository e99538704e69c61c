"""Command-line front end.

Usage::

    ringfilm {stationary,transient,compare,cycle,sweep} --config FILE --out DIR
             [--threads N] [--override section.key=value ...]

Exit status is 0 when the run completes, 2 when blow-by ends a full cycle and
1 on any error. A ``manifest.json`` holding the resolved configuration is
written before the computation starts.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, dump_config, parse_config, to_mapping
from .diagnostics import TimeSeriesRecord
from .exceptions import RingFilmError
from .geometry import Grid
from . import scenarios

TIMESERIES_HEADER = ("t", "Z", "V", "W_h", "W_con", "W_cc", "friction_N_per_m", "mft",
                     "blow_by_distance", "iterations", "converged")

SUBCOMMANDS = {
    "stationary": "stationary_1d",
    "transient": "textured_transient",
    "compare": "model_compare",
    "cycle": "full_cycle",
    "sweep": "wear_sweep",
}

EXIT_OK, EXIT_ERROR, EXIT_BLOW_BY = 0, 1, 2


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def _row(r: TimeSeriesRecord):
    return [_fmt(v) for v in (r.t, r.Z, r.V, r.W_h, r.W_con, r.W_cc, r.friction_SI, r.mft,
                              r.blow_by_distance, r.iterations, r.converged)]


class TimeseriesWriter:
    """Streams records to CSV, one row per accepted step."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(TIMESERIES_HEADER)
        self._fh.flush()
        self.rows = 0

    def __call__(self, record: TimeSeriesRecord):
        self._w.writerow(_row(record))
        self._fh.flush()
        self.rows += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_timeseries(records, path) -> int:
    """Write ``records`` as CSV with 12 significant digits; returns the row count."""
    with TimeseriesWriter(path) as w:
        for r in records:
            w(r)
        return w.rows


def read_timeseries(path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True, ndmin=1)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def write_field_snapshot(p, theta, h, grid: Grid, path, t: float) -> None:
    """Plain-text snapshot: a header line, then p, theta and h blocks.

    Each block has ``n_x2`` rows of ``n_x1`` values (row ``j`` is the line
    ``x2 = x2_j``); blocks are separated by a blank line.
    """
    blocks = []
    for f in (p, theta, h):
        a = np.asarray(f, dtype=float).reshape(grid.shape)
        blocks.append("\n".join(" ".join(f"{v:.12g}" for v in a[:, j]) for j in range(grid.n_x2)))
    header = (f"# t={t:.12g} N_x1={grid.n_x1} N_x2={grid.n_x2} "
              f"Lx1={grid.length_x1:.12g} Lx2={grid.length_x2:.12g}")
    Path(path).write_text(header + "\n" + "\n\n".join(blocks) + "\n")


def read_field_snapshot(path):
    """Inverse of :func:`write_field_snapshot`: ``(t, grid, p, theta, h)``."""
    lines = Path(path).read_text().splitlines()
    meta = dict(item.split("=", 1) for item in lines[0].lstrip("#").split())
    n1, n2 = int(meta["N_x1"]), int(meta["N_x2"])
    grid = Grid(n1, n2, float(meta["Lx1"]), float(meta["Lx2"]))
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != 3 * n2:
        raise ValueError(f"expected {3 * n2} data rows, found {len(rows)}")
    arr = np.array([[float(v) for v in ln.split()] for ln in rows])
    p, theta, h = (arr[k * n2:(k + 1) * n2].T.copy() for k in range(3))
    return float(meta["t"]), grid, p, theta, h


@dataclass
class RunManifest:
    config_path: str
    config: ScenarioConfig
    out_dir: str
    version: str = __version__
    timings: dict[str, float] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    result: dict = field(default_factory=dict)

    def write(self, path):
        doc = {
            "config_path": self.config_path,
            "config": to_mapping(self.config),
            "out_dir": self.out_dir,
            "version": self.version,
            "timings": self.timings,
            "outputs": self.outputs,
            "result": self.result,
        }
        Path(path).write_text(json.dumps(doc, indent=2, default=str))


def _snap_name(prefix: str, t: float) -> str:
    return f"{prefix}snapshot_t{t:.6g}.txt"


def _write_snapshots(run, out: Path, manifest: RunManifest, prefix: str = ""):
    for t, s in sorted(run.snapshots.items()):
        name = _snap_name(prefix, t)
        write_field_snapshot(s.p, s.theta, s.h, run.grid, out / name, s.t)
        manifest.outputs.append(name)


def _run_stationary(cfg, out: Path, manifest: RunManifest, threads) -> int:
    res = scenarios.run_stationary_1d(cfg)
    grid = cfg.grid()
    rows = []
    for case in res.cases:
        name = f"stationary_p{case.p_cc_atm:g}atm.txt"
        h = np.broadcast_to(build_gap(cfg), grid.shape)
        write_field_snapshot(case.fields.p, case.fields.theta, h, grid, out / name, 0.0)
        manifest.outputs.append(name)
        rows.append({"p_cc_atm": case.p_cc_atm, "converged": case.converged,
                     "reason": case.reason, "steps": case.steps, "rupture_x1": case.rupture_x1})
    manifest.result["cases"] = rows
    if res.seal_limit is not None:
        manifest.result["seal_limit_atm"] = res.seal_limit.p_cc_atm
        manifest.result["seal_bracket_atm"] = list(res.seal_limit.bracket)
        manifest.result["seal_rupture_x1"] = res.seal_limit.outcome.rupture_x1
    return EXIT_OK


def build_gap(cfg: ScenarioConfig):
    return scenarios.build_solver(cfg).gap_at(cfg.dynamics.Z0)


def _run_transient(cfg, out: Path, manifest: RunManifest, threads) -> int:
    study = cfg.transient.study
    if study == "single":
        name = cfg.output.timeseries
        manifest.outputs.append(name)
        with TimeseriesWriter(out / name) as w:
            run = scenarios.run_textured_transient(cfg, on_record=w)
        _write_snapshots(run, out, manifest)
        manifest.result["steps"] = len(run.records)
    elif study == "time_convergence":
        tc = scenarios.time_convergence_study(cfg)
        for dt, run in tc.runs.items():
            name = f"timeseries_dt{dt:g}.csv"
            write_timeseries(run.records, out / name)
            manifest.outputs.append(name)
        manifest.result.update({
            "dt": list(tc.dts), "friction_diff": tc.friction_diff.tolist(),
            "mft_diff": tc.mft_diff.tolist(), "friction_order": tc.friction_order,
            "mft_order": tc.mft_order,
        })
    else:
        mc = scenarios.mesh_convergence_study(cfg)
        for n, x, prof in zip(mc.n_x1, mc.x1, mc.profiles):
            name = f"centerline_n{n}.csv"
            np.savetxt(out / name, np.column_stack([x, prof]), delimiter=",",
                       header="x1,p", comments="", fmt="%.12g")
            manifest.outputs.append(name)
        manifest.result["sup_diffs"] = mc.sup_diffs.tolist()
    return EXIT_OK


def _run_compare(cfg, out: Path, manifest: RunManifest, threads) -> int:
    cmp_ = scenarios.run_model_compare(cfg)
    for model, run in cmp_.runs.items():
        name = f"timeseries_{model}.csv"
        write_timeseries(run.records, out / name)
        manifest.outputs.append(name)
        _write_snapshots(run, out, manifest, prefix=f"{model}_")
    manifest.result.update({
        "mean_friction_N_per_m": cmp_.mean_friction,
        "friction_rel_diff": cmp_.friction_rel_diff,
        "friction_l1_diff": cmp_.friction_l1_diff,
        "mft_at": {m: {str(t): v for t, v in d.items()} for m, d in cmp_.mft_at.items()},
    })
    return EXIT_OK


def _run_cycle(cfg, out: Path, manifest: RunManifest, threads) -> int:
    name = cfg.output.timeseries
    manifest.outputs.append(name)
    with TimeseriesWriter(out / name) as w:
        run = scenarios.run_full_cycle(cfg, on_record=w)
    _write_snapshots(run, out, manifest)
    manifest.result.update({
        "verdict": run.verdict, "t_fail": run.t_fail, "failure": run.failure,
        "criterion_t": run.criterion_t, "steps": len(run.records),
    })
    return EXIT_OK if run.completed else EXIT_BLOW_BY


def _run_sweep(cfg, out: Path, manifest: RunManifest, threads) -> int:
    res = scenarios.run_wear_sweep(cfg, threads=threads)
    name = "sweep.csv"
    with open(out / name, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta_h", "delta", "verdict", "t_fail", "criterion_t", "min_distance",
                    "steps"])
        for e in res.entries:
            w.writerow([_fmt(e.delta_h), _fmt(e.delta), e.verdict,
                        "" if e.t_fail is None else _fmt(e.t_fail),
                        "" if e.criterion_t is None else _fmt(e.criterion_t),
                        _fmt(e.min_distance), e.steps])
    manifest.outputs.append(name)
    manifest.result["delta_max"] = {str(k): v for k, v in res.delta_max().items()}
    manifest.result["monotone"] = {str(k): v for k, v in res.monotone().items()}
    return EXIT_OK


RUNNERS = {
    "stationary_1d": _run_stationary,
    "textured_transient": _run_transient,
    "model_compare": _run_compare,
    "full_cycle": _run_cycle,
    "wear_sweep": _run_sweep,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise RingFilmError(f"usage error: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ringfilm", description="Piston-ring lubrication scenarios")
    ap.add_argument("command", choices=sorted(SUBCOMMANDS))
    ap.add_argument("--config", required=True, help="sectioned key=value configuration file")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    ap.add_argument("--version", action="version", version=__version__)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        kind = SUBCOMMANDS[args.command]
        cfg = parse_config(args.config, overrides=args.override, default_kind=kind)
        if cfg.kind != kind:
            raise RingFilmError(
                f"usage error: config kind {cfg.kind!r} does not match subcommand {args.command!r}"
            )
        if args.threads < 1:
            raise RingFilmError("--threads must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(str(args.config), cfg, str(out))
        (out / "config.resolved.ini").write_text(dump_config(cfg))
        manifest.outputs.append("config.resolved.ini")
        manifest.write(out / "manifest.json")
        t0 = time.perf_counter()
        try:
            code = RUNNERS[kind](cfg, out, manifest, args.threads)
        finally:
            manifest.timings["run_seconds"] = time.perf_counter() - t0
            manifest.write(out / "manifest.json")
        return code
    except (RingFilmError, OSError) as exc:
        print(f"ringfilm: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
