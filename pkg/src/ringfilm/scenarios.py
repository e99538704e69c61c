"""Scenario runners built on the coupled solver.

Each runner takes a resolved :class:`~ringfilm.config.ScenarioConfig`:

* :func:`run_stationary_1d` marches 1D problems at fixed ``Z`` to steady state
  and can bisect the largest chamber pressure the ring still seals;
* :func:`run_textured_transient` and the two convergence studies run the
  dimpled strip under a chamber-pressure pulse;
* :func:`run_model_compare` repeats that run with the three cavitation models;
* :func:`run_full_cycle` runs a worn ring through a four-stroke cycle and
  returns a blow-by verdict;
* :func:`run_wear_sweep` runs full cycles over a curvature/wear grid.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cavitation import CAVITY_RIGHT, FieldPair
from .config import ScenarioConfig
from .diagnostics import (
    TimeSeriesRecord,
    blow_by_criterion,
    blow_by_distance,
    friction_relative_difference,
    mass_balance_residual,
    time_average,
)
from .dynamics import CoupledSolver, RingState, ccp_gaussian_pulse
from .exceptions import BlowByChannel, ConfigurationError, NonConvergence
from .geometry import Grid

FAILURES = (NonConvergence, BlowByChannel)


# ---------------------------------------------------------------------------
# shared pieces


def cycle_functions(cfg: ScenarioConfig):
    """``(u(t), p_cc(t))`` as dimensionless callables."""
    c = cfg.cycle
    A = cfg.scales_obj().atm_to_dimensionless(c.A_cc_atm)
    if c.speed_mode == "constant":
        def u_of_t(t):
            return c.speed
    else:
        def u_of_t(t):
            return c.speed * math.sin(2.0 * math.pi * t / c.period)
    if c.pcc_mode == "constant":
        def pcc_of_t(t):
            return A
    else:
        def pcc_of_t(t):
            return float(ccp_gaussian_pulse(t, A, c.t0, c.width))
    return u_of_t, pcc_of_t


def time_step(cfg: ScenarioConfig, grid: Grid, t: float, u: float, windows) -> float:
    """Fixed ``time.dt`` or the CFL rule with Courant windows and the cap."""
    tm = cfg.time
    if tm.dt > 0:
        return tm.dt
    courant = tm.cfl
    for a, b, c in windows:
        if a < t < b:
            courant = c
    dt = courant * grid.dx1 / max(abs(u), tm.u_floor)
    if tm.dt_max > 0:
        dt = min(dt, tm.dt_max)
    return dt


def build_solver(cfg: ScenarioConfig, model: str | None = None) -> CoupledSolver:
    return CoupledSolver(cfg.grid(), cfg.gap_model(), cfg.dynamics_config(), cfg.contact_model(),
                         cfg.solver_settings(), model=model or cfg.scenario.model,
                         copies=cfg.copies, fixed_Z=bool(cfg.dynamics.fixed_Z),
                         scales=cfg.scales_obj())


def profile_along_x1(field_, grid: Grid, x2: float) -> np.ndarray:
    """Values along x1 at ``x2``, linear in x2 between cell centres (periodic)."""
    f = np.asarray(field_, dtype=float)
    if grid.n_x2 == 1:
        return f[:, 0].copy()
    s = x2 / grid.dx2 - 0.5
    j0 = math.floor(s)
    w = s - j0
    a = f[:, j0 % grid.n_x2]
    b = f[:, (j0 + 1) % grid.n_x2]
    return (1.0 - w) * a + w * b


@dataclass
class StepChecks:
    """Worst values of the per-step invariants seen during a run.

    ``complementarity`` is ``max |(p - T)(1 - theta)| / max(1, p_cc)`` and
    ``p_minus_T`` the smallest ``(p - T) / max(1, p_cc)``; both are only
    tracked for the mass-conserving models.
    """

    mass_residual: float = 0.0
    complementarity: float = 0.0
    p_minus_T: float = math.inf
    theta_min: float = math.inf
    theta_max: float = -math.inf
    steps: int = 0

    def update(self, model, prev, new, h_prev, h_now, edges, u, dt, p_cc, h_feed, grid, T):
        self.steps += 1
        if model == "reynolds":
            self.p_minus_T = min(self.p_minus_T, float(new.p.min()))
            return
        p_edge = p_cc if model == "extended" else 0.0
        r = mass_balance_residual(prev, new, h_prev, h_now, u, dt, grid, h_edges=edges,
                                  p_cc=p_edge, h_feed=h_feed)
        self.mass_residual = max(self.mass_residual, r)
        scale = max(1.0, p_edge)
        gap = new.p - T
        self.complementarity = max(self.complementarity,
                                   float(np.max(np.abs(gap * (1.0 - new.theta)))) / scale)
        self.p_minus_T = min(self.p_minus_T, float(gap.min()) / scale)
        self.theta_min = min(self.theta_min, float(new.theta.min()))
        self.theta_max = max(self.theta_max, float(new.theta.max()))


@dataclass
class Snapshot:
    t: float
    p: np.ndarray
    theta: np.ndarray
    h: np.ndarray
    T: np.ndarray


@dataclass
class TransientRun:
    """Time series and verdict of one transient simulation.

    ``verdict`` is ``"completed"`` or ``"blow_by"``; ``t_fail`` is the time
    of the step that failed and ``criterion_t`` the first time the blow-by
    distance criterion fired (``None`` if it never did).
    """

    model: str
    grid: Grid
    records: list[TimeSeriesRecord] = field(default_factory=list)
    snapshots: dict[float, Snapshot] = field(default_factory=dict)
    verdict: str = "completed"
    t_fail: float | None = None
    failure: str = ""
    criterion_t: float | None = None
    checks: StepChecks = field(default_factory=StepChecks)
    final: tuple[RingState, FieldPair] | None = None

    @property
    def completed(self) -> bool:
        return self.verdict == "completed"

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def min_distance(self) -> float:
        d = self.series("blow_by_distance")
        return float(d.min()) if d.size else math.inf


def extrapolate(fields: FieldPair, older: FieldPair, dt_last: float, dt: float) -> FieldPair:
    """Starting guess for the next step: linear extrapolation of p on cells
    that were full film at both earlier steps; theta is carried over."""
    both = (fields.theta >= 1.0) & (older.theta >= 1.0)
    r = dt / dt_last
    p = np.where(both, fields.p + r * (fields.p - older.p), fields.p)
    return FieldPair(p, fields.theta)


def march(cfg: ScenarioConfig, *, model: str | None = None,
          on_record: Callable[[TimeSeriesRecord], None] | None = None,
          snapshot_times=(), raise_on_failure: bool = False,
          track_blow_by: bool = True,
          start: tuple[RingState, FieldPair] | None = None) -> TransientRun:
    """Run ``cfg`` from ``t = 0`` to ``cycle.duration``.

    ``start`` replaces the initial ring state and fields; the last accepted
    pair is kept in ``run.final``.

    Steps land exactly on every requested snapshot time. A step failing with
    :class:`NonConvergence` or :class:`BlowByChannel` ends the run with the
    ``"blow_by"`` verdict unless ``raise_on_failure`` is set.
    """
    model = model or cfg.scenario.model
    solver = build_solver(cfg, model)
    grid = solver.grid
    u_of_t, pcc_of_t = cycle_functions(cfg)
    windows = cfg.cfl_windows()
    bb = cfg.blowby_config()
    duration = cfg.cycle.duration
    pending = sorted(float(s) for s in snapshot_times if 0.0 < s <= duration)
    run = TransientRun(model, grid)

    if start is None:
        state = RingState(cfg.dynamics.Z0, cfg.dynamics.V0)
        fields = solver.initial_fields(state.Z)
    else:
        state, fields = start[0], start[1].copy()
    t = 0.0
    if 0.0 in snapshot_times:
        h0 = solver.gap_at(state.Z)
        run.snapshots[0.0] = Snapshot(0.0, fields.p.copy(), fields.theta.copy(), h0,
                                      np.zeros_like(h0))
    eps = 1e-9 * max(1.0, duration)
    previous = None
    while t < duration - eps:
        dt = time_step(cfg, grid, t, u_of_t(t), windows)
        target = min([duration] + pending)
        if t + dt > target - eps:
            dt = target - t
        t_new = t + dt
        u, p_cc = u_of_t(t_new), pcc_of_t(t_new)
        guess = None if previous is None else extrapolate(fields, *previous, dt)
        try:
            out = solver.step(state, fields, u, p_cc, dt, t_new, guess=guess)
        except FAILURES as exc:
            if raise_on_failure:
                raise
            run.verdict = "blow_by"
            run.t_fail = t_new
            run.failure = f"{type(exc).__name__}: {exc}"
            break
        h_prev = solver.gap_at(state.Z)
        run.checks.update(model, fields, out.fields, h_prev, out.h, solver.edges_at(out.state.Z),
                          u, dt, p_cc, cfg.ring.h_feed, grid, out.T)
        if track_blow_by and model == "extended":
            d = blow_by_distance(out.labels, out.fields.p, p_cc, grid, cfg.solver.tol)
            if run.criterion_t is None and blow_by_criterion(d, bb, grid, p_cc):
                run.criterion_t = t_new
        else:
            d = math.inf
        rec = TimeSeriesRecord(
            t=t_new, Z=out.state.Z, V=out.state.V, W_h=out.W_h, W_con=out.W_con, W_cc=out.W_cc,
            friction_SI=solver.friction(out.fields, out.h, u), mft=float(out.h.min()),
            blow_by_distance=d, iterations=out.iterations, converged=True,
        )
        run.records.append(rec)
        if on_record is not None:
            on_record(rec)
        previous = (fields, dt)
        state, fields, t = out.state, out.fields, t_new
        while pending and abs(pending[0] - t) <= eps:
            run.snapshots[pending.pop(0)] = Snapshot(t, fields.p.copy(), fields.theta.copy(),
                                                     out.h.copy(), out.T.copy())
    run.final = (state, fields)
    return run


# ---------------------------------------------------------------------------
# stationary 1D problems


@dataclass
class StationaryOutcome:
    p_cc_atm: float
    fields: FieldPair
    converged: bool
    reason: str
    steps: int
    rupture_x1: float
    T: np.ndarray | None = None
    checks: StepChecks = field(default_factory=StepChecks)


@dataclass
class SealLimit:
    """Largest converging chamber pressure found by bisection."""

    p_cc_atm: float
    bracket: tuple[float, float]
    outcome: StationaryOutcome
    evaluations: list[tuple[float, bool]]


@dataclass
class StationaryResult:
    cases: list[StationaryOutcome]
    seal_limit: SealLimit | None = None


def rupture_location(labels_mask, grid: Grid) -> float:
    """Left face of the pressurised cavity on the first x2 line (``nan`` if absent)."""
    idx = np.flatnonzero(np.asarray(labels_mask)[:, 0] == CAVITY_RIGHT)
    return float(idx[0] * grid.dx1) if idx.size else math.nan


def run_stationary_case(cfg: ScenarioConfig, p_cc_atm: float, start: FieldPair | None = None,
                        model: str | None = None) -> StationaryOutcome:
    """March at constant ``u`` and ``p_cc`` until the fields stop changing.

    Steady state means a per-step change ``sum|dp| + sum|dtheta|`` below
    ``solver.tol`` for ``stationary.stationary_steps`` consecutive steps.
    """
    model = model or cfg.scenario.model
    solver = build_solver(cfg, model)
    grid = solver.grid
    st = cfg.stationary
    u = cfg.cycle.speed
    p_cc = cfg.scales_obj().atm_to_dimensionless(p_cc_atm)
    dt = cfg.time.dt
    state = RingState(cfg.dynamics.Z0, 0.0)
    fields = start.copy() if start is not None else solver.initial_fields(state.Z)
    checks = StepChecks()
    quiet = 0
    T = None
    labels = None
    for n in range(1, st.max_steps + 1):
        try:
            out = solver.step(state, fields, u, p_cc, dt, n * dt)
        except FAILURES as exc:
            return StationaryOutcome(p_cc_atm, fields, False, f"{type(exc).__name__}: {exc}",
                                     n, math.nan, T, checks)
        h = out.h
        checks.update(model, fields, out.fields, solver.gap_at(state.Z), h,
                      solver.edges_at(out.state.Z), u, dt, p_cc, cfg.ring.h_feed, grid, out.T)
        change = (float(np.abs(out.fields.p - fields.p).sum())
                  + float(np.abs(out.fields.theta - fields.theta).sum()))
        fields, state, T, labels = out.fields, out.state, out.T, out.labels
        quiet = quiet + 1 if change < cfg.solver.tol else 0
        if quiet >= st.stationary_steps:
            return StationaryOutcome(p_cc_atm, fields, True, "stationary", n,
                                     rupture_location(labels.mask, grid), T, checks)
    return StationaryOutcome(p_cc_atm, fields, False, "not stationary within max_steps",
                             st.max_steps, math.nan, T, checks)


def stationary_start(cfg: ScenarioConfig) -> FieldPair | None:
    """Initial fields for the stationary sweep.

    ``auto`` starts from the converged zero-chamber-pressure Elrod-Adams
    state when the liner moves towards the chamber (u > 0) and from the feed
    state otherwise.
    """
    mode = cfg.stationary.initial_state
    if mode == "auto":
        mode = "elrod_adams" if cfg.cycle.speed > 0 else "feed"
    if mode == "feed":
        return None
    base = run_stationary_case(cfg, 0.0, None, model="elrod_adams")
    if not base.converged:
        raise NonConvergence("zero-pressure Elrod-Adams start did not converge: " + base.reason)
    return base.fields


def seal_limit(cfg: ScenarioConfig, start: FieldPair | None = None) -> SealLimit:
    """Bisect the largest converging chamber pressure in the configured bracket."""
    st = cfg.stationary
    lo, hi = st.bisect_lo_atm, st.bisect_hi_atm
    evals = []
    low = run_stationary_case(cfg, lo, start)
    evals.append((lo, low.converged))
    if not low.converged:
        raise ConfigurationError(f"stationary.bisect_lo_atm: {lo} atm does not converge")
    high = run_stationary_case(cfg, hi, start)
    evals.append((hi, high.converged))
    if high.converged:
        return SealLimit(hi, (hi, hi), high, evals)
    best = low
    while hi - lo > st.bisect_tol_atm:
        mid = 0.5 * (lo + hi)
        out = run_stationary_case(cfg, mid, start)
        evals.append((mid, out.converged))
        if out.converged:
            lo, best = mid, out
        else:
            hi = mid
    return SealLimit(lo, (lo, hi), best, evals)


def run_stationary_1d(cfg: ScenarioConfig) -> StationaryResult:
    if cfg.mesh.n_x2 != 1:
        raise ConfigurationError("mesh.n_x2: stationary_1d needs a single x2 cell")
    start = stationary_start(cfg)
    cases = [run_stationary_case(cfg, p, start) for p in cfg.stationary.pcc_atm]
    limit = seal_limit(cfg, start) if cfg.stationary.bisect else None
    return StationaryResult(cases, limit)


# ---------------------------------------------------------------------------
# textured strip


def run_textured_transient(cfg: ScenarioConfig, on_record=None, snapshot_times=None,
                           track_blow_by: bool = True) -> TransientRun:
    """Dimpled strip under the configured chamber pressure; failures propagate."""
    if not cfg.texture.enabled:
        raise ConfigurationError("texture.enabled: the textured transient needs a texture")
    times = cfg.output.snapshot_times if snapshot_times is None else snapshot_times
    return march(cfg, on_record=on_record, snapshot_times=times, raise_on_failure=True,
                 track_blow_by=track_blow_by)


def centerline(run: TransientRun, t: float, x2: float = 0.05) -> np.ndarray:
    return profile_along_x1(run.snapshots[t].p, run.grid, x2)


@dataclass
class TimeConvergence:
    dts: tuple[float, ...]
    dt_reference: float
    friction_diff: np.ndarray
    mft_diff: np.ndarray
    friction_order: float
    mft_order: float
    runs: dict[float, TransientRun]


def fitted_order(dts, diffs) -> float:
    """Least-squares slope of ``log(diff)`` against ``log(dt)``."""
    return float(np.polyfit(np.log(dts), np.log(diffs), 1)[0])


def time_convergence_study(cfg: ScenarioConfig, dts=None, dt_reference=None) -> TimeConvergence:
    """Relative L1-in-time differences of friction and MFT against a fine step."""
    dts = tuple(cfg.transient.dt_sequence if dts is None else dts)
    ref_dt = cfg.transient.dt_reference if dt_reference is None else dt_reference
    runs = {}
    for dt in (ref_dt,) + dts:
        runs[dt] = run_textured_transient(cfg.with_updates(time={"dt": dt}), snapshot_times=(),
                                          track_blow_by=False)
    ref = runs[ref_dt]
    t_ref = ref.series("t")
    fd, md = [], []
    for dt in dts:
        r = runs[dt]
        fd.append(friction_relative_difference(r.series("t"), r.series("friction_SI"),
                                               t_ref, ref.series("friction_SI")))
        md.append(friction_relative_difference(r.series("t"), r.series("mft"),
                                               t_ref, ref.series("mft")))
    fd, md = np.array(fd), np.array(md)
    return TimeConvergence(dts, ref_dt, fd, md, fitted_order(dts, fd), fitted_order(dts, md),
                           runs)


@dataclass
class MeshConvergence:
    n_x1: tuple[int, ...]
    x1: list[np.ndarray]
    profiles: list[np.ndarray]
    sup_diffs: np.ndarray


def mesh_convergence_study(cfg: ScenarioConfig, n_list=None) -> MeshConvergence:
    """Steady centerline pressure at constant chamber pressure on refined meshes.

    Every mesh keeps ``dx2 = dx1`` and the inlet is fed with
    ``transient.mesh_h_feed`` so that a sealing film exists from the start.
    Successive profiles are compared in the sup norm on the coarser grid.
    """
    tr = cfg.transient
    n_list = tuple(tr.mesh_sequence if n_list is None else n_list)
    xs, profiles = [], []
    for n in n_list:
        n2 = max(1, int(round(cfg.mesh.length_x2 * n)))
        c = cfg.with_updates(
            mesh={"n_x1": n, "n_x2": n2},
            cycle={"pcc_mode": "constant", "A_cc_atm": tr.mesh_pcc_atm,
                   "duration": tr.mesh_duration},
            time={"dt": 0.0},
            ring={"h_feed": tr.mesh_h_feed},
        )
        run = run_textured_transient(c, snapshot_times=(tr.mesh_duration,))
        xs.append(run.grid.x1)
        profiles.append(centerline(run, tr.mesh_duration, tr.centerline_x2))
    diffs = []
    for k in range(len(n_list) - 1):
        fine = np.interp(xs[k], xs[k + 1], profiles[k + 1])
        diffs.append(float(np.max(np.abs(fine - profiles[k]))))
    return MeshConvergence(n_list, xs, profiles, np.array(diffs))


@dataclass
class ModelComparison:
    runs: dict[str, TransientRun]
    reference: str
    mean_friction: dict[str, float]
    friction_rel_diff: dict[str, float]
    friction_l1_diff: dict[str, float]
    mft_at: dict[str, dict[float, float]]


def _value_at(run: TransientRun, name: str, t: float) -> float:
    return float(np.interp(t, run.series("t"), run.series(name)))


def run_model_compare(cfg: ScenarioConfig) -> ModelComparison:
    """The textured transient with each cavitation model, same step and geometry."""
    times = cfg.compare.snapshot_times
    runs = {}
    for m in cfg.compare.models:
        c = cfg.with_updates(scenario={"model": m})
        runs[m] = run_textured_transient(c, snapshot_times=times)
    ref = runs[cfg.compare.reference]
    t_end = cfg.cycle.duration
    means = {m: time_average(r.series("t"), r.series("friction_SI"), r.records[0].t, t_end)
             for m, r in runs.items()}
    rel = {m: abs(means[m] - means[cfg.compare.reference]) / abs(means[cfg.compare.reference])
           for m in runs}
    l1 = {m: friction_relative_difference(r.series("t"), r.series("friction_SI"),
                                          ref.series("t"), ref.series("friction_SI"))
          for m, r in runs.items()}
    mft = {m: {t: _value_at(r, "mft", t) for t in times} for m, r in runs.items()}
    return ModelComparison(runs, cfg.compare.reference, means, rel, l1, mft)


# ---------------------------------------------------------------------------
# full cycles and the wear sweep


def run_full_cycle(cfg: ScenarioConfig, on_record=None, snapshot_times=None) -> TransientRun:
    """Four-stroke cycle; a solver failure becomes the ``blow_by`` verdict."""
    times = cfg.output.snapshot_times if snapshot_times is None else snapshot_times
    return march(cfg, on_record=on_record, snapshot_times=times)


@dataclass(frozen=True)
class SweepEntry:
    delta_h: float
    delta: float
    verdict: str
    t_fail: float | None
    criterion_t: float | None
    min_distance: float
    steps: int


@dataclass
class SweepResult:
    entries: list[SweepEntry]

    def by_delta_h(self) -> dict[float, list[SweepEntry]]:
        out: dict[float, list[SweepEntry]] = {}
        for e in self.entries:
            out.setdefault(e.delta_h, []).append(e)
        for v in out.values():
            v.sort(key=lambda e: e.delta)
        return out

    def delta_max(self) -> dict[float, float | None]:
        """Smallest failing wear amplitude per curvature (``None`` if all complete)."""
        out = {}
        for dh, rows in self.by_delta_h().items():
            failing = [e.delta for e in rows if e.verdict != "completed"]
            out[dh] = min(failing) if failing else None
        return out

    def monotone(self) -> dict[float, bool]:
        """Whether every amplitude at or above the smallest failing one fails."""
        out = {}
        for dh, rows in self.by_delta_h().items():
            dmax = self.delta_max()[dh]
            out[dh] = dmax is None or all(e.verdict != "completed"
                                          for e in rows if e.delta >= dmax)
        return out


def wear_case(cfg: ScenarioConfig, delta_h: float, delta: float) -> ScenarioConfig:
    """Full-cycle configuration for one ring curvature and wear amplitude."""
    return cfg.with_updates(scenario={"kind": "full_cycle"},
                            ring={"delta_h": delta_h,
                                  "R": cfg.ring.aspect * 0.25 / (2.0 * delta_h)},
                            wear={"delta": delta})


def _sweep_job(args) -> SweepEntry:
    cfg, dh, delta = args
    run = march(wear_case(cfg, dh, delta))
    return SweepEntry(dh, delta, run.verdict, run.t_fail, run.criterion_t, run.min_distance,
                      len(run.records))


def run_wear_sweep(cfg: ScenarioConfig, threads: int | None = None,
                   on_entry: Callable[[SweepEntry], None] | None = None) -> SweepResult:
    """Full cycles over ``sweep.delta_h x sweep.delta``, one process per run.

    Results are ordered by ``(delta_h, delta)`` whatever the completion order.
    """
    jobs = [(cfg, dh, d) for dh in cfg.sweep.delta_h for d in cfg.sweep.delta]
    threads = threads or os.cpu_count() or 1
    if threads <= 1 or len(jobs) <= 1:
        entries = []
        for j in jobs:
            e = _sweep_job(j)
            entries.append(e)
            if on_entry is not None:
                on_entry(e)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            entries = []
            for e in pool.map(_sweep_job, jobs):
                entries.append(e)
                if on_entry is not None:
                    on_entry(e)
    entries.sort(key=lambda e: (e.delta_h, e.delta))
    return SweepResult(entries)
