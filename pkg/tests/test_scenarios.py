import math

import numpy as np
import pytest

from ringfilm.config import default_config
from ringfilm.scenarios import (
    extrapolate,
    fitted_order,
    march,
    mesh_convergence_study,
    run_full_cycle,
    run_model_compare,
    run_stationary_case,
    run_wear_sweep,
    stationary_start,
)
from ringfilm.cavitation import FieldPair


def _assert_invariants(run, tol=1e-8):
    c = run.checks
    assert c.steps == len(run.records)
    assert c.mass_residual < 1e-6
    assert c.complementarity <= tol
    assert c.p_minus_T >= -tol
    assert 0.0 <= c.theta_min and c.theta_max <= 1.0


def _small_cycle(**sections):
    base = {"mesh": {"n_x1": 40, "n_x2": 8}, "cycle": {"duration": 6.0}}
    for k, v in sections.items():
        base.setdefault(k, {}).update(v)
    return default_config("full_cycle", **base)


def test_stationary_case_converges_and_conserves_mass():
    cfg = default_config("stationary_1d", mesh={"n_x1": 60})
    out = run_stationary_case(cfg, 20.0, stationary_start(cfg))
    assert out.converged
    assert out.checks.mass_residual < 1e-6
    assert out.checks.complementarity <= cfg.solver.tol
    assert 0.0 < out.rupture_x1 < 1.0


def test_short_cycle_records_every_step():
    cfg = _small_cycle()
    run = run_full_cycle(cfg, snapshot_times=(3.0,))
    assert run.completed
    assert run.records[-1].t == pytest.approx(6.0)
    assert 3.0 in run.snapshots
    t = run.series("t")
    assert np.all(np.diff(t) > 0)
    _assert_invariants(run)


def test_march_is_deterministic():
    cfg = _small_cycle(cycle={"duration": 2.0})
    a, b = march(cfg), march(cfg)
    np.testing.assert_array_equal(a.series("Z"), b.series("Z"))
    np.testing.assert_array_equal(a.series("friction_SI"), b.series("friction_SI"))


def test_sweep_threads_do_not_change_results():
    cfg = _small_cycle(cycle={"duration": 3.0}, sweep={"delta_h": (2.0,), "delta": (0.0, 0.04)})
    one = run_wear_sweep(cfg, threads=1)
    two = run_wear_sweep(cfg, threads=2)
    assert one.entries == two.entries
    assert [(e.delta_h, e.delta) for e in one.entries] == [(2.0, 0.0), (2.0, 0.04)]
    assert all(e.verdict == "completed" for e in one.entries)
    assert one.delta_max() == {2.0: None}


def test_model_compare_runs_all_models():
    cfg = default_config("model_compare", mesh={"n_x1": 40, "n_x2": 4},
                         cycle={"duration": 2.0}, compare={"snapshot_times": (1.0,)})
    res = run_model_compare(cfg)
    assert set(res.runs) == {"extended", "elrod_adams", "reynolds"}
    assert res.friction_rel_diff["extended"] == 0.0
    for m, run in res.runs.items():
        assert run.completed
        assert 1.0 in res.mft_at[m]
        assert math.isfinite(res.mean_friction[m])
        if m != "reynolds":
            _assert_invariants(run)


def test_mesh_convergence_small():
    cfg = default_config("textured_transient",
                         transient={"mesh_sequence": (40, 80), "mesh_duration": 1.0})
    res = mesh_convergence_study(cfg)
    assert len(res.profiles) == 2
    assert res.profiles[1].shape == (80,)
    assert np.all(np.isfinite(res.sup_diffs))


def test_fitted_order_recovers_power_law():
    dts = np.array([0.04, 0.02, 0.01])
    assert fitted_order(dts, 3.0 * dts ** 0.7) == pytest.approx(0.7, rel=1e-12)


def test_extrapolation_only_touches_full_cells():
    p0 = np.array([[0.0], [1.0], [2.0]])
    p1 = np.array([[0.5], [2.0], [2.0]])
    older = FieldPair(p0, np.array([[1.0], [1.0], [0.5]]))
    now = FieldPair(p1, np.array([[1.0], [1.0], [1.0]]))
    g = extrapolate(now, older, 0.1, 0.05)
    np.testing.assert_allclose(g.p[:, 0], [0.75, 2.5, 2.0])
    assert g.theta is now.theta
