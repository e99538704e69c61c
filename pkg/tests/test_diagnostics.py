import math

import numpy as np
import pytest

from ringfilm.cavitation import CAVITY_RIGHT, FieldPair, RegionLabel, SolverSettings, solve_timestep
from ringfilm.diagnostics import (
    BlowByConfig,
    blow_by_criterion,
    blow_by_distance,
    free_boundary_slopes,
    friction_relative_difference,
    mass_balance_residual,
    minimum_film_thickness,
    time_average,
)
from ringfilm.exceptions import ConfigurationError
from ringfilm.geometry import Grid

from conftest import random_gap


def _brute_distance(right, low, grid):
    n1, n2 = right.shape
    best = math.inf
    for i, j in zip(*np.nonzero(right)):
        for k, l in zip(*np.nonzero(low)):
            dj = abs(int(j) - int(l))
            if grid.periodic_x2 and n2 > 1:
                dj = min(dj, n2 - dj)
            d = math.hypot((int(i) - int(k)) * grid.dx1, dj * grid.dx2)
            best = min(best, d)
    return best


def test_distance_matches_brute_force(rng):
    for trial in range(100):
        n1 = int(rng.integers(3, 51))
        n2 = int(rng.integers(1, 51))
        grid = Grid(n1, n2, length_x2=float(rng.uniform(0.05, 2.0)),
                    periodic_x2=bool(trial % 2))
        mask = np.where(rng.random(grid.shape) < 0.15, CAVITY_RIGHT, 0)
        p_cc = 0.01
        p = np.where(rng.random(grid.shape) < 0.2, 0.0, p_cc)
        d = blow_by_distance(RegionLabel(mask, False), p, p_cc, grid)
        ref = _brute_distance(mask == CAVITY_RIGHT, p < p_cc - 1e-7, grid)
        if math.isinf(ref):
            assert math.isinf(d)
        else:
            assert d == pytest.approx(ref, rel=1e-12, abs=1e-15)


def test_distance_sentinels():
    grid = Grid(5, 1)
    mask = np.zeros(grid.shape, dtype=int)
    p = np.zeros(grid.shape)
    assert math.isinf(blow_by_distance(RegionLabel(mask, False), p, 0.0, grid))
    mask[4] = CAVITY_RIGHT
    assert math.isinf(blow_by_distance(RegionLabel(mask, False), p, 0.0, grid))
    # the pressurised cavity sits exactly at chamber pressure: not "low"
    p[:] = 0.01
    assert math.isinf(blow_by_distance(RegionLabel(mask, False), p, 0.01, grid))
    p[0] = 0.0
    assert blow_by_distance(RegionLabel(mask, False), p, 0.01, grid) == pytest.approx(0.8)
    with pytest.raises(ConfigurationError):
        blow_by_distance(RegionLabel(mask, False), p, -1.0, grid)


def test_criterion_threshold():
    cfg = BlowByConfig()
    grid = Grid(200, 1)
    # max(0.02 * 1, 4 * 0.005) = 0.02
    assert blow_by_criterion(0.02, cfg, grid, 1e-3)
    assert not blow_by_criterion(0.0201, cfg, grid, 1e-3)
    assert not blow_by_criterion(0.0, cfg, grid, 0.0)
    coarse = Grid(50, 1)
    assert blow_by_criterion(0.08, cfg, coarse, 1e-3)
    with pytest.raises(ConfigurationError):
        BlowByConfig(epsilon_b=0.0)
    with pytest.raises(ConfigurationError):
        BlowByConfig(N_b=0)


@pytest.mark.parametrize("u", [1.0, -1.0])
def test_mass_balance_after_steps(rng, u):
    grid = Grid(60, 4, length_x2=0.04)
    h0 = random_gap(rng, grid, Z=1.0)
    h1 = h0 * 0.97
    prev = FieldPair.initial(h0, 1.5)
    res = solve_timestep(prev, h1, h0, u, 0.002, 0.01, SolverSettings(tol=1e-12), grid)
    edges = (h1[0], h1[-1])
    r = mass_balance_residual(prev, res.fields, h0, h1, u, 0.01, grid, h_edges=edges,
                              p_cc=0.002)
    assert r < 1e-6
    # a perturbed field violates the balance
    bad = FieldPair(res.fields.p, np.clip(res.fields.theta * 0.9, 0, 1))
    assert mass_balance_residual(prev, bad, h0, h1, u, 0.01, grid, h_edges=edges,
                                 p_cc=0.002) > 1e-3


def test_pure_squeeze_balance():
    grid = Grid(20, 1)
    h0 = np.full(grid.shape, 1.2)
    h1 = np.full(grid.shape, 1.1)
    prev = FieldPair(np.zeros(grid.shape), np.ones(grid.shape))
    res = solve_timestep(prev, h1, h0, 0.0, 0.0, 0.05, SolverSettings(tol=1e-13), grid)
    r = mass_balance_residual(prev, res.fields, h0, h1, 0.0, 0.05, grid, h_edges=(h1[0], h1[-1]),
                              p_cc=0.0)
    assert r < 1e-8
    assert res.fields.p.max() > 0


def test_trapezoid_metrics():
    t = np.linspace(0.0, 2.0, 201)
    F = np.sin(t) + 2.0
    assert friction_relative_difference(t, F, t, F) == 0.0
    G = F * 1.1
    assert friction_relative_difference(t, G, t, F) == pytest.approx(0.1, rel=1e-12)
    # coarse series interpolated onto the reference grid
    tc = t[::4]
    assert friction_relative_difference(tc, F[::4], t, F) < 1e-4
    acc = 0.0
    for k in range(len(t) - 1):
        acc += 0.5 * (t[k + 1] - t[k]) * (F[k] + F[k + 1])
    assert time_average(t, F, 0.0, 2.0) == pytest.approx(acc / 2.0, rel=1e-12)
    assert time_average(t, t, 0.5, 1.5) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ConfigurationError):
        time_average(t, F, 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        friction_relative_difference(t, F, t, 0 * F)


def test_minimum_film_thickness():
    assert minimum_film_thickness([[3.0, 0.4], [1.0, 2.0]]) == 0.4
    with pytest.raises(ConfigurationError):
        minimum_film_thickness([])


def test_free_boundary_slopes():
    grid = Grid(10, 1)
    x = grid.x1
    # the stencil reaches into the cavity, so keep the parabola there too
    p = x * (0.5 - x)
    theta = np.where(x < 0.5, 1.0, 0.5)
    out = free_boundary_slopes(p, theta, grid)
    assert len(out) == 1
    xf, dp, d2 = out[0]
    assert xf == pytest.approx(0.5)
    assert dp < 0
    assert d2 == pytest.approx(-2.0)


def test_cancelling_cell_changes_are_not_judged_on_round_off():
    # liner at rest: cavity cells trade lubricant, the total is unchanged up to round-off
    grid = Grid(10, 1)
    h = np.full(grid.shape, 2.0)
    prev = FieldPair(np.zeros(grid.shape), np.full(grid.shape, 0.5))
    shift = np.where(np.arange(10) % 2 == 0, 0.01, -0.01)[:, None]
    curr = FieldPair(np.zeros(grid.shape), 0.5 + shift)
    curr.theta[0] += 1e-15
    r = mass_balance_residual(prev, curr, h, h, 0.0, 0.02, grid, h_edges=(h[0], h[-1]))
    assert r < 1e-10
