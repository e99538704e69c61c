import numpy as np
import pytest
from scipy import ndimage

from ringfilm import _kernels as K
from ringfilm.cavitation import (
    CAVITY_PLAIN,
    CAVITY_RIGHT,
    FULL_FILM,
    FieldPair,
    SolverSettings,
    apply_boundary_conditions,
    assemble_coefficients,
    cell_residual,
    discrete_T,
    flood_rightmost_component,
    gauss_seidel_sweep,
    StepProblem,
    solve_reynolds_cavitation,
    solve_timestep,
)
from ringfilm.exceptions import ConfigurationError, DegenerateCell, NonConvergence
from ringfilm.geometry import Grid
from ringfilm.scales import DEFAULT_SCALES

from conftest import random_gap


def _solve(h, u, p_cc, dt, grid, model="extended", method="line", h_feed=1.5, steps=1,
           tol=1e-10):
    settings = SolverSettings(tol=tol, method=method)
    prev = FieldPair.initial(h, h_feed)
    for _ in range(steps):
        res = solve_timestep(prev, h, h, u, p_cc, dt, settings, grid, h_feed=h_feed,
                             model=model)
        prev = res.fields
    return res


# -- stencil ----------------------------------------------------------------


def test_coefficients_match_hand_assembly(rng):
    grid = Grid(5, 4, length_x2=0.04)
    h = random_gap(rng, grid)
    hp = h * 1.01
    th = rng.uniform(0.3, 1.0, h.shape)
    dt = 0.01
    c = assemble_coefficients(h, hp, th, 0.7, dt, grid)
    dx1, dx2 = grid.dx1, grid.dx2
    q2 = (dx1 / dx2) ** 2
    n1, n2 = grid.shape
    for i in range(n1):
        for j in range(n2):
            h3 = h[i, j] ** 3
            e = h[0, j] ** 3 + h3 if i == 0 else 0.5 * (h[i - 1, j] ** 3 + h3)
            w = h[-1, j] ** 3 + h3 if i == n1 - 1 else 0.5 * (h[i + 1, j] ** 3 + h3)
            s = 0.5 * (h[i, (j - 1) % n2] ** 3 + h3) * q2
            nn = 0.5 * (h[i, (j + 1) % n2] ** 3 + h3) * q2
            assert c.a00[i, j] == pytest.approx(e + w + s + nn, rel=1e-13)
            assert c.a_m0[i, j] == pytest.approx(-e)
            assert c.a_0p[i, j] == pytest.approx(-nn)
            assert c.e00[i, j] == pytest.approx((0.7 * dx1 + 2 * dx1**2 / dt) * h[i, j])
            assert c.f[i, j] == pytest.approx(2 * dx1**2 / dt * hp[i, j] * th[i, j])
            up = -0.7 * dx1 * h[i - 1, j] if i > 0 else 0.0
            assert c.e_up[i, j] == pytest.approx(up)


def test_coefficients_negative_speed_and_stationary(rng):
    grid = Grid(6, 1)
    h = random_gap(rng, grid)
    c = assemble_coefficients(h, h, np.ones_like(h), -1.0, None, grid)
    assert np.all(c.f == 0)
    assert c.e_up[-1, 0] == 0
    assert c.e_up[0, 0] == pytest.approx(-grid.dx1 * h[1, 0])
    assert c.e00 == pytest.approx(grid.dx1 * h)
    with pytest.raises(ConfigurationError):
        assemble_coefficients(-h, h, h, 1.0, 0.1, grid)
    with pytest.raises(ConfigurationError):
        assemble_coefficients(h, h, h, 1.0, -0.1, grid)


def test_boundary_conditions():
    e = apply_boundary_conditions([2.0], [2.5], 3.0, 0.01)
    assert e.theta[0, 0] == 1.0
    e = apply_boundary_conditions([2.0], [2.5], 1.25, 0.01)
    assert e.theta[1, 0] == pytest.approx(0.5)
    assert e.p[0, 0] == 0.0 and e.p[1, 0] == 0.01


# -- solver -----------------------------------------------------------------


@pytest.mark.parametrize("u", [1.0, -1.0])
@pytest.mark.parametrize("method", ["line", "point"])
def test_converged_step_has_zero_residual(rng, u, method):
    grid = Grid(60, 3, length_x2=0.05)
    h = random_gap(rng, grid)
    p_cc = DEFAULT_SCALES.atm_to_dimensionless(40.0)
    dt = 0.02
    settings = SolverSettings(tol=1e-11, method=method)
    prev = FieldPair.initial(h, 1.5)
    res = solve_timestep(prev, h, h, u, p_cc, dt, settings, grid, h_feed=1.5)
    c = assemble_coefficients(h, h, prev.theta, u, dt, grid)
    edges = apply_boundary_conditions(h[0], h[-1], 1.5, p_cc)
    r = cell_residual(res.fields, c, edges, (h[0], h[-1]))
    full = res.fields.theta >= 1.0
    cav = ~full
    scale = np.abs(c.f).max() + np.abs(c.a00 * res.fields.p).max()
    # full film: balance holds; cavity interior: balance holds unless theta is clipped
    assert np.abs(r[full]).max() < 1e-8 * scale
    inner = cav & (res.fields.theta > 0)
    if inner.any():
        assert np.abs(r[inner]).max() < 1e-8 * scale


@pytest.mark.parametrize("u", [1.0, -1.0])
def test_line_and_point_reach_same_fixed_point(rng, u):
    grid = Grid(80, 1)
    h = random_gap(rng, grid, Z=1.0)
    p_cc = DEFAULT_SCALES.atm_to_dimensionless(50.0)
    a = _solve(h, u, p_cc, 0.01, grid, method="line", steps=5, tol=1e-12)
    b = _solve(h, u, p_cc, 0.01, grid, method="point", steps=5, tol=1e-12)
    assert np.abs(a.fields.p - b.fields.p).max() < 1e-9
    assert np.abs(a.fields.theta - b.fields.theta).max() < 1e-7


def test_line_and_point_agree_in_2d(rng):
    grid = Grid(40, 6, length_x2=0.06)
    h = random_gap(rng, grid)
    p_cc = DEFAULT_SCALES.atm_to_dimensionless(20.0)
    a = _solve(h, 1.0, p_cc, 0.02, grid, method="line", steps=3, tol=1e-12)
    b = _solve(h, 1.0, p_cc, 0.02, grid, method="point", steps=3, tol=1e-12)
    assert np.abs(a.fields.p - b.fields.p).max() < 1e-8
    assert np.abs(a.fields.theta - b.fields.theta).max() < 1e-6


@pytest.mark.parametrize("model", ["extended", "elrod_adams"])
def test_complementarity_and_bounds(rng, model):
    grid = Grid(50, 4, length_x2=0.05)
    p_cc = DEFAULT_SCALES.atm_to_dimensionless(20.0)
    settings = SolverSettings()
    solved = 0
    for _ in range(6):
        h = random_gap(rng, grid)
        try:
            res = _solve(h, rng.choice([-1.0, 1.0]), p_cc, 0.01, grid, model=model, steps=2,
                         tol=settings.tol)
        except NonConvergence:
            # a gap that cannot seal the chamber has no solution to check
            continue
        solved += 1
        p, th, T = res.fields.p, res.fields.theta, res.T
        assert th.min() >= 0.0 and th.max() <= 1.0
        assert np.all(p >= T)
        assert np.abs((p - T) * (1 - th)).max() <= settings.tol * max(1.0, p_cc)
    assert solved >= 4


def test_pressurised_cavity_carries_chamber_pressure(rng):
    grid = Grid(200, 1)
    h = random_gap(rng, grid, Z=1.0)
    p_cc = DEFAULT_SCALES.atm_to_dimensionless(50.0)
    res = _solve(h, 1.0, p_cc, 0.01, grid, steps=3)
    right = res.labels.mask == CAVITY_RIGHT
    assert right.any()
    assert res.fields.p[right] == pytest.approx(p_cc)


def test_reduction_to_elrod_adams(rng):
    grid = Grid(40, 5, length_x2=0.05)
    for _ in range(5):
        h = random_gap(rng, grid)
        u = rng.choice([-1.0, 1.0])
        a = _solve(h, u, 0.0, 0.02, grid, model="extended", steps=2, tol=1e-12)
        b = _solve(h, u, 0.0, 0.02, grid, model="elrod_adams", steps=2, tol=1e-12)
        assert np.abs(a.fields.p - b.fields.p).max() <= 1e-10
        assert np.abs(a.fields.theta - b.fields.theta).max() <= 1e-10


def test_reynolds_projection(rng):
    grid = Grid(80, 1)
    h = random_gap(rng, grid, Z=1.0)
    p = solve_reynolds_cavitation(h, 1.0, 0.0, grid)
    assert p.min() >= 0.0
    assert p.max() > 0.0
    # unconstrained cells satisfy the full-film balance
    c = assemble_coefficients(h, h, np.ones_like(h), 1.0, None, grid)
    # the inlet edge carries a full film
    edges = apply_boundary_conditions(h[0], h[-1], h.max(), 0.0)
    r = cell_residual(FieldPair(p, np.ones_like(p)), c, edges, (h[0], h[-1]))
    pos = p > 1e-12
    assert np.abs(r[pos]).max() < 1e-8


def test_non_convergence_and_degenerate(rng):
    grid = Grid(40, 1)
    h = random_gap(rng, grid)
    prev = FieldPair.initial(h, 1.5)
    with pytest.raises(NonConvergence) as exc:
        solve_timestep(prev, h, h, 1.0, 0.0, 0.01, SolverSettings(max_iters=1), grid, t=3.5)
    assert exc.value.t == 3.5
    # no motion and no storage: a cavitated cell has no equation for theta
    start = FieldPair(np.zeros_like(h), np.full_like(h, 0.5))
    with pytest.raises(DegenerateCell):
        solve_timestep(start, h, h, 0.0, 0.0, None, SolverSettings(), grid)


def test_theta_pre_clamp_reported(rng):
    grid = Grid(40, 1)
    h = random_gap(rng, grid)
    prob = StepProblem.build(grid, h, h, np.ones_like(h), 1.0, 0.0, 0.01, 1.5)
    f = FieldPair(np.zeros_like(h), np.full_like(h, 0.5))
    T = np.zeros_like(h)
    dp, dth, min_pre = gauss_seidel_sweep(f, prob, T)
    assert dth > 0
    assert np.isfinite(min_pre)
    assert f.theta.min() >= 0 and f.theta.max() <= 1


def test_epsilon_extension_widens_T():
    grid = Grid(6, 1)
    theta = np.array([1, 1, 1, 0.5, 0.5, 0.5], float)[:, None]
    s_on = SolverSettings(epsilon_extension=True)
    s_off = SolverSettings(epsilon_extension=False)
    lab = flood_rightmost_component(theta, s_on, grid)
    T_on = discrete_T(lab, 2.0, s_on, grid)
    T_off = discrete_T(lab, 2.0, s_off, grid)
    assert T_off[:, 0].tolist() == [0, 0, 0, 2, 2, 2]
    assert T_on[:, 0].tolist() == [0, 0, 2, 2, 2, 2]
    assert np.all(discrete_T(lab, 0.0, s_on, grid) == 0)


# -- flooding ---------------------------------------------------------------


def _flood_oracle(cav, periodic):
    """Label components with scipy, merge across the periodic seam, keep right ones."""
    lab, n = ndimage.label(cav)
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    if periodic and cav.shape[1] > 1:
        for i in range(cav.shape[0]):
            a, b = lab[i, 0], lab[i, -1]
            if a and b:
                parent[find(a)] = find(b)
    right_roots = {find(x) for x in lab[-1] if x}
    out = np.zeros(cav.shape, bool)
    for i in range(cav.shape[0]):
        for j in range(cav.shape[1]):
            if lab[i, j] and find(lab[i, j]) in right_roots:
                out[i, j] = True
    return out


def test_flood_matches_oracle_on_random_masks():
    rng = np.random.default_rng(7)
    settings = SolverSettings()
    for k in range(100):
        n1, n2 = rng.integers(1, 51, size=2)
        n1 = max(n1, 3)
        grid = Grid(int(n1), int(n2), length_x2=1.0, periodic_x2=bool(k % 2))
        theta = np.where(rng.random((n1, n2)) < rng.uniform(0.3, 0.7), 0.5, 1.0)
        got = flood_rightmost_component(theta, settings, grid)
        want = _flood_oracle(theta < 1.0, grid.periodic_x2)
        assert np.array_equal(got.mask == CAVITY_RIGHT, want)
        assert np.array_equal(got.mask == FULL_FILM, theta >= 1.0)
        assert np.array_equal(got.mask == CAVITY_PLAIN, (theta < 1.0) & ~want)
        assert got.touches_left == bool(want[0].any())


def test_flood_kernel_respects_threshold():
    theta = np.array([[0.95], [0.99], [0.5]])
    labels = np.empty((3, 1), np.int64)
    queue = np.empty(3, np.int64)
    touches = K.flood_right(theta, True, 0.98, labels, queue)
    assert labels[:, 0].tolist() == [CAVITY_PLAIN, FULL_FILM, CAVITY_RIGHT]
    assert not touches
