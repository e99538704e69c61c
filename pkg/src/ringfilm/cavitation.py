"""Discrete extended Elrod-Adams solver and the comparison cavitation models.

One time step solves, on a cell-centred finite-volume grid, the coupled
pressure/saturation complementarity problem

    p >= T(theta),  0 <= theta <= 1,  (p - T(theta)) (1 - theta) = 0

where ``T`` equals the combustion-chamber pressure on the cavitated
component connected to the x1 = 1 edge (plus a one-cell extension onto the
neighbouring full film) and zero elsewhere. With ``p_cc = 0`` this is the
classical Elrod-Adams model.

Every balance is scaled by ``2 dx1**2`` so that the cell equation reads
``a00 p + e00 theta = C`` with

    a00 = sum of face conductances s = (h_a**3 + h_b**3) / 2 (x2 faces times q**2)
    e00 = (|u| dx1 + 2 dx1**2 / dt) h
    C   = sum_nb s p_nb + |u| dx1 (h theta)_upwind + (2 dx1**2 / dt) (h theta)_prev

The x1 edges are Dirichlet boundaries located half a cell from the first
and last cell centres, so their conductance is ``h_edge**3 + h**3``. Inflow
through an edge carries ``min(h_edge, h_feed)`` of lubricant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .exceptions import BlowByChannel, ConfigurationError, DegenerateCell, NonConvergence
from .geometry import Grid

FULL_FILM = K.FULL_FILM
CAVITY_PLAIN = K.CAVITY_PLAIN
CAVITY_RIGHT = K.CAVITY_RIGHT

MODELS = ("extended", "elrod_adams", "reynolds")
METHODS = ("line", "point")


@dataclass
class FieldPair:
    """Pressure and saturation on the grid, both of shape ``(n_x1, n_x2)``."""

    p: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.p.shape != self.theta.shape:
            raise ConfigurationError(
                f"p and theta shapes differ: {self.p.shape} vs {self.theta.shape}"
            )

    def copy(self) -> "FieldPair":
        return FieldPair(self.p.copy(), self.theta.copy())

    @classmethod
    def initial(cls, h: np.ndarray, h_feed: float) -> "FieldPair":
        """Zero pressure and the feed saturation ``min(1, h_feed / h)``."""
        return cls(np.zeros_like(h, dtype=float), np.minimum(1.0, h_feed / h))


@dataclass(frozen=True)
class StencilCoefficients:
    """Cell coefficients of the scaled discrete balance.

    Off-diagonal entries follow the sign convention of a matrix row, so
    ``a_p0 = -s(i+1/2, j)`` and so on. ``e_up`` is the coefficient of the
    upwind neighbour's ``theta`` (``e-0`` for u >= 0, ``e+0`` for u < 0).
    Face arrays: ``s_x1`` has shape ``(n_x1 + 1, n_x2)`` and includes both
    Dirichlet edges; ``s_x2`` has shape ``(n_x1, n_x2 + 1)`` and is already
    multiplied by ``q**2``.
    """

    a00: np.ndarray
    a_p0: np.ndarray
    a_m0: np.ndarray
    a_0p: np.ndarray
    a_0m: np.ndarray
    e00: np.ndarray
    e_up: np.ndarray
    f: np.ndarray
    s_x1: np.ndarray
    s_x2: np.ndarray
    q2: float
    u: float
    dx1: float


@dataclass
class RegionLabel:
    mask: np.ndarray
    touches_left: bool = False

    def cavity_right(self) -> np.ndarray:
        return self.mask == CAVITY_RIGHT


@dataclass(frozen=True)
class SolverSettings:
    """Controls of the fixed-point iteration.

    Parameters
    ----------
    tol : float
        Bound on ``||dp||_1 + ||dtheta||_1 (+ |dZ|)`` between two sweeps.
    max_iters : int
        Sweep cap. Reaching it raises ``NonConvergence``.
    epsilon_extension : bool
        Extend ``T`` one cell onto full film next to the pressurised cavity.
    theta_full_threshold : float
        Cells with theta below this value count as cavitated when flooding.
    method : {"line", "point"}
        ``"point"`` is the cell-by-cell Gauss-Seidel sweep. ``"line"`` solves
        every x1-line exactly (tridiagonal solve plus an active-set loop),
        which reaches the same fixed point in far fewer sweeps.
    omega : float
        Over-relaxation of pressure updates on cells that stay full film.
    max_active : int
        Active-set passes per line before the line is accepted as is.
    x2_harmonics : int
        Fourier harmonics along x2 (besides the mean) of the coarse pressure
        correction applied before every line sweep on 2D grids; -1 turns the
        correction off.
    """

    tol: float = 1e-8
    max_iters: int = 100_000
    epsilon_extension: bool = True
    theta_full_threshold: float = 1.0
    method: str = "line"
    omega: float = 1.0
    max_active: int = 50
    x2_harmonics: int = 2

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError(f"solver.tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ConfigurationError(f"solver.max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.theta_full_threshold <= 1.0:
            raise ConfigurationError("solver.theta_full_threshold must lie in (0, 1]")
        if self.method not in METHODS:
            raise ConfigurationError(
                f"solver.method must be one of {METHODS}, got {self.method!r}"
            )
        if not 0.0 < self.omega < 2.0:
            raise ConfigurationError(f"solver.omega must lie in (0, 2), got {self.omega}")
        if self.max_active < 1:
            raise ConfigurationError("solver.max_active must be >= 1")
        if self.x2_harmonics < -1:
            raise ConfigurationError("solver.x2_harmonics must be >= -1")


def _check_model(model: str):
    if model not in MODELS:
        raise ConfigurationError(f"model must be one of {MODELS}, got {model!r}")


def _edge_gaps(h: np.ndarray, h_edges):
    if h_edges is None:
        return h[0].copy(), h[-1].copy()
    left, right = h_edges
    n2 = h.shape[1]
    return (np.broadcast_to(np.asarray(left, float), (n2,)).copy(),
            np.broadcast_to(np.asarray(right, float), (n2,)).copy())


def face_conductances(h: np.ndarray, grid: Grid, h_edges=None):
    """Return ``(s_x1, s_x2)``; see :class:`StencilCoefficients` for shapes."""
    hL, hR = _edge_gaps(h, h_edges)
    h3 = h**3
    n1, n2 = h.shape
    s_x1 = np.empty((n1 + 1, n2))
    s_x1[1:-1] = 0.5 * (h3[:-1] + h3[1:])
    s_x1[0] = hL**3 + h3[0]
    s_x1[-1] = hR**3 + h3[-1]
    q2 = (grid.dx1 / grid.dx2) ** 2 if n2 > 1 else 0.0
    s_x2 = np.zeros((n1, n2 + 1))
    if n2 > 1:
        s_x2[:, 1:-1] = 0.5 * (h3[:, :-1] + h3[:, 1:])
        if grid.periodic_x2:
            wrap = 0.5 * (h3[:, 0] + h3[:, -1])
            s_x2[:, 0] = wrap
            s_x2[:, -1] = wrap
        s_x2 *= q2
    return s_x1, s_x2


def assemble_coefficients(h_now, h_prev, theta_prev, u: float, dt: float, grid: Grid,
                          h_edges=None) -> StencilCoefficients:
    """Build the per-cell coefficients of one time step.

    ``dt = None`` gives the stationary balance (no storage terms).
    """
    h_now = np.asarray(h_now, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    if h_now.shape != grid.shape:
        raise ConfigurationError(f"gap shape {h_now.shape} does not match grid {grid.shape}")
    if not (np.all(h_now > 0) and np.all(h_prev > 0)):
        raise ConfigurationError("gap must be positive to assemble the stencil")
    if dt is not None and not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    dx1 = grid.dx1
    s_x1, s_x2 = face_conductances(h_now, grid, h_edges)
    a_m0 = -s_x1[:-1]
    a_p0 = -s_x1[1:]
    a_0m = -s_x2[:, :-1]
    a_0p = -s_x2[:, 1:]
    a00 = -(a_m0 + a_p0 + a_0m + a_0p)
    tcoef = 0.0 if dt is None else 2.0 * dx1**2 / dt
    e00 = (abs(u) * dx1 + tcoef) * h_now
    e_up = np.zeros_like(h_now)
    if u > 0:
        e_up[1:] = -u * dx1 * h_now[:-1]
    elif u < 0:
        e_up[:-1] = u * dx1 * h_now[1:]
    f = tcoef * h_prev * np.asarray(theta_prev, dtype=float)
    q2 = (dx1 / grid.dx2) ** 2 if grid.n_x2 > 1 else 0.0
    return StencilCoefficients(a00, a_p0, a_m0, a_0p, a_0m, e00, e_up, f, s_x1, s_x2, q2, u,
                               dx1)


def apply_boundary_conditions(h_left, h_right, h_feed: float, p_cc: float) -> FieldPair:
    """Edge values as a ``FieldPair`` of shape ``(2, n_x2)``; row 0 is x1 = 0.

    Pressure is 0 on the crankcase edge and ``p_cc`` on the chamber edge;
    the edge saturation is ``min(1, h_feed / h)``.
    """
    h_left = np.atleast_1d(np.asarray(h_left, dtype=float))
    h_right = np.atleast_1d(np.asarray(h_right, dtype=float))
    if not (np.all(h_left > 0) and np.all(h_right > 0)):
        raise ConfigurationError("edge gap must be positive")
    p = np.vstack([np.zeros_like(h_left), np.full_like(h_right, float(p_cc))])
    theta = np.vstack([np.minimum(1.0, h_feed / h_left), np.minimum(1.0, h_feed / h_right)])
    return FieldPair(p, theta)


def cell_residual(fields: FieldPair, coeffs: StencilCoefficients, edges: FieldPair,
                  h_edges) -> np.ndarray:
    """Scaled mass imbalance ``C - a00 p - e00 theta`` of every cell.

    Written with plain array operations, independently of the compiled
    sweeps, so it can check their output. ``edges`` comes from
    :func:`apply_boundary_conditions`.
    """
    p, th = fields.p, fields.theta
    hL, hR = (np.asarray(v, dtype=float) for v in h_edges)
    C = coeffs.f.copy()
    C += coeffs.s_x1[:-1] * np.vstack([edges.p[:1], p[:-1]])
    C += coeffs.s_x1[1:] * np.vstack([p[1:], edges.p[1:]])
    if p.shape[1] > 1:
        C += coeffs.s_x2[:, :-1] * np.roll(p, 1, axis=1)
        C += coeffs.s_x2[:, 1:] * np.roll(p, -1, axis=1)
    c = abs(coeffs.u) * coeffs.dx1
    if coeffs.u > 0:
        C[1:] -= coeffs.e_up[1:] * th[:-1]
        C[0] += c * hL * edges.theta[0]
    elif coeffs.u < 0:
        C[:-1] -= coeffs.e_up[:-1] * th[1:]
        C[-1] += c * hR * edges.theta[1]
    return C - coeffs.a00 * p - coeffs.e00 * th


def flood_rightmost_component(theta, settings: SolverSettings, grid: Grid) -> RegionLabel:
    """Label the cavitated components that touch the x1 = 1 column.

    Breadth-first search over 4-neighbour connectivity, periodic in x2 when
    the grid is.
    """
    theta = np.ascontiguousarray(theta, dtype=float)
    labels = np.empty(theta.shape, dtype=np.int64)
    queue = np.empty(theta.size, dtype=np.int64)
    touches = K.flood_right(theta, grid.periodic_x2, settings.theta_full_threshold, labels, queue)
    return RegionLabel(labels, bool(touches))


def discrete_T(labels: RegionLabel, p_cc: float, settings: SolverSettings,
               grid: Grid) -> np.ndarray:
    T = np.empty(labels.mask.shape)
    K.build_T(np.ascontiguousarray(labels.mask, dtype=np.int64), float(p_cc),
              settings.epsilon_extension, grid.periodic_x2, T)
    return T


@dataclass
class StepProblem:
    """Everything a sweep needs for one time step, in kernel-ready form.

    ``storage`` is the previous-step term ``f``; ``p_right`` is the
    pressure imposed on the x1 = 1 edge and ``p_T`` the value used by the
    operator T (they differ only for the classical Elrod-Adams model, where
    both are zero).
    """

    grid: Grid
    h: np.ndarray
    h_left: np.ndarray
    h_right: np.ndarray
    storage: np.ndarray
    u: float
    tcoef: float
    h_feed: float
    p_right: float
    p_T: float
    model: str = "extended"

    @classmethod
    def build(cls, grid: Grid, h_now, h_prev, theta_prev, u, p_cc, dt, h_feed,
              h_edges=None, model="extended") -> "StepProblem":
        _check_model(model)
        h_now = np.ascontiguousarray(h_now, dtype=float)
        if not np.all(h_now > 0):
            raise ConfigurationError("gap must be positive")
        hL, hR = _edge_gaps(h_now, h_edges)
        tcoef = 0.0 if dt is None else 2.0 * grid.dx1**2 / dt
        if model == "reynolds":
            storage = tcoef * np.asarray(h_prev, dtype=float)
        else:
            storage = tcoef * np.asarray(h_prev, dtype=float) * np.asarray(theta_prev, dtype=float)
        p_right = 0.0 if model == "elrod_adams" else float(p_cc)
        p_T = float(p_cc) if model == "extended" else 0.0
        return cls(grid, h_now, hL, hR, np.ascontiguousarray(storage), float(u), tcoef,
                   float(h_feed), p_right, p_T, model)

    @property
    def q2(self) -> float:
        return (self.grid.dx1 / self.grid.dx2) ** 2 if self.grid.n_x2 > 1 else 0.0


def gauss_seidel_sweep(fields: FieldPair, problem: StepProblem, T: np.ndarray,
                       labels: RegionLabel | None = None, settings: SolverSettings | None = None):
    """One in-place pointwise sweep of the fixed-point map.

    Each cell takes ``p = (C - e00) / a00, theta = 1`` when that pressure is
    at least ``T``, otherwise ``p = T`` and ``theta = (C - a00 T) / e00``
    clipped to [0, 1]. Cells are visited with i following the flow.

    Returns ``(sum |dp|, sum |dtheta|, min_pre_clamp)``, the last being the
    smallest unclipped theta computed on the pressurised cavity.
    """
    settings = settings or SolverSettings()
    grid = problem.grid
    if labels is None:
        labels = flood_rightmost_component(fields.theta, settings, grid)
    stats = np.zeros(10)
    dp, dth, _ = K.sweep(fields.p, fields.theta, problem.h, problem.h_left, problem.h_right,
                         problem.storage, np.ascontiguousarray(T, dtype=float), problem.u,
                         grid.dx1, problem.q2, problem.tcoef, grid.periodic_x2, problem.h_feed,
                         0.0, problem.p_right, problem.model == "reynolds",
                         np.ascontiguousarray(labels.mask, dtype=np.int64), stats,
                         settings.theta_full_threshold, settings.omega)
    if stats[1]:
        raise DegenerateCell("cavitated cell with zero storage coefficient e00")
    return dp, dth, stats[0]


@dataclass
class StepResult:
    fields: FieldPair
    iterations: int
    labels: RegionLabel
    T: np.ndarray
    change: float
    min_pre_clamp: float = np.inf


class Workspace:
    """Scratch arrays reused across the steps of one simulation."""

    def __init__(self, grid: Grid):
        n1, n2 = grid.shape
        self.h = np.empty((n1, n2))
        self.h_left = np.empty(n2)
        self.h_right = np.empty(n2)
        self.T = np.zeros((n1, n2))
        self.labels = np.zeros((n1, n2), dtype=np.int64)
        self.queue = np.empty(n1 * n2, dtype=np.int64)
        self.stats = np.zeros(10)
        self.work = np.zeros((12, n1))
        self.full = np.zeros(n1, dtype=np.bool_)
        self.periodic = grid.periodic_x2
        self._coarse = {}

    def coarse(self, harmonics: int):
        """Basis and scratch of the modal correction for ``harmonics``."""
        if harmonics not in self._coarse:
            n1, n2 = self.h.shape
            basis = x2_basis(n2, self.periodic, harmonics)
            M = basis.shape[0]
            self._coarse[harmonics] = (basis, np.zeros((n1, M, M)), np.zeros((n1, M, M)),
                                       np.zeros((n1, M, M)), np.zeros((n1, M)),
                                       np.zeros((2, M, M)), np.zeros(M))
        return self._coarse[harmonics]


def x2_basis(n2: int, periodic: bool, harmonics: int) -> np.ndarray:
    """Rows are the x2 modes of the coarse correction, shape ``(M, n2)``.

    The mean plus ``harmonics`` cosine/sine pairs on a periodic axis, or the
    first ``harmonics + 1`` cosine modes otherwise. When that is not fewer
    modes than cells the identity is returned, which makes the correction
    an exact solve for the full-film pressure. 1D grids get no modes.
    """
    if n2 == 1 or harmonics < 0:
        return np.zeros((0, n2))
    j = np.arange(n2)
    if periodic:
        if 2 * harmonics + 1 >= n2:
            return np.eye(n2)
        rows = [np.ones(n2)]
        for k in range(1, harmonics + 1):
            rows += [np.cos(2 * np.pi * k * j / n2), np.sin(2 * np.pi * k * j / n2)]
    else:
        if harmonics + 1 >= n2:
            return np.eye(n2)
        rows = [np.cos(np.pi * k * (j + 0.5) / n2) for k in range(harmonics + 1)]
    return np.ascontiguousarray(np.array(rows))


def run_kernel(fields: FieldPair, problem: StepProblem, settings: SolverSettings,
               ws: Workspace, *, base=None, base_left=None, base_right=None, Z_start=0.0,
               Z_prev=0.0, V_prev=0.0, dynamic=False, dt=1.0, m=1.0, W_ext=0.0,
               load_factor=0.0, contact=(0.0, 0.0, 1.0, 1.0, 1.0)):
    """Call the compiled step iteration; returns the raw iteration count.

    Without ``dynamic`` the gap is ``problem.h`` itself; with it the gap is
    rebuilt from ``base + Z`` on every sweep.
    """
    grid = problem.grid
    if base is None:
        base, base_left, base_right = problem.h, problem.h_left, problem.h_right
    kc, fa, fb, fc, sigma = contact
    return K.solve_step(
        fields.p, fields.theta, base, base_left, base_right, ws.h, ws.h_left, ws.h_right,
        problem.storage, ws.T, ws.labels, ws.queue, ws.stats, float(Z_start), float(Z_prev),
        float(V_prev), bool(dynamic), problem.u, float(dt), grid.dx1, problem.q2,
        problem.tcoef, grid.periodic_x2, problem.h_feed, 0.0, problem.p_right, problem.p_T,
        settings.epsilon_extension, settings.theta_full_threshold, float(m), float(W_ext),
        float(load_factor), kc, fa, fb, fc, sigma, settings.tol, settings.max_iters,
        problem.model == "reynolds", settings.omega, settings.method == "line", ws.work,
        ws.full, settings.max_active, *ws.coarse(settings.x2_harmonics))


def check_kernel_outcome(iterations: int, ws: Workspace, problem: StepProblem,
                         settings: SolverSettings, t=None):
    """Translate the kernel status into exceptions."""
    stats = ws.stats
    if stats[1]:
        raise DegenerateCell("cavitated cell with zero storage coefficient e00")
    # a channel under a chamber pressure below the tolerance leaks nothing measurable
    if problem.p_T > settings.tol and stats[5]:
        raise BlowByChannel("pressurised cavity reaches the x1 = 0 edge", t=t)
    if iterations < 0:
        if stats[7]:
            from .exceptions import ContactPenetration

            raise ContactPenetration(f"non-positive gap for Z={stats[6]:.6g}")
        raise NonConvergence(
            f"no convergence after {settings.max_iters} iterations (change {stats[2]:.3e})",
            t=t, iterations=settings.max_iters, change=float(stats[2]),
        )


def solve_timestep(prev: FieldPair, h_now, h_prev, u: float, p_cc: float, dt: float,
                   settings: SolverSettings, grid: Grid, *, h_feed: float = 1.5,
                   h_edges=None, model: str = "extended", initial: FieldPair | None = None,
                   workspace: Workspace | None = None, t=None) -> StepResult:
    """Advance the hydrodynamic fields by one step at fixed gap.

    Parameters
    ----------
    prev : FieldPair
        Converged fields of the previous step; ``prev.theta`` feeds the storage term.
    h_now, h_prev : ndarray
        Gap at the new and old time level.
    u, p_cc, dt : float
        Liner speed, chamber pressure and time step (``dt=None`` for a
        stationary balance).
    h_edges : tuple of arrays, optional
        Gap on the x1 = 0 and x1 = 1 edges. Defaults to the first and last
        cell values.
    model : {"extended", "elrod_adams", "reynolds"}
    initial : FieldPair, optional
        Starting iterate; defaults to ``prev``.

    Raises
    ------
    NonConvergence
        ``settings.max_iters`` sweeps without meeting ``settings.tol``.
    BlowByChannel
        The pressurised cavity reaches the x1 = 0 edge while ``p_cc`` exceeds ``settings.tol``.
    """
    problem = StepProblem.build(grid, h_now, h_prev, prev.theta, u, p_cc, dt, h_feed,
                                h_edges, model)
    fields = (initial or prev).copy()
    fields.p = np.ascontiguousarray(fields.p)
    fields.theta = np.ascontiguousarray(fields.theta)
    ws = workspace or Workspace(grid)
    it = run_kernel(fields, problem, settings, ws)
    check_kernel_outcome(it, ws, problem, settings, t)
    labels = RegionLabel(ws.labels.copy(), bool(ws.stats[5]))
    return StepResult(fields, it, labels, ws.T.copy(), float(ws.stats[2]), float(ws.stats[0]))


def solve_reynolds_cavitation(h_now, u: float, p_cc: float, grid: Grid,
                              settings: SolverSettings | None = None, *, h_edges=None,
                              initial=None) -> np.ndarray:
    """Stationary Reynolds solution with the projection ``p = max(p, 0)``.

    Lubricant is not conserved inside the cavity: every cell carries the
    full-film Couette flux regardless of its state.
    """
    settings = settings or SolverSettings()
    h_now = np.asarray(h_now, dtype=float)
    start = FieldPair(np.zeros_like(h_now) if initial is None else initial, np.ones_like(h_now))
    res = solve_timestep(start, h_now, h_now, u, p_cc, None, settings, grid, h_feed=1.0,
                         h_edges=h_edges, model="reynolds")
    return res.fields.p
