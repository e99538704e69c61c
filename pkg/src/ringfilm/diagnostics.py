"""Post-step and post-run analysis: film thickness, mass balance, blow-by."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .cavitation import CAVITY_RIGHT, FieldPair, RegionLabel
from .exceptions import ConfigurationError
from .geometry import Grid


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    Z: float
    V: float
    W_h: float
    W_con: float
    W_cc: float
    friction_SI: float
    mft: float
    blow_by_distance: float
    iterations: int
    converged: bool = True


@dataclass(frozen=True)
class BlowByConfig:
    epsilon_b: float = 0.02
    N_b: int = 4

    def __post_init__(self):
        if not self.epsilon_b > 0:
            raise ConfigurationError(f"blowby.epsilon_b must be > 0, got {self.epsilon_b}")
        if self.N_b < 1:
            raise ConfigurationError(f"blowby.N_b must be >= 1, got {self.N_b}")


def minimum_film_thickness(h) -> float:
    h = np.asarray(h, dtype=float)
    if h.size == 0:
        raise ConfigurationError("empty gap field")
    return float(h.min())


def boundary_fluxes(fields: FieldPair, h_now, h_edges, u: float, p_cc: float, h_feed: float,
                    grid: Grid):
    """Net lubricant inflow through the x1 = 0 and x1 = 1 edges.

    Values are in the units of the scaled cell balance (multiplied by
    ``2 dx1**2``) and summed over x2. Returns ``(inflow, gross_influx)``
    where ``gross_influx`` adds only the positive contributions.
    """
    p, th = fields.p, fields.theta
    h = np.asarray(h_now, dtype=float)
    hL, hR = (np.broadcast_to(np.asarray(v, dtype=float), (h.shape[1],)) for v in h_edges)
    c = abs(u) * grid.dx1
    left = (hL**3 + h[0] ** 3) * (0.0 - p[0])
    right = (hR**3 + h[-1] ** 3) * (p_cc - p[-1])
    if u > 0:
        left = left + c * np.minimum(hL, h_feed)
        right = right - c * h[-1] * th[-1]
    elif u < 0:
        right = right + c * np.minimum(hR, h_feed)
        left = left - c * h[0] * th[0]
    terms = np.concatenate([left, right])
    return float(terms.sum()), float(terms[terms > 0].sum())


def mass_balance_residual(prev: FieldPair, curr: FieldPair, h_prev, h_now, u: float,
                          dt: float, grid: Grid, *, h_edges, p_cc: float = 0.0,
                          h_feed: float = 1.5, eps: float = 1e-300) -> float:
    """Relative global imbalance ``|inflow - storage change| / scale`` of one step.

    ``p_cc`` is the pressure actually imposed on the x1 = 1 edge (zero for
    the classical Elrod-Adams model). The storage change is
    ``(2 dx1**2 / dt) sum(h theta|new - h theta|old)``; the scale is the
    larger of the gross boundary influx and the summed absolute cell storage
    changes, so a step whose cell changes cancel (squeeze at rest) is not
    judged on round-off.
    """
    inflow, gross = boundary_fluxes(curr, h_now, h_edges, u, p_cc, h_feed, grid)
    if dt is None:
        storage = stored = 0.0
    else:
        tcoef = 2.0 * grid.dx1**2 / dt
        cells = tcoef * (np.asarray(h_now) * curr.theta - np.asarray(h_prev) * prev.theta)
        storage = float(cells.sum())
        stored = float(np.abs(cells).sum())
    return abs(inflow - storage) / max(gross, stored, eps)


def _low_pressure_mask(p, p_cc: float, tol_p: float):
    return np.asarray(p) < p_cc - tol_p


def blow_by_distance(labels: RegionLabel, p, p_cc: float, grid: Grid, tol: float = 1e-8) -> float:
    """Smallest centre-to-centre distance between the pressurised cavity and
    the cells below chamber pressure.

    Cells count as below chamber pressure when ``p < p_cc - 10 tol``.
    Returns ``inf`` when either set is empty (always so for ``p_cc = 0``).
    """
    if p_cc < 0:
        raise ConfigurationError(f"p_cc must be >= 0, got {p_cc}")
    right = np.asarray(labels.mask) == CAVITY_RIGHT
    low = _low_pressure_mask(p, p_cc, 10.0 * tol)
    if not right.any() or not low.any():
        return math.inf
    n2 = right.shape[1]
    wrap = grid.periodic_x2 and n2 > 1
    if wrap:
        low_ext = np.concatenate([low, low, low], axis=1)
    else:
        low_ext = low
    dist = ndimage.distance_transform_edt(~low_ext, sampling=(grid.dx1, grid.dx2))
    if wrap:
        dist = dist[:, n2:2 * n2]
    return float(dist[right].min())


def blow_by_criterion(d: float, cfg: BlowByConfig, grid: Grid, p_cc: float) -> bool:
    if not p_cc > 0:
        return False
    return bool(d <= max(cfg.epsilon_b * grid.length_x1, cfg.N_b * grid.dx1))


def _trapezoid(y, t):
    return float(np.trapezoid(y, t))


def friction_relative_difference(t_a, F_a, t_ref, F_ref) -> float:
    """``||F_a - F_ref||_1 / ||F_ref||_1`` on the reference time grid.

    ``F_a`` is linearly interpolated onto ``t_ref``; the norm is the
    trapezoid integral of the absolute value.
    """
    t_ref = np.asarray(t_ref, dtype=float)
    F_ref = np.asarray(F_ref, dtype=float)
    a = np.interp(t_ref, np.asarray(t_a, dtype=float), np.asarray(F_a, dtype=float))
    ref = _trapezoid(np.abs(F_ref), t_ref)
    if ref == 0:
        raise ConfigurationError("reference friction series has zero norm")
    return _trapezoid(np.abs(a - F_ref), t_ref) / ref


def time_average(t, y, t_start: float, t_end: float) -> float:
    """Trapezoid mean of ``y`` over ``[t_start, t_end]``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 2 or not t_start < t_end or t_start < t[0] - 1e-12 or t_end > t[-1] + 1e-12:
        raise ConfigurationError(
            f"averaging window [{t_start}, {t_end}] is empty or outside the series"
        )
    inside = (t > t_start) & (t < t_end)
    tt = np.concatenate([[t_start], t[inside], [t_end]])
    yy = np.interp(tt, t, y)
    return _trapezoid(yy, tt) / (t_end - t_start)


def free_boundary_slopes(p, theta, grid: Grid, threshold: float = 1.0):
    """First and second x1-derivatives of a 1D pressure at its free boundaries.

    For every switch between full film and cavity along x1 returns
    ``(x1_face, dp/dx1, d2p/dx1**2)`` evaluated with central differences at
    the full-film cell next to the interface. At a rupture point adjacent to
    the pressurised cavity the blow-by conditions read ``d2p <= 0`` and at a
    reformation point ``dp >= 0`` (taken along the outward direction).
    """
    p = np.asarray(p, dtype=float).ravel()
    full = np.asarray(theta, dtype=float).ravel() >= threshold
    dx = grid.dx1
    out = []
    for i in range(len(p) - 1):
        if full[i] == full[i + 1]:
            continue
        k = i if full[i] else i + 1
        lo, hi = max(k - 1, 0), min(k + 1, len(p) - 1)
        dp = (p[hi] - p[lo]) / ((hi - lo) * dx)
        d2 = (p[hi] - 2 * p[k] + p[lo]) / dx**2 if 0 < k < len(p) - 1 else math.nan
        out.append(((i + 1) * dx, dp, d2))
    return out
