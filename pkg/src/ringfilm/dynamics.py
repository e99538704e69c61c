"""Radial ring dynamics, loads, asperity contact and friction.

Loads and friction are midpoint sums ``w dx1 dx2 sum(.)``. With the default
``"circumference"`` normalization ``w = 1 / (2 pi B_r)``, which makes them
forces per unit circumferential length like the applied and back-pressure
loads; ``"bore_radius"`` uses ``w = 1 / B_r``. When the grid only covers one
period of a circumferentially periodic pattern (a textured strip),
``copies`` multiplies the sum by the number of periods around the bore.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as K
from .cavitation import (
    FieldPair,
    RegionLabel,
    SolverSettings,
    StepProblem,
    Workspace,
    check_kernel_outcome,
    run_kernel,
)
from .exceptions import ConfigurationError
from .geometry import DEFAULT_BORE_RADIUS, GapModel, Grid, boundary_shape, shape_field
from .scales import DEFAULT_SCALES, FundamentalScales


NORMALIZATIONS = ("circumference", "bore_radius")


@dataclass(frozen=True)
class RingState:
    Z: float
    V: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.Z) and math.isfinite(self.V)):
            raise ConfigurationError(f"ring state must be finite, got Z={self.Z}, V={self.V}")


@dataclass(frozen=True)
class DynamicsConfig:
    """Ring inertia and external loads, all dimensionless and per unit width."""

    m: float = 1.25e-5
    W_applied: float = -1.666e-4
    gamma: float = 0.9
    L_ring: float = 1.0
    B_r: float = DEFAULT_BORE_RADIUS
    load_normalization: str = "circumference"

    def __post_init__(self):
        if self.load_normalization not in NORMALIZATIONS:
            raise ConfigurationError(
                f"dynamics.load_normalization must be one of {NORMALIZATIONS}, "
                f"got {self.load_normalization!r}"
            )
        if not self.m > 0:
            raise ConfigurationError(f"dynamics.m must be > 0, got {self.m}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"dynamics.gamma must lie in [0, 1], got {self.gamma}")
        if not (self.L_ring > 0 and self.B_r > 0):
            raise ConfigurationError("dynamics.L_ring and dynamics.B_r must be > 0")


@dataclass(frozen=True)
class ContactModel:
    """Greenwood-Tripp asperity contact with the ``A (B - lam)**C`` fit of F_5/2.

    ``E_prime`` is in Pa; ``sigma`` is in units of the gap scale.
    """

    eta_beta_sigma: float = 0.04
    sigma_over_beta: float = 1e-3
    E_prime: float = 2e11
    sigma: float = 0.2
    mu_c: float = 0.11
    fit: tuple[float, float, float] = (4.4086e-5, 4.0, 6.804)

    def __post_init__(self):
        values = (self.eta_beta_sigma, self.sigma_over_beta, self.E_prime, self.sigma,
                  self.mu_c, *self.fit)
        if not all(v > 0 for v in values):
            raise ConfigurationError("contact parameters must all be positive")

    def prefactor(self, scales: FundamentalScales = DEFAULT_SCALES) -> float:
        """Dimensionless contact pressure per unit ``F_5/2``."""
        return (math.pi * 16.0 * math.sqrt(2.0) / 15.0 * self.eta_beta_sigma**2
                * math.sqrt(self.sigma_over_beta) * self.E_prime / scales.pressure_scale)

    def kernel_args(self, scales: FundamentalScales = DEFAULT_SCALES):
        A, B, C = self.fit
        return (self.prefactor(scales), A, B, C, self.sigma)


@dataclass(frozen=True)
class CycleProfile:
    u_of_t: Callable[[float], float]
    pcc_of_t: Callable[[float], float]
    duration: float = 600.0

    def __call__(self, t: float) -> tuple[float, float]:
        return float(self.u_of_t(t)), float(self.pcc_of_t(t))


def contact_pressure(h, contact: ContactModel, scales: FundamentalScales = DEFAULT_SCALES):
    h = np.asarray(h, dtype=float)
    A, B, C = contact.fit
    lam = h / contact.sigma
    F = np.where(lam < B, A * np.clip(B - lam, 0.0, None) ** C, 0.0)
    out = contact.prefactor(scales) * F
    return out if out.ndim else float(out)


def _weight(B_r: float, normalization: str) -> float:
    if normalization == "circumference":
        return 1.0 / (2.0 * math.pi * B_r)
    if normalization == "bore_radius":
        return 1.0 / B_r
    raise ConfigurationError(f"unknown load normalization {normalization!r}")


def load_factor(grid: Grid, B_r: float, copies: float = 1.0,
                normalization: str = "circumference") -> float:
    return copies * grid.dx1 * grid.dx2 * _weight(B_r, normalization)


def hydrodynamic_load(p, grid: Grid, B_r: float, copies: float = 1.0,
                      normalization: str = "circumference") -> float:
    return load_factor(grid, B_r, copies, normalization) * float(np.sum(p))


def contact_load(h, contact: ContactModel, grid: Grid, B_r: float, copies: float = 1.0,
                 normalization: str = "circumference",
                 scales: FundamentalScales = DEFAULT_SCALES) -> float:
    return (load_factor(grid, B_r, copies, normalization)
            * float(np.sum(contact_pressure(h, contact, scales))))


def back_pressure_load(p_cc: float, cfg: DynamicsConfig) -> float:
    if p_cc < 0:
        raise ConfigurationError(f"p_cc must be >= 0, got {p_cc}")
    return -cfg.gamma * p_cc * cfg.L_ring


def advance_ring(state: RingState, W_total: float, dt: float, cfg: DynamicsConfig) -> RingState:
    """Position predictor ``Z + dt V + dt**2 W / (2 m)``; velocity untouched."""
    return RingState(state.Z + dt * state.V + dt * dt / (2.0 * cfg.m) * W_total, state.V)


def finalize_velocity(state: RingState, W_total: float, dt: float, cfg: DynamicsConfig,
                      Z: float | None = None) -> RingState:
    """Velocity update ``V + dt W / m`` with the converged loads."""
    return RingState(state.Z if Z is None else Z, state.V + dt / cfg.m * W_total)


def _couette_weight(theta, p, model: str, theta_s: float):
    if model == "reynolds":
        return (p > 0).astype(float)
    return np.where(theta > theta_s, theta, 0.0)


def friction_force(fields: FieldPair, h, u: float, contact: ContactModel, grid: Grid,
                   B_r: float, scales: FundamentalScales = DEFAULT_SCALES, *,
                   ring_slope=None, copies: float = 1.0, model: str = "extended",
                   theta_s: float = 0.95, normalization: str = "circumference") -> float:
    """Friction force per unit width on the ring, in N/m.

    Fields are converted to SI before the quadrature. ``ring_slope`` is the
    dimensionless x1-derivative of the ring surface at the cell centres
    (zero if omitted). Pressure gradients use central differences with
    one-sided differences on the first and last cells.
    """
    s = scales
    p_si = np.asarray(fields.p, dtype=float) * s.pressure_scale
    h_si = np.asarray(h, dtype=float) * s.H
    u_si = u * s.U
    dx1 = grid.dx1 * s.L
    dx2 = grid.dx2 * s.L
    g = _couette_weight(np.asarray(fields.theta), np.asarray(fields.p), model, theta_s)
    integrand = s.mu * u_si * g / h_si
    if p_si.shape[0] > 1:
        integrand = integrand - 0.5 * h_si * np.gradient(p_si, dx1, axis=0)
    if ring_slope is not None:
        integrand = integrand - p_si * np.asarray(ring_slope, dtype=float) * (s.H / s.L)
    integrand = integrand + contact.mu_c * contact_pressure(h, contact, s) * s.pressure_scale
    # B_r is dimensionless; the weight converts to per metre of circumference
    return copies * dx1 * dx2 * _weight(B_r, normalization) / s.L * float(np.sum(integrand))


PULSE_WIDTH = 36.0


def ccp_gaussian_pulse(t, A_cc: float, t0: float = 300.0, width: float = PULSE_WIDTH):
    """``A_cc exp(-(t - t0)**2 / width**2)``.

    The default width puts the pulse at about 14 atm at ``t = 260`` and
    0.036 atm at ``t = 203`` for ``A_cc = 50`` atm.
    """
    if not width > 0:
        raise ConfigurationError(f"pulse width must be > 0, got {width}")
    return A_cc * np.exp(-((np.asarray(t, dtype=float) - t0) ** 2) / width**2)


def four_stroke_profile(t, A_cc: float, period: float = 300.0, t0: float = 300.0,
                        width: float = PULSE_WIDTH):
    """Liner speed ``sin(2 pi t / period)`` and a Gaussian chamber-pressure pulse."""
    u = np.sin(2.0 * np.pi * np.asarray(t, dtype=float) / period)
    pcc = ccp_gaussian_pulse(t, A_cc, t0, width)
    if np.ndim(u) == 0:
        return float(u), float(pcc)
    return u, pcc


@dataclass
class StepOutcome:
    """Result of one coupled step."""

    state: RingState
    fields: FieldPair
    labels: RegionLabel
    T: np.ndarray
    h: np.ndarray
    iterations: int
    W_h: float
    W_con: float
    W_cc: float
    W_applied: float
    change: float

    @property
    def W_total(self) -> float:
        return self.W_h + self.W_con + self.W_applied + self.W_cc


class CoupledSolver:
    """Hydrodynamics coupled to the ring's radial motion.

    Each sweep of the fixed-point iteration recomputes the loads from the
    latest pressure, predicts ``Z``, rebuilds the gap, refloods and updates
    ``T``, then sweeps the fields; the loop stops when the combined change
    of ``p``, ``theta`` and ``Z`` falls below ``settings.tol``.

    Parameters
    ----------
    model : {"extended", "elrod_adams", "reynolds"}
        The classical Elrod-Adams variant solves the film with zero chamber
        pressure but still feels the back-pressure load on the ring.
    fixed_Z : bool
        Hold ``Z`` at its initial value (stationary studies).
    """

    def __init__(self, grid: Grid, gap: GapModel, dynamics: DynamicsConfig | None = None,
                 contact: ContactModel | None = None, settings: SolverSettings | None = None,
                 *, model: str = "extended", copies: float = 1.0, fixed_Z: bool = False,
                 scales: FundamentalScales = DEFAULT_SCALES):
        self.grid = grid
        self.gap = gap
        self.dynamics = dynamics or DynamicsConfig()
        self.contact = contact or ContactModel()
        self.settings = settings or SolverSettings()
        self.model = model
        self.copies = float(copies)
        self.fixed_Z = fixed_Z
        self.scales = scales
        self.base = np.ascontiguousarray(shape_field(grid, gap))
        left, right = boundary_shape(grid, gap)
        self.base_left = np.ascontiguousarray(left)
        self.base_right = np.ascontiguousarray(right)
        X1, X2 = grid.centers()
        self.ring_slope = np.broadcast_to(gap.ring_slope(X1, X2), grid.shape).astype(float)
        self.ws = Workspace(grid)
        self.factor = load_factor(grid, self.dynamics.B_r, self.copies,
                                  self.dynamics.load_normalization)
        self._contact_args = self.contact.kernel_args(scales)

    def gap_at(self, Z: float) -> np.ndarray:
        return self.base + Z

    def edges_at(self, Z: float):
        return self.base_left + Z, self.base_right + Z

    def initial_fields(self, Z: float) -> FieldPair:
        return FieldPair.initial(self.gap_at(Z), self.gap.h_feed)

    def loads(self, p, h, p_cc: float):
        W_h = self.factor * float(np.sum(p))
        W_con = self.factor * float(K.contact_sum(np.ascontiguousarray(h), *self._contact_args))
        W_cc = back_pressure_load(p_cc, self.dynamics)
        return W_h, W_con, W_cc

    def step(self, state: RingState, fields: FieldPair, u: float, p_cc: float, dt: float,
             t: float | None = None, guess: FieldPair | None = None) -> StepOutcome:
        """Advance one time step; ``state`` and ``fields`` are not modified.

        ``guess`` is an optional starting point of the iteration; the
        previous fields are used otherwise.
        """
        h_prev = self.gap_at(state.Z)
        hL, hR = self.edges_at(state.Z)
        problem = StepProblem.build(self.grid, h_prev, h_prev, fields.theta, u, p_cc, dt,
                                    self.gap.h_feed, (hL, hR), self.model)
        W_cc = back_pressure_load(p_cc, self.dynamics)
        W_ext = self.dynamics.W_applied + W_cc
        start = fields if guess is None else guess
        new = FieldPair(np.ascontiguousarray(start.p, dtype=float).copy(),
                        np.ascontiguousarray(start.theta, dtype=float).copy())
        it = run_kernel(new, problem, self.settings, self.ws, base=self.base,
                        base_left=self.base_left, base_right=self.base_right,
                        Z_start=state.Z, Z_prev=state.Z, V_prev=state.V,
                        dynamic=not self.fixed_Z, dt=dt, m=self.dynamics.m, W_ext=W_ext,
                        load_factor=self.factor, contact=self._contact_args)
        check_kernel_outcome(it, self.ws, problem, self.settings, t)
        Z = float(self.ws.stats[6])
        h = self.ws.h.copy()
        W_h, W_con, _ = self.loads(new.p, h, p_cc)
        W_total = W_h + W_con + self.dynamics.W_applied + W_cc
        if self.fixed_Z:
            new_state = RingState(state.Z, 0.0)
        else:
            new_state = finalize_velocity(state, W_total, dt, self.dynamics, Z=Z)
        labels = RegionLabel(self.ws.labels.copy(), bool(self.ws.stats[5]))
        return StepOutcome(new_state, new, labels, self.ws.T.copy(), h, it, W_h, W_con, W_cc,
                           self.dynamics.W_applied, float(self.ws.stats[2]))

    def friction(self, fields: FieldPair, h, u: float) -> float:
        return friction_force(fields, h, u, self.contact, self.grid, self.dynamics.B_r,
                              self.scales, ring_slope=self.ring_slope, copies=self.copies,
                              model=self.model, normalization=self.dynamics.load_normalization)


def coupled_step(state: RingState, fields: FieldPair, gap: GapModel, u: float, p_cc: float,
                 dt: float, grid: Grid, dynamics: DynamicsConfig | None = None,
                 contact: ContactModel | None = None, settings: SolverSettings | None = None,
                 *, model: str = "extended", copies: float = 1.0) -> StepOutcome:
    """One coupled step without keeping a solver around."""
    solver = CoupledSolver(grid, gap, dynamics, contact, settings, model=model, copies=copies)
    return solver.step(state, fields, u, p_cc, dt)
