"""Ring/liner gap geometry on a cell-centred grid.

The dimensionless gap is

    h(x1, x2, t) = Z(t) + h_ring(x1) + h_wear(x2) + dimple(x1, x2)

with ``x1`` along the stroke (ring length, 0 at the crankcase edge, 1 at the
combustion-chamber edge) and ``x2`` circumferential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, ContactPenetration

DEFAULT_BORE_RADIUS = 41.0


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid.

    Arrays defined on the grid have shape ``(n_x1, n_x2)`` and are indexed
    ``[i, j]`` with ``i`` along x1.
    """

    n_x1: int = 200
    n_x2: int = 1
    length_x1: float = 1.0
    length_x2: float = 2.0 * math.pi * DEFAULT_BORE_RADIUS
    periodic_x2: bool = True

    def __post_init__(self):
        if self.n_x1 < 2:
            raise ConfigurationError(f"grid.n_x1 must be >= 2, got {self.n_x1}")
        if self.n_x2 < 1:
            raise ConfigurationError(f"grid.n_x2 must be >= 1, got {self.n_x2}")
        if not (self.length_x1 > 0 and self.length_x2 > 0):
            raise ConfigurationError("grid lengths must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_x1, self.n_x2)

    @property
    def dx1(self) -> float:
        return self.length_x1 / self.n_x1

    @property
    def dx2(self) -> float:
        return self.length_x2 / self.n_x2

    @property
    def x1(self) -> np.ndarray:
        return (np.arange(self.n_x1) + 0.5) * self.dx1

    @property
    def x2(self) -> np.ndarray:
        return (np.arange(self.n_x2) + 0.5) * self.dx2

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")


@dataclass(frozen=True)
class RingProfile:
    """Parabolic ring crown, ``aspect * (x1 - 0.5)**2 / (2 R)``.

    ``aspect`` is the ratio L/H of the in-plane to the gap scale.
    """

    R: float = 64.0
    aspect: float = 1000.0

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigurationError(f"ring.R must be > 0, got {self.R}")

    @classmethod
    def from_edge_height(cls, delta_h: float, aspect: float = 1000.0) -> "RingProfile":
        """Ring whose height at x1 = 0 and x1 = 1 equals ``delta_h``."""
        return cls(R=aspect * 0.25 / (2.0 * delta_h), aspect=aspect)

    @property
    def edge_height(self) -> float:
        return ring_height(1.0, self)


@dataclass(frozen=True)
class WearProfile:
    delta: float = 0.0
    c: float = 0.5 * DEFAULT_BORE_RADIUS
    center: float = math.pi * DEFAULT_BORE_RADIUS
    period: float | None = 2.0 * math.pi * DEFAULT_BORE_RADIUS

    def __post_init__(self):
        if self.delta < 0:
            raise ConfigurationError(f"wear.delta must be >= 0, got {self.delta}")
        if not self.c > 0:
            raise ConfigurationError(f"wear.c must be > 0, got {self.c}")


@dataclass(frozen=True)
class DimpleTexture:
    """Rows of elliptical dimples with a paraboloid-cap cross section."""

    depth: float = 1.0
    len_x1: float = 0.08
    len_x2: float = 0.06
    pitch_x2: float = 0.1
    centers_x1: tuple[float, ...] = (0.3, 0.5, 0.7)

    def __post_init__(self):
        if self.depth < 0:
            raise ConfigurationError("texture.depth must be >= 0")
        if not (self.len_x1 > 0 and self.len_x2 > 0 and self.pitch_x2 > 0):
            raise ConfigurationError("texture lengths must be positive")
        if self.len_x2 > self.pitch_x2:
            raise ConfigurationError("texture.len_x2 must not exceed texture.pitch_x2")


@dataclass(frozen=True)
class GapModel:
    ring: RingProfile = field(default_factory=RingProfile)
    wear: WearProfile = field(default_factory=WearProfile)
    texture: DimpleTexture | None = None
    h_feed: float = 1.5

    def __post_init__(self):
        if not self.h_feed > 0:
            raise ConfigurationError(f"h_feed must be > 0, got {self.h_feed}")

    def shape_height(self, x1, x2):
        """Gap minus the dynamic offset Z, evaluated pointwise."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        h = ring_height(x1, self.ring) + wear_height(x2, self.wear)
        if self.texture is not None:
            h = h + texture_depression(x1, x2, self.texture)
        return h

    def ring_slope(self, x1, x2):
        """x1-derivative of the ring surface (crown plus dimples)."""
        x1 = np.asarray(x1, dtype=float)
        slope = self.ring.aspect * (x1 - 0.5) / self.ring.R
        if self.texture is not None:
            slope = slope + _texture_slope_x1(x1, np.asarray(x2, dtype=float), self.texture)
        return slope


def ring_height(x1, ring: RingProfile):
    x1 = np.asarray(x1, dtype=float)
    out = ring.aspect * (x1 - 0.5) ** 2 / (2.0 * ring.R)
    return out if out.ndim else float(out)


def wear_height(x2, wear: WearProfile):
    x2 = np.asarray(x2, dtype=float)
    d = x2 - wear.center
    if wear.period is not None:
        # nearest periodic image of the Gaussian centre
        d = d - wear.period * np.round(d / wear.period)
    out = wear.delta * np.exp(-(d**2) / wear.c**2)
    return out if out.ndim else float(out)


def _nearest_dimple_offsets(x1, x2, tex: DimpleTexture):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    dy = np.mod(x2, tex.pitch_x2) - 0.5 * tex.pitch_x2
    rows = np.asarray(tex.centers_x1, dtype=float)
    if rows.size == 0:
        return np.full(np.broadcast(x1, x2).shape, np.inf), dy
    offsets = x1[..., None] - rows
    k = np.argmin(np.abs(offsets), axis=-1)
    dx = np.take_along_axis(offsets, k[..., None], axis=-1)[..., 0]
    return dx, dy


def texture_depression(x1, x2, tex: DimpleTexture):
    """Depth of the dimple at (x1, x2); zero outside every dimple."""
    dx, dy = _nearest_dimple_offsets(x1, x2, tex)
    r2 = (2.0 * dx / tex.len_x1) ** 2 + (2.0 * dy / tex.len_x2) ** 2
    out = np.where(r2 < 1.0, tex.depth * (1.0 - r2), 0.0)
    return out if out.ndim else float(out)


def _texture_slope_x1(x1, x2, tex: DimpleTexture):
    dx, dy = _nearest_dimple_offsets(x1, x2, tex)
    r2 = (2.0 * dx / tex.len_x1) ** 2 + (2.0 * dy / tex.len_x2) ** 2
    return np.where(r2 < 1.0, -tex.depth * 8.0 * dx / tex.len_x1**2, 0.0)


def shape_field(grid: Grid, model: GapModel) -> np.ndarray:
    """Gap at every cell centre for Z = 0."""
    X1, X2 = grid.centers()
    return np.broadcast_to(model.shape_height(X1, X2), grid.shape).astype(float)


def boundary_shape(grid: Grid, model: GapModel) -> tuple[np.ndarray, np.ndarray]:
    """Gap for Z = 0 on the x1 = 0 and x1 = length_x1 edges, one value per x2 cell."""
    x2 = grid.x2
    left = np.broadcast_to(model.shape_height(0.0, x2), x2.shape).astype(float)
    right = np.broadcast_to(model.shape_height(grid.length_x1, x2), x2.shape).astype(float)
    return left, right


def gap_field(grid: Grid, model: GapModel, Z: float) -> np.ndarray:
    h = shape_field(grid, model) + Z
    if not np.all(h > 0):
        raise ContactPenetration(
            f"non-positive gap (min {h.min():.4g}) for Z={Z:.6g}"
        )
    return h
