"""Fundamental scales and conversion to/from dimensionless variables.

Pressures are gauge pressures, so a dimensionless pressure of zero is the
ambient pressure (1 atm absolute).
"""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import ConfigurationError

ATM = 101325.0  # Pa

KINDS = (
    "length_plane",
    "length_gap",
    "time",
    "speed",
    "pressure",
    "force_per_width",
    "mass_per_width",
)


@dataclass(frozen=True)
class FundamentalScales:
    """Reference scales of the ring-liner problem.

    Parameters
    ----------
    H : float
        Gap-thickness scale in m.
    L : float
        In-plane length scale in m.
    mu : float
        Lubricant dynamic viscosity in Pa s.
    U : float
        Reference sliding speed in m/s.
    """

    H: float = 1e-6
    L: float = 1e-3
    mu: float = 4e-3
    U: float = 10.0

    def __post_init__(self):
        for name in ("H", "L", "mu", "U"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigurationError(f"scales.{name} must be > 0, got {value!r}")

    @property
    def time_scale(self) -> float:
        return self.L / self.U

    @property
    def pressure_scale(self) -> float:
        return 6.0 * self.mu * self.U * self.L / self.H**2

    @property
    def force_per_width_scale(self) -> float:
        return 6.0 * self.mu * self.U * self.L**2 / self.H**2

    @property
    def mass_per_width_scale(self) -> float:
        return 6.0 * self.mu * self.L**4 / (self.H**3 * self.U)

    def scale_of(self, kind: str) -> float:
        try:
            return {
                "length_plane": self.L,
                "length_gap": self.H,
                "time": self.time_scale,
                "speed": self.U,
                "pressure": self.pressure_scale,
                "force_per_width": self.force_per_width_scale,
                "mass_per_width": self.mass_per_width_scale,
            }[kind]
        except KeyError:
            raise ConfigurationError(
                f"unknown quantity kind {kind!r}; expected one of {', '.join(KINDS)}"
            ) from None

    def to_dimensionless(self, value, kind: str):
        return value / self.scale_of(kind)

    def from_dimensionless(self, value, kind: str):
        return value * self.scale_of(kind)

    def atm_to_dimensionless(self, p_atm):
        """Gauge pressure in atm to the dimensionless pressure."""
        return p_atm * ATM / self.pressure_scale

    def dimensionless_to_atm(self, p):
        return p * self.pressure_scale / ATM


DEFAULT_SCALES = FundamentalScales()
