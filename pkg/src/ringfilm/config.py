"""Scenario configuration: sectioned ``key = value`` files.

Every section maps onto a small dataclass. Fields left at ``None`` are
filled from per-scenario defaults by :func:`resolve`, so a file holding only
``[scenario] kind = ...`` describes a complete run. :func:`dump_config`
writes every resolved value, and parsing that text gives back an equal
config.

Example::

    [scenario]
    kind = full_cycle

    [ring]
    delta_h = 2.0

    [wear]
    delta = 0.045
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .cavitation import METHODS, MODELS, SolverSettings
from .diagnostics import BlowByConfig
from .dynamics import NORMALIZATIONS, PULSE_WIDTH, ContactModel, DynamicsConfig
from .exceptions import ConfigurationError
from .geometry import DEFAULT_BORE_RADIUS, DimpleTexture, GapModel, Grid, RingProfile, WearProfile
from .scales import FundamentalScales

KINDS = ("stationary_1d", "textured_transient", "model_compare", "full_cycle", "wear_sweep")
SPEED_MODES = ("constant", "sinusoid")
PCC_MODES = ("pulse", "constant")
INITIAL_STATES = ("auto", "feed", "elrod_adams")
STUDIES = ("single", "time_convergence", "mesh_convergence")


@dataclass(frozen=True)
class ScenarioSection:
    kind: str | None = None
    model: str = "extended"


@dataclass(frozen=True)
class ScalesSection:
    H: float = 1e-6
    L: float = 1e-3
    mu: float = 4e-3
    U: float = 10.0


@dataclass(frozen=True)
class MeshSection:
    n_x1: int = 200
    n_x2: int | None = None
    length_x2: float | None = None


@dataclass(frozen=True)
class RingSection:
    """Crown curvature, given either as ``R`` or as the edge height ``delta_h``."""

    R: float | None = None
    delta_h: float | None = None
    aspect: float = 1000.0
    h_feed: float | None = None


@dataclass(frozen=True)
class WearSection:
    delta: float = 0.0
    c: float = 0.5 * DEFAULT_BORE_RADIUS
    center: float | None = None


@dataclass(frozen=True)
class TextureSection:
    enabled: bool | None = None
    depth: float = 1.0
    len_x1: float = 0.08
    len_x2: float = 0.06
    pitch_x2: float = 0.1
    centers_x1: tuple[float, ...] = (0.3, 0.5, 0.7)


@dataclass(frozen=True)
class DynamicsSection:
    m: float = 1.25e-5
    W_applied: float = -1.666e-4
    gamma: float = 0.9
    L_ring: float = 1.0
    B_r: float = DEFAULT_BORE_RADIUS
    load_normalization: str = "circumference"
    Z0: float | None = None
    V0: float = 0.0
    fixed_Z: bool | None = None


@dataclass(frozen=True)
class ContactSection:
    eta_beta_sigma: float = 0.04
    sigma_over_beta: float = 1e-3
    E_prime: float = 2e11
    sigma: float = 0.2
    mu_c: float = 0.11
    fit_A: float = 4.4086e-5
    fit_B: float = 4.0
    fit_C: float = 6.804


@dataclass(frozen=True)
class SolverSection:
    tol: float = 1e-8
    max_iters: int = 100000
    epsilon_extension: bool = True
    theta_full_threshold: float = 1.0
    method: str = "line"
    omega: float = 1.0
    max_active: int = 50
    x2_harmonics: int = 2


@dataclass(frozen=True)
class CycleSection:
    """Liner speed and chamber pressure as functions of time.

    ``speed_mode = constant`` holds ``u = speed``; ``sinusoid`` uses
    ``speed * sin(2 pi t / period)``. ``pcc_mode = pulse`` is a Gaussian of
    amplitude ``A_cc_atm`` centred at ``t0``; ``constant`` holds ``A_cc_atm``.
    """

    speed_mode: str | None = None
    speed: float | None = None
    period: float = 300.0
    pcc_mode: str | None = None
    A_cc_atm: float | None = None
    t0: float = 300.0
    width: float = PULSE_WIDTH
    duration: float | None = None


@dataclass(frozen=True)
class TimeSection:
    """Time step: ``dt`` if set, else ``cfl dx1 / max(|u|, u_floor)``.

    ``cfl_windows`` lists ``start:end:courant`` triples separated by ``;``
    and replaces ``cfl`` inside each open interval; ``none`` disables them.
    ``dt_max`` caps the step (``0`` for no cap).
    """

    dt: float | None = None
    cfl: float = 1.0
    u_floor: float = 1e-3
    dt_max: float | None = None
    cfl_windows: str | None = None


@dataclass(frozen=True)
class BlowBySection:
    epsilon_b: float = 0.02
    N_b: int = 4


@dataclass(frozen=True)
class StationarySection:
    pcc_atm: tuple[float, ...] = (0.0, 50.0, 100.0)
    initial_state: str = "auto"
    stationary_steps: int = 100
    max_steps: int = 200000
    bisect: bool = False
    bisect_lo_atm: float = 100.0
    bisect_hi_atm: float = 140.0
    bisect_tol_atm: float = 1.0


@dataclass(frozen=True)
class TransientSection:
    study: str = "single"
    dt_sequence: tuple[float, ...] = (0.04, 0.02, 0.01, 0.005)
    dt_reference: float = 0.0025
    mesh_sequence: tuple[int, ...] = (50, 100, 200, 400)
    mesh_pcc_atm: float = 50.0
    mesh_duration: float = 10.0
    # a starved inlet has no sealing film when the chamber pressure is switched on
    mesh_h_feed: float = 3.0
    centerline_x2: float = 0.05


@dataclass(frozen=True)
class CompareSection:
    models: tuple[str, ...] = MODELS
    snapshot_times: tuple[float, ...] = (100.0, 260.0, 300.0)
    reference: str = "extended"


def _default_delta_h() -> tuple[float, ...]:
    return tuple(sorted({0.5 * k for k in range(1, 17)} | {3.91}))


def _default_delta() -> tuple[float, ...]:
    return tuple(round(0.005 * k, 3) for k in range(0, 13))


@dataclass(frozen=True)
class SweepSection:
    delta_h: tuple[float, ...] = field(default_factory=_default_delta_h)
    delta: tuple[float, ...] = field(default_factory=_default_delta)


@dataclass(frozen=True)
class OutputSection:
    snapshot_times: tuple[float, ...] = ()
    timeseries: str = "timeseries.csv"


SECTIONS = {
    "scenario": ScenarioSection,
    "scales": ScalesSection,
    "mesh": MeshSection,
    "ring": RingSection,
    "wear": WearSection,
    "texture": TextureSection,
    "dynamics": DynamicsSection,
    "contact": ContactSection,
    "solver": SolverSection,
    "cycle": CycleSection,
    "time": TimeSection,
    "blowby": BlowBySection,
    "stationary": StationarySection,
    "transient": TransientSection,
    "compare": CompareSection,
    "sweep": SweepSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    scales: ScalesSection = field(default_factory=ScalesSection)
    mesh: MeshSection = field(default_factory=MeshSection)
    ring: RingSection = field(default_factory=RingSection)
    wear: WearSection = field(default_factory=WearSection)
    texture: TextureSection = field(default_factory=TextureSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    contact: ContactSection = field(default_factory=ContactSection)
    solver: SolverSection = field(default_factory=SolverSection)
    cycle: CycleSection = field(default_factory=CycleSection)
    time: TimeSection = field(default_factory=TimeSection)
    blowby: BlowBySection = field(default_factory=BlowBySection)
    stationary: StationarySection = field(default_factory=StationarySection)
    transient: TransientSection = field(default_factory=TransientSection)
    compare: CompareSection = field(default_factory=CompareSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def kind(self) -> str:
        return self.scenario.kind

    # builders for the physics objects

    def scales_obj(self) -> FundamentalScales:
        s = self.scales
        return FundamentalScales(H=s.H, L=s.L, mu=s.mu, U=s.U)

    def grid(self) -> Grid:
        return Grid(self.mesh.n_x1, self.mesh.n_x2, 1.0, self.mesh.length_x2, True)

    def gap_model(self) -> GapModel:
        ring = RingProfile(R=self.ring.R, aspect=self.ring.aspect)
        period = 2.0 * math.pi * self.dynamics.B_r
        wear = WearProfile(self.wear.delta, self.wear.c, self.wear.center, period)
        tex = None
        if self.texture.enabled:
            t = self.texture
            tex = DimpleTexture(t.depth, t.len_x1, t.len_x2, t.pitch_x2, tuple(t.centers_x1))
        return GapModel(ring, wear, tex, self.ring.h_feed)

    def dynamics_config(self) -> DynamicsConfig:
        d = self.dynamics
        return DynamicsConfig(d.m, d.W_applied, d.gamma, d.L_ring, d.B_r, d.load_normalization)

    def contact_model(self) -> ContactModel:
        c = self.contact
        return ContactModel(c.eta_beta_sigma, c.sigma_over_beta, c.E_prime, c.sigma, c.mu_c,
                            (c.fit_A, c.fit_B, c.fit_C))

    def solver_settings(self) -> SolverSettings:
        s = self.solver
        return SolverSettings(s.tol, s.max_iters, s.epsilon_extension, s.theta_full_threshold,
                              s.method, s.omega, s.max_active, s.x2_harmonics)

    def blowby_config(self) -> BlowByConfig:
        return BlowByConfig(self.blowby.epsilon_b, self.blowby.N_b)

    @property
    def copies(self) -> float:
        """Number of grid periods around the bore (1 for the full circumference)."""
        return 2.0 * math.pi * self.dynamics.B_r / self.mesh.length_x2

    def cfl_windows(self) -> list[tuple[float, float, float]]:
        return parse_windows(self.time.cfl_windows)

    def with_updates(self, **sections) -> "ScenarioConfig":
        """Copy with some section fields replaced, e.g. ``wear={"delta": 0.04}``."""
        out = self
        for name, values in sections.items():
            out = replace(out, **{name: replace(getattr(out, name), **values)})
        return out


# ---------------------------------------------------------------------------
# kind-dependent defaults


def _fill(section, **defaults):
    """Replace ``None`` fields of ``section`` with the given defaults."""
    vals = {k: v for k, v in defaults.items() if getattr(section, k) is None}
    return replace(section, **vals) if vals else section


def resolve(cfg: ScenarioConfig) -> ScenarioConfig:
    """Apply scenario defaults to every unset field and validate."""
    kind = cfg.scenario.kind
    if kind is None or kind == "":
        raise ConfigurationError("scenario.kind: missing (one of " + ", ".join(KINDS) + ")")
    if kind not in KINDS:
        raise ConfigurationError(f"scenario.kind: unknown kind {kind!r}")
    circumference = 2.0 * math.pi * cfg.dynamics.B_r
    n1 = cfg.mesh.n_x1
    textured = kind in ("textured_transient", "model_compare")
    cycle_like = kind in ("full_cycle", "wear_sweep")

    if kind == "stationary_1d":
        cycle = _fill(cfg.cycle, speed_mode="constant", speed=1.0, pcc_mode="constant",
                      A_cc_atm=0.0, duration=2000.0)
    elif textured:
        cycle = _fill(cfg.cycle, speed_mode="constant", speed=1.0, pcc_mode="pulse",
                      A_cc_atm=50.0, duration=600.0)
    else:
        cycle = _fill(cfg.cycle, speed_mode="sinusoid", speed=1.0, pcc_mode="pulse",
                      A_cc_atm=50.0, duration=600.0)

    if textured:
        pitch = cfg.texture.pitch_x2
        mesh = _fill(cfg.mesh, length_x2=pitch,
                     n_x2=max(1, int(round(pitch * n1 / 1.0))))
    elif kind == "stationary_1d":
        mesh = _fill(cfg.mesh, n_x2=1, length_x2=circumference)
    else:
        mesh = _fill(cfg.mesh, n_x2=40, length_x2=circumference)

    ring = cfg.ring
    if ring.R is not None and ring.delta_h is not None:
        expected = RingProfile.from_edge_height(ring.delta_h, ring.aspect).R
        if not math.isclose(ring.R, expected, rel_tol=1e-9):
            raise ConfigurationError("ring.R and ring.delta_h disagree; set only one of them")
    if ring.R is None and ring.delta_h is None:
        ring = replace(ring, delta_h=2.0) if cycle_like else replace(ring, R=64.0)
    if ring.R is None:
        ring = replace(ring, R=RingProfile.from_edge_height(ring.delta_h, ring.aspect).R)
    if ring.delta_h is None:
        ring = replace(ring, delta_h=ring.aspect * 0.25 / (2.0 * ring.R))
    if kind == "stationary_1d":
        ring = _fill(ring, h_feed=3.0 if cycle.speed > 0 else 1.25)
    else:
        ring = _fill(ring, h_feed=1.5)

    wear = _fill(cfg.wear, center=0.5 * circumference)
    texture = _fill(cfg.texture, enabled=textured)
    dynamics = _fill(cfg.dynamics, Z0=1.0 if kind == "stationary_1d" else 0.8,
                     fixed_Z=kind == "stationary_1d")

    time = cfg.time
    if kind == "stationary_1d":
        time = _fill(time, dt=0.01, dt_max=0.0, cfl_windows="none")
    elif kind == "model_compare":
        time = _fill(time, dt=2.0 / n1, dt_max=0.0, cfl_windows="none")
    elif textured:
        time = _fill(time, dt=0.0, dt_max=0.0, cfl_windows="none")
    else:
        time = _fill(time, dt=0.0, dt_max=0.05, cfl_windows="290:314:0.05")

    out = replace(cfg, cycle=cycle, mesh=mesh, ring=ring, wear=wear, texture=texture,
                  dynamics=dynamics, time=time)
    validate(out)
    return out


def parse_windows(text: str | None) -> list[tuple[float, float, float]]:
    if text is None or text.strip().lower() in ("", "none"):
        return []
    out = []
    for chunk in text.split(";"):
        parts = chunk.strip().split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"time.cfl_windows: bad window {chunk.strip()!r}")
        try:
            a, b, c = (float(x) for x in parts)
        except ValueError as exc:
            raise ConfigurationError(f"time.cfl_windows: {exc}") from None
        if not (a < b and c > 0):
            raise ConfigurationError(f"time.cfl_windows: bad window {chunk.strip()!r}")
        out.append((a, b, c))
    out.sort()
    for (a0, b0, _), (a1, _, _) in zip(out, out[1:]):
        if a1 < b0:
            raise ConfigurationError("time.cfl_windows: windows overlap")
    return out


def _check(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigurationError(f"{path}: {message}")


def validate(cfg: ScenarioConfig) -> None:
    """Raise :class:`ConfigurationError` naming the first offending key."""
    _check(cfg.scenario.model in MODELS, "scenario.model", f"must be one of {MODELS}")
    _check(cfg.mesh.n_x1 >= 3, "mesh.n_x1", "must be >= 3")
    _check(cfg.mesh.n_x2 >= 1, "mesh.n_x2", "must be >= 1")
    _check(cfg.mesh.length_x2 > 0, "mesh.length_x2", "must be > 0")
    _check(cfg.ring.R > 0, "ring.R", "must be > 0")
    _check(cfg.ring.h_feed > 0, "ring.h_feed", "must be > 0")
    _check(cfg.wear.delta >= 0, "wear.delta", "must be >= 0")
    _check(cfg.dynamics.load_normalization in NORMALIZATIONS, "dynamics.load_normalization",
           f"must be one of {NORMALIZATIONS}")
    _check(cfg.dynamics.Z0 > 0, "dynamics.Z0", "must be > 0")
    _check(cfg.solver.method in METHODS, "solver.method", f"must be one of {METHODS}")
    _check(cfg.solver.tol > 0, "solver.tol", "must be > 0")
    _check(cfg.solver.max_iters >= 1, "solver.max_iters", "must be >= 1")
    _check(cfg.cycle.speed_mode in SPEED_MODES, "cycle.speed_mode", f"must be one of {SPEED_MODES}")
    _check(cfg.cycle.pcc_mode in PCC_MODES, "cycle.pcc_mode", f"must be one of {PCC_MODES}")
    _check(cfg.cycle.A_cc_atm >= 0, "cycle.A_cc_atm", "must be >= 0")
    _check(cfg.cycle.width > 0, "cycle.width", "must be > 0")
    _check(cfg.cycle.period > 0, "cycle.period", "must be > 0")
    _check(cfg.cycle.duration > 0, "cycle.duration", "must be > 0")
    _check(cfg.time.dt >= 0, "time.dt", "must be >= 0 (0 selects the CFL rule)")
    _check(cfg.time.cfl > 0, "time.cfl", "must be > 0")
    _check(cfg.time.u_floor > 0, "time.u_floor", "must be > 0")
    _check(cfg.time.dt_max >= 0, "time.dt_max", "must be >= 0 (0 for no cap)")
    parse_windows(cfg.time.cfl_windows)
    _check(cfg.stationary.initial_state in INITIAL_STATES, "stationary.initial_state",
           f"must be one of {INITIAL_STATES}")
    _check(cfg.stationary.stationary_steps >= 1, "stationary.stationary_steps", "must be >= 1")
    _check(cfg.stationary.bisect_lo_atm < cfg.stationary.bisect_hi_atm,
           "stationary.bisect_lo_atm", "must be below stationary.bisect_hi_atm")
    _check(cfg.transient.study in STUDIES, "transient.study", f"must be one of {STUDIES}")
    _check(cfg.transient.mesh_h_feed > 0, "transient.mesh_h_feed", "must be > 0")
    _check(all(m in MODELS for m in cfg.compare.models), "compare.models",
           f"entries must be in {MODELS}")
    _check(cfg.compare.reference in cfg.compare.models, "compare.reference",
           "must be one of compare.models")
    _check(all(d >= 0 for d in cfg.sweep.delta), "sweep.delta", "entries must be >= 0")
    _check(all(d > 0 for d in cfg.sweep.delta_h), "sweep.delta_h", "entries must be > 0")
    if cfg.kind == "stationary_1d":
        _check(cfg.mesh.n_x2 == 1, "mesh.n_x2", "must be 1 for stationary_1d")
    # building the physics objects runs their own checks
    for name, build in (("ring", cfg.gap_model), ("dynamics", cfg.dynamics_config),
                        ("contact", cfg.contact_model), ("solver", cfg.solver_settings),
                        ("blowby", cfg.blowby_config), ("mesh", cfg.grid),
                        ("scales", cfg.scales_obj)):
        try:
            build()
        except ConfigurationError as exc:
            raise ConfigurationError(f"{name}: {exc}") from None


# ---------------------------------------------------------------------------
# text round trip


def _unwrap_optional(tp):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return args[0], True
    return tp, False


def _coerce(text: str, tp, path: str):
    base, optional = _unwrap_optional(tp)
    s = text.strip()
    if optional and s.lower() in ("", "auto"):
        return None
    try:
        if base is bool:
            low = s.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {s!r}")
        if base is int:
            return int(s)
        if base is float:
            v = float(s)
            if math.isnan(v):
                raise ValueError("NaN is not allowed")
            return v
        if base is str:
            return s
        if typing.get_origin(base) is tuple:
            (item,) = typing.get_args(base)[:1]
            if s == "":
                return ()
            return tuple(item(x.strip()) for x in s.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    raise ConfigurationError(f"{path}: unsupported type {tp}")


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def from_mapping(data: dict[str, dict[str, str]]) -> ScenarioConfig:
    """Build an unresolved config from raw ``{section: {key: text}}``."""
    sections = {}
    for name, values in data.items():
        if name not in SECTIONS:
            raise ConfigurationError(f"{name}: unknown section")
        cls = SECTIONS[name]
        hints = typing.get_type_hints(cls)
        kwargs = {}
        for key, text in values.items():
            if key not in hints:
                raise ConfigurationError(f"{name}.{key}: unknown key")
            kwargs[key] = _coerce(text, hints[key], f"{name}.{key}")
        sections[name] = cls(**kwargs)
    return ScenarioConfig(**sections)


def _split_override(item: str) -> tuple[str, str, str]:
    if "=" not in item:
        raise ConfigurationError(f"override {item!r}: expected section.key=value")
    key, value = item.split("=", 1)
    if "." not in key:
        raise ConfigurationError(f"override {item!r}: expected section.key=value")
    section, name = key.strip().split(".", 1)
    return section, name.strip(), value.strip()


def parse_text(text: str, overrides=(), default_kind: str | None = None) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"parse error: {exc}") from None
    data = {s: dict(parser[s]) for s in parser.sections()}
    if default_kind is not None and not data.get("scenario", {}).get("kind", "").strip():
        data.setdefault("scenario", {})["kind"] = default_kind
    for item in overrides:
        section, key, value = _split_override(item)
        data.setdefault(section, {})[key] = value
    return resolve(from_mapping(data))


def parse_config(path, overrides=(), default_kind: str | None = None) -> ScenarioConfig:
    """Read, override, resolve and validate a configuration file.

    ``default_kind`` fills ``scenario.kind`` when the file leaves it empty.
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    return parse_text(p.read_text(), overrides, default_kind)


def default_config(kind: str, **sections) -> ScenarioConfig:
    """Resolved config of the given kind with optional section updates."""
    cfg = ScenarioConfig(scenario=ScenarioSection(kind=kind)).with_updates(**sections)
    return resolve(cfg)


def to_mapping(cfg: ScenarioConfig) -> dict[str, dict[str, str]]:
    out = {}
    for f in fields(cfg):
        section = getattr(cfg, f.name)
        out[f.name] = {k: _format(v) for k, v in dataclasses.asdict(section).items()}
    return out


def dump_config(cfg: ScenarioConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    parser.read_dict(to_mapping(cfg))
    lines = []
    for name in parser.sections():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in parser[name].items())
        lines.append("")
    return "\n".join(lines)
