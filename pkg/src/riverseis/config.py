"""Run configuration: defaults, JSON loading, validation, and presets.

The default configuration reproduces the standard test scenario (straight
reach, U0 = 1 m/s, 20 cm flow depth, 2 grains/s for 200 s at 200 Hz);
presets override only what differs. All quantities are SI.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import InvalidConfigError

SEVENTH = 1.0 / 7.0
# reference contact duration anchoring the default stiffness
REFERENCE_CONTACT_TIME = 1.0e-2


@dataclass
class DomainConfig:
    length: float = 10.0
    bed_nodes: int = 1001
    bed_sigma_z: float = 1.0e-3
    slope: float = 0.05


@dataclass
class FlowConfig:
    u0: float = 1.0
    flow_depth: float = 0.20
    profile_exponent: float = SEVENTH
    z0: Optional[float] = None  # default: untruncated median diameter / 30


@dataclass
class GrainConfig:
    mode_diameter: float = 0.05
    sigma_log: float = 0.9
    d_min: float = 0.005
    d_max: float = 0.5
    rho_s: float = 2650.0


@dataclass
class InjectionConfig:
    rate: float = 2.0
    schedule: str = "deterministic"  # or "poisson"


@dataclass
class SimulationSection:
    duration: float = 200.0
    dt: float = 1.0e-4
    fs: float = 200.0
    sigma_noise: float = 1.0e-8
    rho_f: float = 1000.0
    mu_f: float = 1.0e-3
    k_n: Optional[float] = None  # default: contact time 1e-2 s for the mode grain


@dataclass
class ContactConfig:
    e: float = 0.45
    mu: float = 0.5
    mu_bed: float = 0.5


@dataclass
class EventConfig:
    beta: float = 0.5
    gamma: float = 0.1
    alpha_roll_impulse: float = 0.3
    roll_vx_factor: float = 0.1
    roll_height_factor: float = 1.3


@dataclass
class WaterConfig:
    p: float = 3.0
    turb_band: tuple = (30.0, 90.0)
    taper_band: tuple = (0.5, 100.0)
    strouhal: float = 0.2
    shed_length: Optional[float] = None  # default: untruncated median diameter
    shed_rel_bandwidth: float = 0.1
    smoothing_window: float = 0.01
    n_source_cells: int = 16
    amplitude_scale: float = 1.0


@dataclass
class WeightsConfig:
    """Energy fractions per mechanism; shares of total signal variance."""

    turbulence: float = 0.4
    impact: float = 0.4
    rolling: float = 0.1
    shedding: float = 0.1


@dataclass
class MediumConfig:
    rho_m: float = 2650.0
    v_c: float = 1300.0
    v_u: Optional[float] = None  # default: 0.73 * v_c
    q: float = 20.0
    r_min: float = 0.1


@dataclass
class ReceiverConfig:
    offset: float = 1.0
    x: Optional[float] = None  # default: mid-domain


@dataclass
class AnalysisConfig:
    welch_segment: int = 4096
    welch_overlap: float = 0.5
    rmsa_band: tuple = (0.5, 95.0)
    rmsa_window: float = 60.0


@dataclass
class SimulationConfig:
    """Complete, validated description of one run."""

    seed: int = 12345
    domain: DomainConfig = field(default_factory=DomainConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    grains: GrainConfig = field(default_factory=GrainConfig)
    injection: InjectionConfig = field(default_factory=InjectionConfig)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    contact: ContactConfig = field(default_factory=ContactConfig)
    events: EventConfig = field(default_factory=EventConfig)
    water: WaterConfig = field(default_factory=WaterConfig)
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    medium: MediumConfig = field(default_factory=MediumConfig)
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    # resolved derived quantities

    @property
    def median_diameter(self) -> float:
        """Median of the parent lognormal, mode * exp(sigma_log^2)."""
        return self.grains.mode_diameter * math.exp(self.grains.sigma_log**2)

    @property
    def z0(self) -> float:
        if self.flow.z0 is not None:
            return self.flow.z0
        return self.median_diameter / 30.0

    @property
    def mode_mass(self) -> float:
        return self.grains.rho_s * (math.pi / 6.0) * self.grains.mode_diameter**3

    @property
    def k_n(self) -> float:
        if self.simulation.k_n is not None:
            return self.simulation.k_n
        return math.pi**2 * self.mode_mass / REFERENCE_CONTACT_TIME**2

    @property
    def shed_length(self) -> float:
        if self.water.shed_length is not None:
            return self.water.shed_length
        return self.median_diameter

    @property
    def v_u(self) -> float:
        if self.medium.v_u is not None:
            return self.medium.v_u
        return 0.73 * self.medium.v_c

    @property
    def receiver_x(self) -> float:
        if self.receiver.x is not None:
            return self.receiver.x
        return 0.5 * self.domain.length

    @property
    def n_steps(self) -> int:
        return int(round(self.simulation.duration / self.simulation.dt))

    @property
    def record_every(self) -> int:
        return int(round(1.0 / (self.simulation.fs * self.simulation.dt)))

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(config_to_dict(self), sort_keys=True).encode()
        ).hexdigest()


_SECTIONS = {
    "domain": DomainConfig,
    "flow": FlowConfig,
    "grains": GrainConfig,
    "injection": InjectionConfig,
    "simulation": SimulationSection,
    "contact": ContactConfig,
    "events": EventConfig,
    "water": WaterConfig,
    "weights": WeightsConfig,
    "medium": MediumConfig,
    "receiver": ReceiverConfig,
    "analysis": AnalysisConfig,
}

_TUPLE_FIELDS = {"turb_band", "taper_band", "rmsa_band"}


def config_to_dict(cfg: SimulationConfig) -> dict:
    """Plain-dict form of a config (tuples become lists, for JSON)."""
    out = {"seed": cfg.seed}
    for name in _SECTIONS:
        section = dataclasses.asdict(getattr(cfg, name))
        for key, val in section.items():
            if isinstance(val, tuple):
                section[key] = list(val)
        out[name] = section
    return out


def _apply_section(section_obj, name: str, data: dict):
    valid = {f.name for f in dataclasses.fields(section_obj)}
    for key, value in data.items():
        if key not in valid:
            raise InvalidConfigError(f"unknown config key '{name}.{key}'")
        if key in _TUPLE_FIELDS:
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise InvalidConfigError(f"'{name}.{key}' must be a pair [low, high]")
            value = (float(value[0]), float(value[1]))
        setattr(section_obj, key, value)


def config_from_dict(data: dict) -> SimulationConfig:
    """Build a validated config from a (possibly partial) plain dict."""
    cfg = SimulationConfig()
    for key, value in data.items():
        if key == "notes":
            continue
        if key == "seed":
            cfg.seed = int(value)
            continue
        if key not in _SECTIONS:
            raise InvalidConfigError(f"unknown config key '{key}'")
        if not isinstance(value, dict):
            raise InvalidConfigError(f"config section '{key}' must be a mapping")
        _apply_section(getattr(cfg, key), key, value)
    validate_config(cfg)
    return cfg


def _require_positive(value, name):
    if value is None:
        return
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise InvalidConfigError(f"'{name}' must be positive")


def _require_non_negative(value, name):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
        raise InvalidConfigError(f"'{name}' must be non-negative")


def validate_config(cfg: SimulationConfig) -> None:
    """Check every field; raises with the offending key's name."""
    _require_positive(cfg.domain.length, "domain.length")
    if cfg.domain.bed_nodes < 2:
        raise InvalidConfigError("'domain.bed_nodes' must be at least 2")
    _require_non_negative(cfg.domain.bed_sigma_z, "domain.bed_sigma_z")
    _require_non_negative(cfg.domain.slope, "domain.slope")

    _require_positive(cfg.flow.u0, "flow.u0")
    _require_positive(cfg.flow.flow_depth, "flow.flow_depth")
    if not (0.0 <= cfg.flow.profile_exponent < 1.0):
        raise InvalidConfigError("'flow.profile_exponent' must lie in [0, 1)")
    _require_positive(cfg.flow.z0, "flow.z0")

    _require_positive(cfg.grains.mode_diameter, "grains.mode_diameter")
    _require_non_negative(cfg.grains.sigma_log, "grains.sigma_log")
    if not (0 < cfg.grains.d_min < cfg.grains.d_max):
        raise InvalidConfigError("'grains.d_min' and 'grains.d_max' must satisfy 0 < d_min < d_max")
    _require_positive(cfg.grains.rho_s, "grains.rho_s")

    _require_non_negative(cfg.injection.rate, "injection.rate")
    if cfg.injection.schedule not in ("deterministic", "poisson"):
        raise InvalidConfigError("'injection.schedule' must be 'deterministic' or 'poisson'")

    _require_non_negative(cfg.simulation.duration, "simulation.duration")
    _require_positive(cfg.simulation.dt, "simulation.dt")
    _require_positive(cfg.simulation.fs, "simulation.fs")
    _require_non_negative(cfg.simulation.sigma_noise, "simulation.sigma_noise")
    _require_positive(cfg.simulation.rho_f, "simulation.rho_f")
    _require_positive(cfg.simulation.mu_f, "simulation.mu_f")
    _require_positive(cfg.simulation.k_n, "simulation.k_n")

    if not (0.0 < cfg.contact.e < 1.0):
        raise InvalidConfigError("'contact.e' must lie in (0, 1)")
    if not (0.0 <= cfg.contact.mu <= 2.0):
        raise InvalidConfigError("'contact.mu' must lie in [0, 2]")
    _require_non_negative(cfg.contact.mu_bed, "contact.mu_bed")

    _require_non_negative(cfg.events.beta, "events.beta")
    _require_non_negative(cfg.events.gamma, "events.gamma")
    if not (0.0 < cfg.events.alpha_roll_impulse <= 1.0):
        raise InvalidConfigError("'events.alpha_roll_impulse' must lie in (0, 1]")
    _require_non_negative(cfg.events.roll_vx_factor, "events.roll_vx_factor")
    if cfg.events.roll_height_factor <= 0:
        raise InvalidConfigError("'events.roll_height_factor' must be positive")

    _require_positive(cfg.water.p, "water.p")
    lo, hi = cfg.water.turb_band
    tlo, thi = cfg.water.taper_band
    if not (0 < lo < hi):
        raise InvalidConfigError("'water.turb_band' must be an increasing positive pair")
    if not (0 < tlo <= lo and hi <= thi):
        raise InvalidConfigError("'water.turb_band' must be nested inside 'water.taper_band'")
    nyquist = cfg.simulation.fs / 2.0
    if thi > nyquist:
        raise InvalidConfigError("'water.taper_band' upper edge exceeds the Nyquist frequency")
    _require_non_negative(cfg.water.strouhal, "water.strouhal")
    _require_positive(cfg.water.shed_length, "water.shed_length")
    _require_positive(cfg.water.shed_rel_bandwidth, "water.shed_rel_bandwidth")
    _require_positive(cfg.water.smoothing_window, "water.smoothing_window")
    if cfg.water.n_source_cells < 1:
        raise InvalidConfigError("'water.n_source_cells' must be at least 1")
    _require_positive(cfg.water.amplitude_scale, "water.amplitude_scale")

    for mech in ("turbulence", "impact", "rolling", "shedding"):
        _require_non_negative(getattr(cfg.weights, mech), f"weights.{mech}")
    total = (
        cfg.weights.turbulence + cfg.weights.impact + cfg.weights.rolling + cfg.weights.shedding
    )
    if total <= 0:
        raise InvalidConfigError("'weights' must contain at least one positive fraction")

    _require_positive(cfg.medium.rho_m, "medium.rho_m")
    _require_positive(cfg.medium.v_c, "medium.v_c")
    _require_positive(cfg.medium.v_u, "medium.v_u")
    _require_positive(cfg.medium.q, "medium.q")
    _require_positive(cfg.medium.r_min, "medium.r_min")

    _require_positive(cfg.receiver.offset, "receiver.offset")
    if cfg.receiver.x is not None and not (0 <= cfg.receiver.x <= cfg.domain.length):
        raise InvalidConfigError("'receiver.x' must lie inside the domain")

    if cfg.analysis.welch_segment < 8:
        raise InvalidConfigError("'analysis.welch_segment' must be at least 8")
    if not (0.0 <= cfg.analysis.welch_overlap < 1.0):
        raise InvalidConfigError("'analysis.welch_overlap' must lie in [0, 1)")
    blo, bhi = cfg.analysis.rmsa_band
    if not (0 < blo < bhi):
        raise InvalidConfigError("'analysis.rmsa_band' must be an increasing positive pair")
    _require_positive(cfg.analysis.rmsa_window, "analysis.rmsa_window")

    # sampling consistency
    if cfg.simulation.fs * cfg.simulation.duration < 2 and cfg.simulation.duration > 0:
        raise InvalidConfigError("'simulation.duration' too short: fs * duration must be >= 2")
    rec = 1.0 / (cfg.simulation.fs * cfg.simulation.dt)
    if abs(rec - round(rec)) > 1e-9 or round(rec) < 1:
        raise InvalidConfigError("'simulation.dt' must divide the sampling interval 1/fs")
    steps = cfg.simulation.duration / cfg.simulation.dt
    if abs(steps - round(steps)) > 1e-6:
        raise InvalidConfigError("'simulation.duration' must be a whole number of time steps")
    if round(steps) % round(rec) != 0 and cfg.simulation.duration > 0:
        raise InvalidConfigError("'simulation.duration' must be a whole number of samples at fs")

    # contact-resolution stability: the uniform pair contact time must span
    # at least 10 steps (pair stiffness scales with reduced mass, so the
    # contact time is the same for every pair)
    m_eff_ref = 0.5 * cfg.mode_mass
    t_pair = math.pi * math.sqrt(m_eff_ref / cfg.k_n)
    if cfg.simulation.dt >= t_pair / 10.0:
        raise InvalidConfigError(
            f"'simulation.dt' = {cfg.simulation.dt} is too coarse for the pair "
            f"contact time {t_pair:.3e} s; need dt < t_c/10"
        )


def load_config(path) -> SimulationConfig:
    """Load and validate a JSON config file; empty file means all defaults."""
    text = Path(path).read_text()
    if not text.strip():
        return config_from_dict({})
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidConfigError("config root must be a JSON object")
    return config_from_dict(data)


def preset_names() -> list:
    files = resources.files("riverseis") / "presets"
    return sorted(p.name[: -len(".json")] for p in files.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> SimulationConfig:
    """Load one of the packaged scenario presets by name."""
    files = resources.files("riverseis") / "presets"
    candidate = files / f"{name}.json"
    if not candidate.is_file():
        raise InvalidConfigError(
            f"unknown preset '{name}'; available: {', '.join(preset_names())}"
        )
    return config_from_dict(json.loads(candidate.read_text()))
