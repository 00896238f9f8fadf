"""Particle dynamics primitives: drag, noise, contacts, and bed events.

Pure, single-particle / single-pair operations live here; the vectorized
time stepping that drives them over a whole run is in ``simulate``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .bed import BedProfile, bed_elevation
from .errors import ContractViolationError, InvalidConfigError, NumericalDegeneracyError

GRAVITY = 9.81
SOLID_DENSITY = 2650.0
WATER_DENSITY = 1000.0
WATER_VISCOSITY = 1.0e-3
# rolling contacts are stretched by this factor relative to impacts, to keep
# their force pulses well below the impact band
ROLL_CONTACT_DILATION = 10.0


@dataclass
class Particle:
    """State of one spherical grain."""

    id: int
    diameter: float
    mass: float
    x: float
    z: float
    vx: float
    vz: float
    alive_since: float = 0.0

    def __post_init__(self):
        if self.diameter <= 0:
            raise InvalidConfigError("diameter must be positive")
        if self.mass <= 0:
            raise InvalidConfigError("mass must be positive")


def particle_mass(diameter: float, rho_s: float = SOLID_DENSITY) -> float:
    """Mass of a solid sphere of the given diameter."""
    if diameter <= 0 or rho_s <= 0:
        raise InvalidConfigError("diameter and rho_s must be positive")
    return rho_s * (math.pi / 6.0) * diameter**3


@dataclass
class ContactParams:
    """Linear spring-damper pair-contact parameters."""

    k_n: float
    c_n: float
    k_t: float
    eta_t: float
    mu: float

    def __post_init__(self):
        for name in ("k_n", "c_n", "k_t", "eta_t", "mu"):
            if getattr(self, name) < 0:
                raise InvalidConfigError(f"{name} must be non-negative")
        if self.mu > 2.0:
            raise InvalidConfigError("mu must lie in [0, 2]")


def normal_damping(e: float, m_eff: float, k_n: float) -> float:
    """Dashpot coefficient reproducing restitution ``e`` for a linear contact.

    c_n = -2 ln(e) sqrt(m_eff k_n) / sqrt(pi^2 + ln^2 e); zero damping for
    a perfectly elastic contact.
    """
    if not (0.0 < e <= 1.0):
        raise InvalidConfigError("restitution must lie in (0, 1]")
    if m_eff <= 0 or k_n <= 0:
        raise InvalidConfigError("m_eff and k_n must be positive")
    if e == 1.0:
        return 0.0
    ln_e = math.log(e)
    return -2.0 * ln_e * math.sqrt(m_eff * k_n) / math.sqrt(math.pi**2 + ln_e**2)


def contact_params_from_restitution(
    k_n: float, m_eff: float, e: float, mu: float = 0.5
) -> ContactParams:
    """Standard parameter set: damping from ``e``, k_t = (2/7) k_n, eta_t = c_n."""
    c_n = normal_damping(e, m_eff, k_n)
    return ContactParams(k_n=k_n, c_n=c_n, k_t=(2.0 / 7.0) * k_n, eta_t=c_n, mu=mu)


@dataclass
class EventParams:
    """Thresholds and coefficients for bed-event classification."""

    e: float = 0.45
    alpha_roll_impulse: float = 0.3
    beta: float = 0.5
    gamma: float = 0.1
    roll_vx_factor: float = 0.1
    roll_height_factor: float = 1.3

    def __post_init__(self):
        if not (0.0 < self.e < 1.0):
            raise InvalidConfigError("restitution e must lie in (0, 1)")
        if not (0.0 < self.alpha_roll_impulse <= 1.0):
            raise InvalidConfigError("alpha_roll_impulse must lie in (0, 1]")
        if self.beta < 0 or self.gamma < 0:
            raise InvalidConfigError("beta and gamma must be non-negative")


class EventKind(enum.Enum):
    IMPACT = "Impact"
    ROLLING = "Rolling"


@dataclass
class ContactEvent:
    """One classified particle-bed interaction."""

    kind: EventKind
    time: float
    x_position: float
    particle_id: int
    impulse_J: float
    contact_time_tc: float
    pre_vz: float

    def __post_init__(self):
        if self.impulse_J < 0:
            raise ContractViolationError("impulse_J must be non-negative")
        if self.contact_time_tc <= 0:
            raise ContractViolationError("contact_time_tc must be positive")


def contact_time(m_eff: float, k: float) -> float:
    """Duration of a linear spring contact: half the oscillator period."""
    if m_eff <= 0 or k <= 0:
        raise InvalidConfigError("m_eff and k must be positive")
    return math.pi * math.sqrt(m_eff / k)


def drag_coefficient(re: float) -> float:
    """Sphere drag coefficient as a function of particle Reynolds number.

    Schiller-Naumann correlation up to Re = 1000, constant 0.44 beyond.
    """
    if re <= 0:
        raise InvalidConfigError("Reynolds number must be positive")
    if re <= 1000.0:
        return 24.0 / re * (1.0 + 0.15 * re**0.687)
    return 0.44


def drag_force(
    particle: Particle, u_fluid, rho_f: float = WATER_DENSITY, mu_f: float = WATER_VISCOSITY
) -> np.ndarray:
    """Hydrodynamic drag on a grain from the local fluid velocity.

    Parameters
    ----------
    particle : Particle
        Grain whose velocity and diameter set the slip and Reynolds number.
    u_fluid : array-like of shape (2,)
        Fluid velocity (streamwise, vertical) at the grain center, m/s.
    rho_f, mu_f : float
        Fluid density and dynamic viscosity.

    Returns
    -------
    ndarray of shape (2,)
        Force in N; zero when there is no slip.
    """
    if rho_f <= 0 or mu_f <= 0:
        raise InvalidConfigError("rho_f and mu_f must be positive")
    u_rel = np.asarray(u_fluid, dtype=float) - np.array([particle.vx, particle.vz])
    speed = math.hypot(u_rel[0], u_rel[1])
    if speed == 0.0:
        return np.zeros(2)
    re = rho_f * speed * particle.diameter / mu_f
    c_d = drag_coefficient(re)
    return c_d * (math.pi * particle.diameter**2 / 8.0) * rho_f * speed * u_rel


def stochastic_force(sigma: float, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Langevin forcing: sqrt(2 sigma / dt) times a pair of standard normals."""
    if sigma < 0:
        raise InvalidConfigError("sigma must be non-negative")
    if dt <= 0:
        raise InvalidConfigError("dt must be positive")
    if sigma == 0.0:
        return np.zeros(2)
    return math.sqrt(2.0 * sigma / dt) * rng.standard_normal(2)


def pair_contact_force(pi: Particle, pj: Particle, params: ContactParams):
    """Soft-sphere contact forces between two grains.

    Returns the force vectors on ``pi`` and ``pj`` (equal and opposite).
    Non-overlapping pairs return zeros; coincident centers are degenerate.
    The tangential force is viscous, -(k_t + eta_t) * v_t, clipped by the
    Coulomb bound |F_t| <= mu |F_n|.
    """
    dx = pi.x - pj.x
    dz = pi.z - pj.z
    dist = math.hypot(dx, dz)
    if dist == 0.0:
        raise NumericalDegeneracyError(
            f"particles {pi.id} and {pj.id} have coincident centers"
        )
    overlap = 0.5 * (pi.diameter + pj.diameter) - dist
    if overlap <= 0.0:
        return np.zeros(2), np.zeros(2)
    # unit normal from j toward i; positive v_n means the pair is separating
    nx, nz = dx / dist, dz / dist
    rvx = pi.vx - pj.vx
    rvz = pi.vz - pj.vz
    v_n = rvx * nx + rvz * nz
    f_n = params.k_n * overlap - params.c_n * v_n
    tx, tz = -nz, nx
    v_t = rvx * tx + rvz * tz
    f_t = -(params.k_t + params.eta_t) * v_t
    cap = params.mu * abs(f_n)
    if abs(f_t) > cap:
        f_t = math.copysign(cap, f_t)
    force_i = np.array([f_n * nx + f_t * tx, f_n * nz + f_t * tz])
    return force_i, -force_i


class BedContact(NamedTuple):
    contact: bool
    penetration: float


def detect_bed_contact(particle: Particle, bed: BedProfile) -> BedContact:
    """Geometric bed-contact test: the grain touches when z <= z_bed(x)."""
    zb = bed_elevation(bed, particle.x)
    return BedContact(contact=particle.z <= zb, penetration=max(0.0, zb - particle.z))


def impact_speed_threshold(diameter: float, u0: float, params: EventParams) -> float:
    """Minimum downward speed for a bed contact to count as an impact."""
    return params.beta * math.sqrt(2.0 * GRAVITY * diameter) + params.gamma * u0


def classify_bed_event(
    particle: Particle,
    u0: float,
    params: EventParams,
    in_contact: bool,
    z_bed: float = 0.0,
) -> Optional[EventKind]:
    """Classify a bed contact as impact, rolling, or neither.

    Impact: downward speed at contact at least beta*sqrt(2 g D) + gamma*U0
    (a grain falling over about one diameter, plus a flow correction).
    Rolling: streamwise speed at least roll_vx_factor*U0 while the grain
    stays within roll_height_factor diameters of the bed. Impact wins when
    both hold; a slow grain in contact is simply resting.
    """
    if not in_contact:
        return None
    if particle.vz < 0 and -particle.vz >= impact_speed_threshold(
        particle.diameter, u0, params
    ):
        return EventKind.IMPACT
    if (
        particle.vx >= params.roll_vx_factor * u0
        and (particle.z - z_bed) < params.roll_height_factor * particle.diameter
    ):
        return EventKind.ROLLING
    return None


def apply_impact(
    particle: Particle, params: EventParams, *, k_n: float, time: float, z_bed: float
):
    """Resolve an impact: restitution on vz, impulse J = m (1+e) |vz|.

    The grain is placed back on the contact surface it was detected
    against, so a bounce sequence loses energy monotonically.
    """
    if particle.vz > 0:
        raise ContractViolationError("impact requires a downward pre-collision vz")
    pre_vz = particle.vz
    impulse = particle.mass * (1.0 + params.e) * abs(pre_vz)
    event = ContactEvent(
        kind=EventKind.IMPACT,
        time=time,
        x_position=particle.x,
        particle_id=particle.id,
        impulse_J=impulse,
        contact_time_tc=contact_time(particle.mass, k_n),
        pre_vz=pre_vz,
    )
    updated = replace(particle, z=z_bed, vz=-params.e * pre_vz)
    return updated, event


def apply_rolling(
    particle: Particle, params: EventParams, *, k_n: float, time: float, z_bed: float
):
    """Resolve a rolling contact: reduced impulse, vz zeroed, grain kept on the bed.

    The event's contact time is the impact contact time stretched by
    ``ROLL_CONTACT_DILATION``, pushing rolling energy to low frequencies.
    """
    pre_vz = particle.vz
    impulse = (
        params.alpha_roll_impulse * particle.mass * (1.0 + params.e) * abs(pre_vz)
    )
    event = ContactEvent(
        kind=EventKind.ROLLING,
        time=time,
        x_position=particle.x,
        particle_id=particle.id,
        impulse_J=impulse,
        contact_time_tc=ROLL_CONTACT_DILATION * contact_time(particle.mass, k_n),
        pre_vz=pre_vz,
    )
    updated = replace(particle, z=z_bed, vz=0.0)
    return updated, event
