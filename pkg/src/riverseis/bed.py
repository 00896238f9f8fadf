"""Bed geometry, water velocity profile, and grain-size population.

The environment seen by the particle system: a rough inclined bed that
wraps periodically in the streamwise direction, a prescribed power-law
velocity profile above the local bed surface, and a truncated lognormal
grain-size distribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import InvalidConfigError

# interpolation happens on a grid this much finer than the node spacing
REFINE_FACTOR = 10


@dataclass(eq=False)
class BedProfile:
    """Piecewise-linear bed surface z(x) on a periodic domain [0, L].

    ``node_x`` must be strictly increasing and span [0, L]. Elevation
    queries interpolate linearly on a uniform grid refined by
    ``REFINE_FACTOR`` relative to the node spacing.
    """

    node_x: np.ndarray
    node_z: np.ndarray
    slope: float
    sigma_z: float
    seed: int
    grid_z: np.ndarray = field(init=False, repr=False)
    grid_dx: float = field(init=False, repr=False)

    def __post_init__(self):
        self.node_x = np.asarray(self.node_x, dtype=float)
        self.node_z = np.asarray(self.node_z, dtype=float)
        if self.node_x.ndim != 1 or self.node_x.shape != self.node_z.shape:
            raise InvalidConfigError("node_x and node_z must be 1-d arrays of equal length")
        if len(self.node_x) < 2:
            raise InvalidConfigError("bed needs at least two nodes")
        if np.any(np.diff(self.node_x) <= 0):
            raise InvalidConfigError("node_x must be strictly increasing")
        if self.node_x[0] != 0.0:
            raise InvalidConfigError("bed must start at x = 0")
        n_fine = (len(self.node_x) - 1) * REFINE_FACTOR + 1
        grid_x = np.linspace(self.node_x[0], self.node_x[-1], n_fine)
        self.grid_z = np.interp(grid_x, self.node_x, self.node_z)
        self.grid_dx = float(grid_x[1] - grid_x[0])

    @property
    def length(self) -> float:
        return float(self.node_x[-1])

    def to_csv(self, path) -> None:
        """Write the node table as two-column CSV (x_m, z_m)."""
        import pandas as pd

        pd.DataFrame({"x_m": self.node_x, "z_m": self.node_z}).to_csv(
            path, index=False, lineterminator="\n"
        )


def build_bed(length: float, slope: float, n_nodes: int, sigma_z: float, seed: int) -> BedProfile:
    """Build an inclined bed with Gaussian roughness on its nodes.

    The deterministic part is a downstream-descending ramp z = -slope * x;
    each node gets an independent Normal(0, sigma_z) perturbation drawn
    from a generator seeded with ``seed``.
    """
    if length <= 0:
        raise InvalidConfigError("length must be positive")
    if n_nodes < 2:
        raise InvalidConfigError("n_nodes must be at least 2")
    if sigma_z < 0:
        raise InvalidConfigError("sigma_z must be non-negative")
    node_x = np.linspace(0.0, length, n_nodes)
    node_z = -slope * node_x
    if sigma_z > 0:
        rng = np.random.default_rng(seed)
        node_z = node_z + rng.normal(0.0, sigma_z, size=n_nodes)
    return BedProfile(node_x=node_x, node_z=node_z, slope=slope, sigma_z=sigma_z, seed=seed)


def bed_elevation(bed: BedProfile, x):
    """Bed elevation at streamwise position ``x``.

    ``x`` is wrapped into [0, L) before interpolation, so queries beyond
    the domain end see the periodic image. Accepts scalars or arrays.
    """
    xq = np.mod(np.asarray(x, dtype=float), bed.length)
    pos = xq / bed.grid_dx
    idx = np.minimum(pos.astype(np.int64), len(bed.grid_z) - 2)
    frac = pos - idx
    val = bed.grid_z[idx] * (1.0 - frac) + bed.grid_z[idx + 1] * frac
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(val)
    return val


@dataclass
class FlowProfile:
    """Power-law streamwise water velocity above the local bed.

    U(z) = u_ref * ((z + z0) / (z_ref + z0)) ** exponent for height z
    above the bed. Heights below zero are clamped to the bed level.
    """

    u_ref: float
    z_ref: float
    z0: float
    exponent: float

    def __post_init__(self):
        if self.u_ref < 0:
            raise InvalidConfigError("u_ref must be non-negative")
        if self.z_ref <= 0:
            raise InvalidConfigError("z_ref must be positive")
        if self.z0 <= 0:
            raise InvalidConfigError("z0 must be positive")
        if not (0.0 <= self.exponent < 1.0):
            raise InvalidConfigError("exponent must lie in [0, 1)")


def fluid_velocity(profile: FlowProfile, z):
    """Streamwise water speed at height ``z`` above the local bed."""
    zc = np.maximum(np.asarray(z, dtype=float), 0.0)
    val = profile.u_ref * ((zc + profile.z0) / (profile.z_ref + profile.z0)) ** profile.exponent
    if np.isscalar(z) or np.ndim(z) == 0:
        return float(val)
    return val


@dataclass
class GrainDistribution:
    """Truncated lognormal grain-diameter population.

    ``mode_diameter`` is the mode of the untruncated lognormal; draws are
    rejected outside [d_min, d_max].
    """

    mode_diameter: float = 0.05
    sigma_log: float = 0.9
    d_min: float = 0.005
    d_max: float = 0.5

    def __post_init__(self):
        if self.mode_diameter <= 0:
            raise InvalidConfigError("mode_diameter must be positive")
        if self.sigma_log < 0:
            raise InvalidConfigError("sigma_log must be non-negative")
        if self.d_min <= 0 or self.d_min >= self.d_max:
            raise InvalidConfigError("need 0 < d_min < d_max")

    @property
    def mu_log(self) -> float:
        # lognormal mode = exp(mu - sigma^2), so anchoring the mode fixes mu
        return math.log(self.mode_diameter) + self.sigma_log**2


def truncated_median(dist: GrainDistribution) -> float:
    """Analytic median of the truncated lognormal diameter distribution."""
    if dist.sigma_log == 0.0:
        return dist.mode_diameter
    mu, sig = dist.mu_log, dist.sigma_log
    a = (math.log(dist.d_min) - mu) / sig
    b = (math.log(dist.d_max) - mu) / sig
    p = 0.5 * (special.ndtr(a) + special.ndtr(b))
    return math.exp(mu + sig * special.ndtri(p))


def sample_diameters(dist: GrainDistribution, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` grain diameters by rejection inside [d_min, d_max]."""
    if n < 0:
        raise InvalidConfigError("n must be non-negative")
    if n == 0:
        return np.empty(0)
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    filled = 0
    rounds = 0
    while filled < n:
        batch = max(2 * (n - filled), 64)
        draw = rng.lognormal(mean=dist.mu_log, sigma=dist.sigma_log, size=batch)
        keep = draw[(draw >= dist.d_min) & (draw <= dist.d_max)]
        take = min(len(keep), n - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
        rounds += 1
        if rounds > 1000:
            raise InvalidConfigError("rejection sampling is not converging; check bounds")
    return out


def manning_velocity(depth: float, slope: float, n_manning: float) -> float:
    """Manning mean velocity (1/n) * depth^(2/3) * slope^(1/2).

    A zero slope returns zero velocity; negative inputs are rejected.
    """
    if depth <= 0:
        raise InvalidConfigError("depth must be positive")
    if n_manning <= 0:
        raise InvalidConfigError("n_manning must be positive")
    if slope < 0:
        raise InvalidConfigError("slope must be non-negative")
    return (1.0 / n_manning) * depth ** (2.0 / 3.0) * math.sqrt(slope)
