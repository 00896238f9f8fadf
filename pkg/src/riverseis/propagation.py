"""Surface-wave transfer from bed forces to receiver ground velocity.

Vertical point forces on the bed excite a fundamental-mode surface wave;
an analytical medium response with cylindrical spreading and quality-factor
attenuation maps each force spectrum to a velocity spectrum at the
receiver. Sources live on a periodic reach, so distances are measured to
the nearest periodic image of each source.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .errors import ContractViolationError, InvalidConfigError
from .forcing import ForcingSeries

logger = logging.getLogger(__name__)

MECHANISMS = ("impact", "rolling", "turbulence", "shedding")


@dataclass
class MediumModel:
    """Elastic half-space parameters seen by the surface wave."""

    rho_m: float = 2650.0
    v_c: float = 1300.0
    v_u: float = 949.0
    q: float = 20.0

    def __post_init__(self):
        for name in ("rho_m", "v_c", "v_u", "q"):
            if getattr(self, name) <= 0:
                raise InvalidConfigError(f"medium parameter {name} must be positive")


@dataclass
class ReceiverGeometry:
    """Receiver placement relative to the periodic source reach."""

    receiver_x: float
    receiver_offset: float
    r_min: float = 0.1
    domain_length: float = 0.0

    def __post_init__(self):
        if self.r_min <= 0:
            raise InvalidConfigError("r_min must be positive")
        if self.domain_length < 0:
            raise InvalidConfigError("domain length must be non-negative")


@dataclass
class MixWeights:
    """Mixing coefficients applied to per-mechanism velocity spectra."""

    impact: float = 0.0
    rolling: float = 0.0
    turbulence: float = 0.0
    shedding: float = 0.0

    def __post_init__(self):
        for name in MECHANISMS:
            if getattr(self, name) < 0:
                raise InvalidConfigError(f"mix weight {name} must be non-negative")

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in MECHANISMS}


@dataclass
class VelocitySpectrum:
    """One-sided velocity spectrum on the rfft grid of an n-sample record.

    Storing only non-negative frequencies keeps the two-sided spectrum
    Hermitian by construction, so the inverse transform is exactly real.
    """

    frequencies: np.ndarray
    values: np.ndarray
    fs: float
    n: int

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.fs <= 0:
            raise InvalidConfigError("sampling rate must be positive")
        if self.values.shape != self.frequencies.shape:
            raise ContractViolationError("spectrum grids must share one shape")
        if self.values.size != self.n // 2 + 1:
            raise ContractViolationError("spectrum length must match the rfft grid")


def green_function(f, r: float, medium: MediumModel):
    """Receiver displacement per unit vertical force at distance r.

    Cylindrical spreading (r^-1/2) with exponential attenuation
    exp(-pi f r / (v_u Q)); non-positive frequencies map to zero.
    """
    if r <= 0:
        raise InvalidConfigError("source-receiver distance must be positive")
    f_arr = np.asarray(f, dtype=float)
    k = 2.0 * np.pi * f_arr / medium.v_c
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (
            k
            / (8.0 * medium.rho_m * medium.v_c * medium.v_u)
            * np.sqrt(2.0 / (np.pi * k * r))
            * np.exp(-np.pi * f_arr * r / (medium.v_u * medium.q))
        )
    out = np.where(f_arr > 0, g, 0.0)
    if np.ndim(f) == 0:
        return float(out)
    return out


def _source_distance(x: float, geometry: ReceiverGeometry) -> Tuple[float, bool]:
    """Distance to the nearest periodic image of the source; clamped at r_min."""
    dx = x - geometry.receiver_x
    if geometry.domain_length > 0:
        length = geometry.domain_length
        dx = min((dx, dx - length, dx + length), key=abs)
    r = math.hypot(dx, geometry.receiver_offset)
    if r < geometry.r_min:
        return geometry.r_min, True
    return r, False


def _empty_spectrum(fs: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    return freqs, np.zeros(freqs.size, dtype=complex)


def _finalize(freqs, total, fs, n, n_clamped) -> VelocitySpectrum:
    total[0] = 0.0
    if n % 2 == 0:
        total[-1] = 0.0
    if n_clamped:
        logger.warning(
            "%d source position(s) closer than r_min; distance clamped", n_clamped
        )
    return VelocitySpectrum(frequencies=freqs, values=total, fs=fs, n=n)


def propagate_point_sources(
    pulses: Sequence[Tuple[ForcingSeries, float]],
    geometry: ReceiverGeometry,
    medium: MediumModel,
    fs: float,
    n: int,
) -> VelocitySpectrum:
    """Velocity spectrum at the receiver from localized force series.

    Each (series, source_x) contributes i 2 pi f F(f) G(f; r) with r the
    distance to the nearest periodic image of source_x. Sources are summed
    in input order; DC and Nyquist bins are zeroed.
    """
    freqs, total = _empty_spectrum(fs, n)
    coef = 2j * np.pi * freqs
    n_clamped = 0
    length = None
    for series, x in pulses:
        if series.fs != fs:
            raise ContractViolationError("forcing series rate must match fs")
        if length is None:
            length = series.values.size
        elif series.values.size != length:
            raise ContractViolationError("forcing series must share one length")
        if series.values.size > n:
            raise ContractViolationError("forcing series longer than the fft grid")
        r, clamped = _source_distance(x, geometry)
        n_clamped += clamped
        g = green_function(freqs, r, medium)
        total += coef * g * np.fft.rfft(series.values, n)
    return _finalize(freqs, total, fs, n, n_clamped)


def propagate_distributed(
    forcing: ForcingSeries,
    geometry: ReceiverGeometry,
    medium: MediumModel,
    fs: float,
    n: int,
) -> VelocitySpectrum:
    """Velocity spectrum from a force shared equally across grid cells."""
    grid = forcing.location_grid
    if grid is None or np.asarray(grid).size == 0:
        raise InvalidConfigError("distributed forcing needs a non-empty grid")
    grid = np.asarray(grid, dtype=float)
    if forcing.fs != fs:
        raise ContractViolationError("forcing series rate must match fs")
    if forcing.values.size > n:
        raise ContractViolationError("forcing series longer than the fft grid")
    freqs, total = _empty_spectrum(fs, n)
    coef = 2j * np.pi * freqs
    n_clamped = 0
    gsum = np.zeros(freqs.size)
    for x in grid:
        r, clamped = _source_distance(float(x), geometry)
        n_clamped += clamped
        gsum = gsum + green_function(freqs, r, medium)
    g = gsum * (1.0 / grid.size)
    total += coef * g * np.fft.rfft(forcing.values, n)
    return _finalize(freqs, total, fs, n, n_clamped)


def velocity_time_series(spectrum: VelocitySpectrum) -> np.ndarray:
    """Real receiver velocity record for a one-sided spectrum."""
    return np.fft.irfft(spectrum.values, spectrum.n)


def synthesize_total(
    spectra: Dict[str, VelocitySpectrum],
    weights: MixWeights,
    fs: float,
    n: int,
) -> np.ndarray:
    """Weighted sum of mechanism spectra, inverse-transformed to velocity.

    The one-sided storage makes the summed spectrum Hermitian, so the
    output is exactly real.
    """
    unknown = set(spectra) - set(MECHANISMS)
    if unknown:
        raise InvalidConfigError(f"unknown mechanism keys: {sorted(unknown)}")
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    acc = np.zeros(freqs.size, dtype=complex)
    for name in MECHANISMS:
        spectrum = spectra.get(name)
        if spectrum is None:
            continue
        if spectrum.fs != fs or spectrum.n != n:
            raise ContractViolationError("mechanism spectra must share the fft grid")
        acc += getattr(weights, name) * spectrum.values
    return np.fft.irfft(acc, n)


__all__ = [
    "MECHANISMS",
    "MediumModel",
    "ReceiverGeometry",
    "MixWeights",
    "VelocitySpectrum",
    "green_function",
    "propagate_point_sources",
    "propagate_distributed",
    "velocity_time_series",
    "synthesize_total",
]
