"""Spectral estimates and bedload transport statistics.

Welch PSDs and RMSA envelopes summarize the synthetic seismograms; the
transport metrics reduce particle trajectories to the stuck fraction,
relative elevation, moving velocity, bulk flux, and per-particle mobility
classes used to characterize the simulated bedload.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import signal as sps

from .bed import BedProfile, bed_elevation
from .errors import ContractViolationError, InvalidConfigError

MOBILITY_CLASSES = ("EverMoving", "EverStuck", "Intermittent")


@dataclass
class PsdResult:
    """One-sided power spectral density estimate."""

    frequencies: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.frequencies.shape != self.power.shape:
            raise ContractViolationError("PSD grids must share one shape")
        if np.any(self.power < 0):
            raise ContractViolationError("PSD power must be non-negative")


@dataclass
class SpectralDifference:
    """Rising-minus-falling PSD difference, normalized to unit peak."""

    frequencies: np.ndarray
    values: np.ndarray


def psd_welch(
    x: np.ndarray,
    fs: float,
    segment_length: int = 4096,
    overlap: float = 0.5,
    window: str = "hann",
) -> PsdResult:
    """Welch PSD with half-overlapping segments.

    The one-sided estimate integrates back to the signal variance: exactly
    for a single boxcar segment, within leakage for tapered windows.
    """
    x = np.asarray(x, dtype=float)
    if fs <= 0:
        raise InvalidConfigError("sampling rate must be positive")
    if segment_length < 2:
        raise InvalidConfigError("segment length must be at least 2 samples")
    if segment_length > x.size:
        raise InvalidConfigError("segment length exceeds the signal length")
    if not (0 <= overlap < 1):
        raise InvalidConfigError("overlap fraction must lie in [0, 1)")
    freqs, power = sps.welch(
        x,
        fs=fs,
        window=window,
        nperseg=segment_length,
        noverlap=int(round(overlap * segment_length)),
    )
    return PsdResult(frequencies=freqs, power=power)


def normalize_psd(psd: PsdResult) -> PsdResult:
    """PSD scaled to unit maximum."""
    peak = psd.power.max() if psd.power.size else 0.0
    if peak <= 0:
        raise ContractViolationError("cannot normalize an identically zero PSD")
    return PsdResult(frequencies=psd.frequencies.copy(), power=psd.power / peak)


def spectral_difference(rising: PsdResult, falling: PsdResult) -> SpectralDifference:
    """Raw PSD difference rising - falling, scaled by its absolute peak."""
    if rising.frequencies.shape != falling.frequencies.shape or np.any(
        rising.frequencies != falling.frequencies
    ):
        raise ContractViolationError("PSD difference needs one frequency grid")
    diff = rising.power - falling.power
    scale = np.abs(diff).max() if diff.size else 0.0
    if scale > 0:
        diff = diff / scale
    return SpectralDifference(frequencies=rising.frequencies.copy(), values=diff)


def rmsa_envelope(
    x: np.ndarray,
    fs: float,
    window: float = 60.0,
    band: Tuple[float, float] = (0.5, 95.0),
) -> np.ndarray:
    """Sliding RMS of the band-passed signal (RMSA).

    Fourth-order zero-phase Butterworth band-pass followed by a centered
    RMS window; window means near the record edges use the available
    samples only.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = band
    if not (0 < lo < hi < fs / 2.0):
        raise InvalidConfigError("RMSA band must satisfy 0 < lo < hi < Nyquist")
    taps = int(round(window * fs))
    if taps < 1:
        raise InvalidConfigError("RMSA window must cover at least one sample")
    if taps > x.size:
        raise InvalidConfigError("RMSA window exceeds the signal length")
    sos = sps.butter(4, band, btype="bandpass", fs=fs, output="sos")
    y = sps.sosfiltfilt(sos, x)
    c = np.concatenate(([0.0], np.cumsum(y * y)))
    idx = np.arange(x.size)
    start = np.maximum(idx - (taps - 1) // 2, 0)
    stop = np.minimum(idx + taps // 2 + 1, x.size)
    return np.sqrt((c[stop] - c[start]) / (stop - start))


@dataclass
class TransportThresholds:
    """Stuck/suspension criteria in units of grain diameter and m/s."""

    z_rel_factor: float = 1.1
    v_thresh: float = 0.05

    def __post_init__(self):
        if self.z_rel_factor <= 0 or self.v_thresh <= 0:
            raise InvalidConfigError("transport thresholds must be positive")


@dataclass
class TransportMetrics:
    """Time-series and per-particle summaries of bedload motion."""

    times: np.ndarray
    stuck_fraction: np.ndarray
    mean_z_rel: np.ndarray
    mean_moving_vx: np.ndarray
    bulk_flux: np.ndarray
    particle_id: np.ndarray
    diameter: np.ndarray
    mass: np.ndarray
    rest_time: np.ndarray
    suspension_time: np.ndarray
    lifetime: np.ndarray
    mobility_class: np.ndarray

    def class_members(self, name: str) -> np.ndarray:
        if name not in MOBILITY_CLASSES:
            raise InvalidConfigError(f"unknown mobility class '{name}'")
        return self.particle_id[self.mobility_class == name]


def transport_metrics(
    rec_k: np.ndarray,
    particle_ids: np.ndarray,
    x: np.ndarray,
    z: np.ndarray,
    vx: np.ndarray,
    diameters: np.ndarray,
    masses: np.ndarray,
    bed: BedProfile,
    fs: float,
    thresholds: Optional[TransportThresholds] = None,
) -> TransportMetrics:
    """Reduce trajectory records to transport statistics.

    A sample is stuck when the particle sits below z_rel_factor grain
    diameters above the local bed and moves slower than v_thresh; it is
    suspended when at or above that height. Samples in neither state
    (rolling transit) count toward neither time budget. A particle stuck
    at every sample is EverStuck, one never stuck is EverMoving, anything
    else Intermittent.
    """
    if thresholds is None:
        thresholds = TransportThresholds()
    rec_k = np.asarray(rec_k, dtype=np.int64)
    particle_ids = np.asarray(particle_ids, dtype=np.int64)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    vx = np.asarray(vx, dtype=float)
    diameters = np.asarray(diameters, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if not (rec_k.size == particle_ids.size == x.size == z.size == vx.size):
        raise ContractViolationError("trajectory columns must share one length")
    if diameters.size != masses.size:
        raise ContractViolationError("diameters and masses must share one length")

    n_particles = diameters.size
    n_rec = int(rec_k.max()) + 1 if rec_k.size else 0
    dt_rec = 1.0 / fs

    d_row = diameters[particle_ids] if rec_k.size else np.empty(0)
    z_rel = z - bed_elevation(bed, x) if rec_k.size else np.empty(0)
    stuck = (z_rel < thresholds.z_rel_factor * d_row) & (vx < thresholds.v_thresh)
    suspended = z_rel >= thresholds.z_rel_factor * d_row

    counts = np.bincount(rec_k, minlength=n_rec).astype(float)
    alive = counts > 0

    def per_record(values, mask=None, norm=None):
        if mask is None:
            sums = np.bincount(rec_k, weights=values, minlength=n_rec)
        else:
            sums = np.bincount(rec_k[mask], weights=values[mask], minlength=n_rec)
        if norm is None:
            return sums
        out = np.zeros(n_rec)
        np.divide(sums, norm, out=out, where=norm > 0)
        return out

    stuck_fraction = per_record(stuck.astype(float), norm=counts)
    with np.errstate(invalid="ignore"):
        mean_z_rel = per_record(
            np.divide(z_rel, d_row, out=np.zeros_like(z_rel), where=d_row > 0),
            norm=counts,
        )
    moving = ~stuck
    moving_counts = np.bincount(rec_k[moving], minlength=n_rec).astype(float)
    mean_moving_vx = per_record(vx, mask=moving, norm=moving_counts)
    bulk_flux = per_record(masses[particle_ids] * vx if rec_k.size else np.empty(0))

    samples = np.bincount(particle_ids, minlength=n_particles)
    stuck_n = np.bincount(
        particle_ids, weights=stuck.astype(float), minlength=n_particles
    )
    susp_n = np.bincount(
        particle_ids, weights=suspended.astype(float), minlength=n_particles
    )
    mobility = np.full(n_particles, "Intermittent", dtype=object)
    mobility[stuck_n == 0] = "EverMoving"
    mobility[stuck_n == samples] = "EverStuck"

    return TransportMetrics(
        times=np.arange(n_rec) / fs,
        stuck_fraction=stuck_fraction,
        mean_z_rel=mean_z_rel,
        mean_moving_vx=mean_moving_vx,
        bulk_flux=bulk_flux,
        particle_id=np.arange(n_particles),
        diameter=diameters,
        mass=masses,
        rest_time=stuck_n * dt_rec,
        suspension_time=susp_n * dt_rec,
        lifetime=samples.astype(float) * dt_rec,
        mobility_class=mobility,
    )


__all__ = [
    "MOBILITY_CLASSES",
    "PsdResult",
    "SpectralDifference",
    "TransportThresholds",
    "TransportMetrics",
    "psd_welch",
    "normalize_psd",
    "spectral_difference",
    "rmsa_envelope",
    "transport_metrics",
]
