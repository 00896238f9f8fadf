"""Bed forcing synthesis: contact pulses and hydrodynamic signals.

Contact events become finite-duration Ricker force pulses whose positive
lobe carries the event impulse; pulses are synthesized on a 10x oversampled
grid and band-limited down to the output rate. Water forcing combines a
broadband turbulence signal with narrow-band vortex shedding, modulated by
the near-bed velocity and optionally smoothed with a causal moving average.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numba
import numpy as np
from scipy import signal as sps

from .errors import ContractViolationError, InvalidConfigError
from .granular import ContactEvent, EventKind, contact_time

# pulses are truncated where the wavelet falls below ~1e-10
PULSE_SUPPORT_FACTOR = 5.0
# internal synthesis rate relative to the output rate
OVERSAMPLE = 10


@dataclass
class ForcingSeries:
    """One mechanism's bed force sampled on a uniform grid."""

    mechanism: str
    t0: float
    fs: float
    values: np.ndarray
    location_x: Optional[float] = None
    location_grid: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.fs <= 0:
            raise InvalidConfigError("forcing sampling rate must be positive")
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ContractViolationError(
                f"{self.mechanism} forcing contains non-finite values"
            )

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.size) / self.fs


@dataclass
class WaterForcingParams:
    """Shape parameters of the hydrodynamic bed forcing."""

    p: float = 3.0
    w_turb: float = 1.0
    w_tone: float = 0.0
    turb_band: Tuple[float, float] = (30.0, 90.0)
    taper_band: Tuple[float, float] = (0.5, 100.0)
    strouhal: float = 0.2
    shed_length: float = 0.05
    shed_rel_bandwidth: float = 0.1

    def __post_init__(self):
        if self.w_turb < 0 or self.w_tone < 0:
            raise InvalidConfigError("water forcing weights must be non-negative")
        if abs(self.w_turb + self.w_tone - 1.0) > 1e-12:
            raise InvalidConfigError("water forcing weights must sum to 1")
        lo, hi = self.turb_band
        tlo, thi = self.taper_band
        if not (0 < lo < hi):
            raise InvalidConfigError("turbulence band must be an increasing positive pair")
        if not (0 < tlo <= lo and hi <= thi):
            raise InvalidConfigError("turbulence band must nest inside the taper band")


def ricker(t, f0: float):
    """Zero-mean wavelet (1 - 2 pi^2 f0^2 t^2) exp(-pi^2 f0^2 t^2)."""
    if f0 <= 0:
        raise InvalidConfigError("ricker center frequency must be positive")
    q = (math.pi * f0) ** 2 * np.asarray(t, dtype=float) ** 2
    out = (1.0 - 2.0 * q) * np.exp(-q)
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out)
    return out


def positive_lobe_integral(f0: float) -> float:
    """Integral of the wavelet's central positive lobe, sqrt(2)e^-1/2/(pi f0)."""
    if f0 <= 0:
        raise InvalidConfigError("ricker center frequency must be positive")
    return math.sqrt(2.0) * math.exp(-0.5) / (math.pi * f0)


@numba.njit(cache=True)
def _superpose(out, times, f0s, amps, fs, support):
    n = out.shape[0]
    for e in range(times.shape[0]):
        t_e = times[e]
        f0 = f0s[e]
        a = amps[e]
        half = support / f0
        i0 = int(math.ceil((t_e - half) * fs))
        i1 = int(math.floor((t_e + half) * fs))
        if i0 < 0:
            i0 = 0
        if i1 > n - 1:
            i1 = n - 1
        c = math.pi * math.pi * f0 * f0
        for i in range(i0, i1 + 1):
            tau = i / fs - t_e
            q = c * tau * tau
            out[i] += a * (1.0 - 2.0 * q) * math.exp(-q)
    return out


# symmetric anti-alias FIR; odd length keeps the group delay on a sample
_DECIM_TAPS = 32 * OVERSAMPLE + 1


def _decimate(x_hi: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return x_hi.copy()
    taps = sps.firwin(_DECIM_TAPS, 1.0 / factor, window=("kaiser", 14.0))
    full = sps.fftconvolve(x_hi, taps, mode="full")
    delay = (_DECIM_TAPS - 1) // 2
    return full[delay : delay + x_hi.size : factor]


def superpose_pulse_train(
    times: np.ndarray,
    contact_times: np.ndarray,
    impulses: np.ndarray,
    fs: float,
    duration: float,
) -> np.ndarray:
    """Sum of impulse-scaled Ricker pulses sampled at fs over [0, duration].

    Synthesized at OVERSAMPLE x fs and band-limited back down, so pulses
    short compared to the sampling interval stay alias-free. Output length
    is round(duration*fs) + 1 (both endpoints on the grid).
    """
    times = np.asarray(times, dtype=float)
    contact_times = np.asarray(contact_times, dtype=float)
    impulses = np.asarray(impulses, dtype=float)
    if np.any(impulses < 0):
        raise ContractViolationError("pulse impulses must be non-negative")
    if times.size and (times.min() < 0 or times.max() > duration):
        raise ContractViolationError("event times must lie within [0, duration]")
    n = int(round(duration * fs)) + 1
    n_hi = (n - 1) * OVERSAMPLE + 1
    hi = np.zeros(n_hi)
    if times.size:
        f0s = 1.0 / contact_times
        amps = impulses / (math.sqrt(2.0) * math.exp(-0.5) / (math.pi * f0s))
        _superpose(hi, times, f0s, amps, fs * OVERSAMPLE, PULSE_SUPPORT_FACTOR)
    return _decimate(hi, OVERSAMPLE)


def event_pulse(event: ContactEvent, fs: float) -> ForcingSeries:
    """One event's force pulse on the fs grid, positive lobe carrying J.

    The pulse has center frequency f0 = 1/t_c, support +-5/f0 around the
    event time, and amplitude J divided by the wavelet's positive-lobe
    integral. Pulses too short for fs are synthesized oversampled and
    band-limited down.
    """
    if event.impulse_J < 0:
        raise ContractViolationError("event impulse must be non-negative")
    f0 = 1.0 / event.contact_time_tc
    half = PULSE_SUPPORT_FACTOR / f0
    k0 = math.floor((event.time - half) * fs)
    k1 = math.ceil((event.time + half) * fs)
    n = int(k1 - k0) + 1
    n_hi = (n - 1) * OVERSAMPLE + 1
    hi = np.zeros(n_hi)
    amp = event.impulse_J / positive_lobe_integral(f0)
    t_local = event.time - k0 / fs
    _superpose(
        hi,
        np.array([t_local]),
        np.array([f0]),
        np.array([amp]),
        fs * OVERSAMPLE,
        PULSE_SUPPORT_FACTOR,
    )
    return ForcingSeries(
        mechanism=event.kind.value,
        t0=k0 / fs,
        fs=fs,
        values=_decimate(hi, OVERSAMPLE),
        location_x=event.x_position,
    )


def assemble_particle_forcing(
    events: Sequence[ContactEvent], fs: float, duration: float
) -> Tuple[ForcingSeries, ForcingSeries]:
    """Superpose event pulses on a common grid, split by event kind."""
    by_kind = {EventKind.IMPACT: [], EventKind.ROLLING: []}
    for ev in events:
        by_kind[ev.kind].append(ev)
    out = {}
    for kind, group in by_kind.items():
        values = superpose_pulse_train(
            np.array([ev.time for ev in group]),
            np.array([ev.contact_time_tc for ev in group]),
            np.array([ev.impulse_J for ev in group]),
            fs,
            duration,
        )
        out[kind] = ForcingSeries(mechanism=kind.value, t0=0.0, fs=fs, values=values)
    return out[EventKind.IMPACT], out[EventKind.ROLLING]


def _raised_cosine_log(f: np.ndarray, f_zero: float, f_one: float) -> np.ndarray:
    """Smooth 0 -> 1 ramp in log frequency between f_zero and f_one."""
    if f_one == f_zero:
        return np.where(f >= f_one, 1.0, 0.0)
    pos = np.log(np.maximum(f, 1e-300) / f_zero) / np.log(f_one / f_zero)
    pos = np.clip(pos, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * pos))


def _normalized_noise(amplitude: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Gaussian process with the given one-sided spectral amplitude, unit RMS."""
    rng = np.random.default_rng(seed)
    re = rng.standard_normal(amplitude.size)
    im = rng.standard_normal(amplitude.size)
    spec = amplitude * (re + 1j * im)
    spec[0] = 0.0
    if n % 2 == 0:
        spec[-1] = spec[-1].real
    x = np.fft.irfft(spec, n)
    x = x - x.mean()
    rms = math.sqrt(float(np.mean(x * x)))
    if rms == 0.0:
        raise InvalidConfigError("spectral band produced an identically zero signal")
    return x / rms


def turbulence_signal(
    n: int, fs: float, params: WaterForcingParams, seed: int
) -> np.ndarray:
    """Zero-mean unit-RMS noise with f^(-5/6) amplitude inside the band.

    Outside the band the amplitude holds the edge value and rolls off with
    a raised-cosine taper in log frequency, reaching zero at the taper
    edges; nothing is synthesized beyond them.
    """
    if n < 256:
        raise InvalidConfigError("turbulence synthesis needs n >= 256 samples")
    if params.taper_band[1] > fs / 2.0 + 1e-12:
        raise InvalidConfigError("taper band exceeds the Nyquist frequency")
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    lo, hi = params.turb_band
    tlo, thi = params.taper_band
    amp = np.zeros_like(freqs)
    pos = freqs > 0
    f = freqs[pos]
    base = np.clip(f, lo, hi) ** (-5.0 / 6.0)
    taper = np.ones_like(f)
    below = f < lo
    if np.any(below):
        taper[below] = _raised_cosine_log(f[below], tlo, lo)
    above = f > hi
    if np.any(above):
        # mirror of the low-side ramp: 1 at hi, 0 at thi, in log frequency
        if thi == hi:
            taper[above] = 0.0
        else:
            ramp = np.log(thi / f[above]) / np.log(thi / hi)
            ramp = np.clip(ramp, 0.0, 1.0)
            taper[above] = 0.5 * (1.0 - np.cos(np.pi * ramp))
    amp[pos] = base * taper
    return _normalized_noise(amp, n, seed)


def shedding_signal(
    n: int, fs: float, f_s: float, rel_bandwidth: float, seed: int
) -> np.ndarray:
    """Zero-mean unit-RMS noise with a Gaussian spectral envelope at f_s."""
    if not (0 < f_s < fs / 2.0):
        raise InvalidConfigError("shedding frequency must lie below Nyquist")
    if rel_bandwidth <= 0:
        raise InvalidConfigError("shedding bandwidth must be positive")
    if n < 16:
        raise InvalidConfigError("shedding synthesis needs n >= 16 samples")
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    sigma = rel_bandwidth * f_s
    amp = np.exp(-0.5 * ((freqs - f_s) / sigma) ** 2)
    amp[0] = 0.0
    return _normalized_noise(amp, n, seed)


def strouhal_frequency(st: float, u0: float, d: float) -> float:
    """Vortex shedding frequency St*U0/D."""
    if d <= 0:
        raise InvalidConfigError("shedding length scale must be positive")
    return st * u0 / d


def water_forcing(
    u_eff: np.ndarray,
    params: WaterForcingParams,
    s_turb: np.ndarray,
    s_tone: np.ndarray,
    amplitude_scale: float,
    fs: float = 200.0,
    grid: Optional[np.ndarray] = None,
) -> ForcingSeries:
    """Hydrodynamic bed force u_eff^p * (w_turb s_turb + w_tone s_tone).

    The returned series is the total water force, to be partitioned over
    the bed grid locations when propagated as a distributed source.
    """
    u_eff = np.asarray(u_eff, dtype=float)
    s_turb = np.asarray(s_turb, dtype=float)
    s_tone = np.asarray(s_tone, dtype=float)
    if not (u_eff.size == s_turb.size == s_tone.size):
        raise ContractViolationError("water forcing inputs must share one length")
    if np.any(u_eff < 0):
        raise ContractViolationError("effective velocity must be non-negative")
    if params.w_tone == 0.0:
        mechanism = "Turbulence"
    elif params.w_turb == 0.0:
        mechanism = "Shedding"
    else:
        mechanism = "Water"
    values = amplitude_scale * u_eff**params.p * (
        params.w_turb * s_turb + params.w_tone * s_tone
    )
    return ForcingSeries(
        mechanism=mechanism, t0=0.0, fs=fs, values=values, location_grid=grid
    )


def smooth_forcing(series: ForcingSeries, window: float) -> ForcingSeries:
    """Causal moving average over the window; ramps up over the first window."""
    if window < 1.0 / series.fs:
        raise InvalidConfigError("smoothing window must cover at least one sample")
    taps = int(round(window * series.fs))
    if taps <= 1:
        values = series.values.copy()
    else:
        kernel = np.full(taps, 1.0 / taps)
        values = np.convolve(series.values, kernel, mode="full")[: series.values.size]
    return ForcingSeries(
        mechanism=series.mechanism,
        t0=series.t0,
        fs=series.fs,
        values=values,
        location_x=series.location_x,
        location_grid=series.location_grid,
    )


__all__ = [
    "ForcingSeries",
    "WaterForcingParams",
    "contact_time",
    "ricker",
    "positive_lobe_integral",
    "event_pulse",
    "superpose_pulse_train",
    "assemble_particle_forcing",
    "turbulence_signal",
    "shedding_signal",
    "strouhal_frequency",
    "water_forcing",
    "smooth_forcing",
]
