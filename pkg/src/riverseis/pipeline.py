"""Run orchestration: simulate, force, propagate, analyze, emit artifacts.

A run directory receives the full artifact set: trajectory and event
tables, per-mechanism forcing series, the synthetic seismogram, per-
mechanism and total PSDs, transport metrics, and a manifest. Identical
config and seed reproduce every CSV byte for byte; the manifest carries
wall-clock times and is the only non-reproducible file.
"""
from __future__ import annotations

import datetime as _dt
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .analysis import (
    TransportMetrics,
    TransportThresholds,
    psd_welch,
    transport_metrics,
)
from .bed import FlowProfile, fluid_velocity
from .config import SimulationConfig, config_to_dict, config_from_dict
from .errors import InvalidConfigError
from .forcing import (
    ForcingSeries,
    WaterForcingParams,
    smooth_forcing,
    shedding_signal,
    strouhal_frequency,
    superpose_pulse_train,
    turbulence_signal,
    water_forcing,
)
from .propagation import (
    MECHANISMS,
    MediumModel,
    MixWeights,
    ReceiverGeometry,
    VelocitySpectrum,
    propagate_distributed,
    propagate_point_sources,
    synthesize_total,
    velocity_time_series,
)
from .simulate import RunResult, run_simulation, seed_streams

logger = logging.getLogger(__name__)

# streamwise grouping of contact events into point sources; bins are much
# narrower than any source-receiver distance of interest
N_SOURCE_BINS = 128

ARTIFACT_FILES = (
    "trajectories.csv",
    "events.csv",
    "forcing_impact.csv",
    "forcing_rolling.csv",
    "forcing_turb.csv",
    "forcing_shed.csv",
    "seismogram.csv",
    "psd_total.csv",
    "psd_impact.csv",
    "psd_rolling.csv",
    "psd_turb.csv",
    "psd_shed.csv",
    "transport_timeseries.csv",
    "transport_particles.csv",
)

_FORCING_FILE = {
    "impact": "forcing_impact.csv",
    "rolling": "forcing_rolling.csv",
    "turbulence": "forcing_turb.csv",
    "shedding": "forcing_shed.csv",
}
_PSD_FILE = {
    "impact": "psd_impact.csv",
    "rolling": "psd_rolling.csv",
    "turbulence": "psd_turb.csv",
    "shedding": "psd_shed.csv",
}


@dataclass
class RunManifest:
    """Provenance record emitted with every run."""

    config_hash: str
    seed: int
    version: str
    started_utc: str
    finished_utc: str
    outputs: List[str]

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": self.version,
            "started_utc": self.started_utc,
            "finished_utc": self.finished_utc,
            "outputs": list(self.outputs),
        }


def _utcnow() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _next_pow2(m: int) -> int:
    n = 1
    while n < m:
        n *= 2
    return n


def _write_csv(path: Path, columns: Dict[str, np.ndarray], float_format: str = "%.9g"):
    frame = pd.DataFrame(columns)
    frame.to_csv(path, index=False, lineterminator="\n", float_format=float_format)


def _binned_sources(
    times: np.ndarray,
    tcs: np.ndarray,
    impulses: np.ndarray,
    xs: np.ndarray,
    mechanism: str,
    length: float,
    fs: float,
    duration: float,
) -> Tuple[List[Tuple[ForcingSeries, float]], np.ndarray]:
    """Group events into streamwise bins; one pulse train per occupied bin."""
    n_sig = int(round(duration * fs)) + 1
    total = np.zeros(n_sig)
    pulses: List[Tuple[ForcingSeries, float]] = []
    if times.size == 0:
        return pulses, total
    bin_idx = np.minimum((xs / length * N_SOURCE_BINS).astype(int), N_SOURCE_BINS - 1)
    for b in range(N_SOURCE_BINS):
        sel = bin_idx == b
        if not np.any(sel):
            continue
        values = superpose_pulse_train(times[sel], tcs[sel], impulses[sel], fs, duration)
        total += values
        center = (b + 0.5) * length / N_SOURCE_BINS
        pulses.append(
            (ForcingSeries(mechanism, 0.0, fs, values, location_x=center), center)
        )
    return pulses, total


def _mix_coefficients(
    fractions: Dict[str, float], sigmas: Dict[str, float]
) -> Dict[str, float]:
    """Scale factors making each mechanism's variance share match its fraction.

    The anchor mechanism (impact when present) keeps unit scale, so the
    particle-force amplitudes stay physical. Mechanisms with zero weight or
    a silent component are excluded.
    """
    total_w = sum(fractions.values())
    kept = {
        name
        for name in MECHANISMS
        if fractions[name] > 0 and sigmas[name] > 0
    }
    alphas = {name: 0.0 for name in MECHANISMS}
    if not kept or total_w <= 0:
        return alphas
    w = {name: fractions[name] / total_w for name in kept}
    anchor = "impact" if "impact" in kept else max(kept, key=lambda nm: w[nm])
    for name in kept:
        alphas[name] = math.sqrt(w[name] / w[anchor]) * sigmas[anchor] / sigmas[name]
    return alphas


def run_pipeline(cfg: SimulationConfig, out_dir) -> RunManifest:
    """Execute a full run and write the artifact set into out_dir."""
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    started = _utcnow()
    written: List[Path] = []
    try:
        manifest = _run_into(cfg, out_path, started, written)
    except BaseException:
        for path in written:
            try:
                path.unlink()
            except OSError:
                pass
        raise
    return manifest


def _run_into(
    cfg: SimulationConfig, out_path: Path, started: str, written: List[Path]
) -> RunManifest:
    fs = cfg.simulation.fs
    duration = cfg.simulation.duration
    n_sig = int(round(duration * fs)) + 1
    n_fft = _next_pow2(n_sig)
    length = cfg.domain.length

    result = run_simulation(cfg)

    geometry = ReceiverGeometry(
        receiver_x=cfg.receiver_x,
        receiver_offset=cfg.receiver.offset,
        r_min=cfg.medium.r_min,
        domain_length=length,
    )
    medium = MediumModel(
        rho_m=cfg.medium.rho_m, v_c=cfg.medium.v_c, v_u=cfg.v_u, q=cfg.medium.q
    )

    # particle mechanisms: impact and rolling pulse trains, binned by reach
    forcing_values: Dict[str, np.ndarray] = {}
    spectra: Dict[str, VelocitySpectrum] = {}
    for name, kind_code in (("impact", 0), ("rolling", 1)):
        mask = result.ev_kind == kind_code
        pulses, total = _binned_sources(
            result.ev_time[mask],
            result.ev_tc[mask],
            result.ev_impulse[mask],
            result.ev_x[mask],
            name.capitalize(),
            length,
            fs,
            duration,
        )
        forcing_values[name] = total
        spectra[name] = propagate_point_sources(pulses, geometry, medium, fs, n_fft)

    # water mechanisms: common effective velocity, split into turbulence
    # and shedding tones, each distributed over the source grid
    seeds = seed_streams(cfg.seed)
    profile = FlowProfile(
        u_ref=cfg.flow.u0,
        z_ref=cfg.flow.flow_depth,
        z0=cfg.z0,
        exponent=cfg.flow.profile_exponent,
    )
    u_near_bed = float(fluid_velocity(profile, cfg.median_diameter / 2.0))
    u_eff = np.full(n_sig, u_near_bed)
    peak = u_eff.max()
    if peak > 0:
        u_eff = u_eff / peak
    grid = (np.arange(cfg.water.n_source_cells) + 0.5) * (
        length / cfg.water.n_source_cells
    )

    base_params = dict(
        p=cfg.water.p,
        turb_band=tuple(cfg.water.turb_band),
        taper_band=tuple(cfg.water.taper_band),
        strouhal=cfg.water.strouhal,
        shed_length=cfg.shed_length,
        shed_rel_bandwidth=cfg.water.shed_rel_bandwidth,
    )
    turb_params = WaterForcingParams(w_turb=1.0, w_tone=0.0, **base_params)
    s_turb = turbulence_signal(n_sig, fs, turb_params, seeds["turbulence"])
    f_turb = water_forcing(
        u_eff, turb_params, s_turb, np.zeros(n_sig),
        cfg.water.amplitude_scale, fs=fs, grid=grid,
    )
    f_turb = smooth_forcing(f_turb, cfg.water.smoothing_window)
    forcing_values["turbulence"] = f_turb.values
    spectra["turbulence"] = propagate_distributed(f_turb, geometry, medium, fs, n_fft)

    f_shed_hz = strouhal_frequency(cfg.water.strouhal, cfg.flow.u0, cfg.shed_length)
    if 0.0 < f_shed_hz < fs / 2.0:
        s_tone = shedding_signal(
            n_sig, fs, f_shed_hz, cfg.water.shed_rel_bandwidth, seeds["shedding"]
        )
    else:
        logger.warning(
            "shedding tone at %.3g Hz outside (0, Nyquist); emitting silence",
            f_shed_hz,
        )
        s_tone = np.zeros(n_sig)
    tone_params = WaterForcingParams(w_turb=0.0, w_tone=1.0, **base_params)
    f_shed = water_forcing(
        u_eff, tone_params, np.zeros(n_sig), s_tone,
        cfg.water.amplitude_scale, fs=fs, grid=grid,
    )
    f_shed = smooth_forcing(f_shed, cfg.water.smoothing_window)
    forcing_values["shedding"] = f_shed.values
    spectra["shedding"] = propagate_distributed(f_shed, geometry, medium, fs, n_fft)

    # energy-fraction mixing: component variances realize the configured
    # weight split; per-mechanism records are diagnostics, the seismogram
    # is the weighted sum (PSDs of components do not add linearly)
    unit_components = {
        name: velocity_time_series(spectra[name])[:n_sig] for name in MECHANISMS
    }
    sigmas = {name: float(np.std(unit_components[name])) for name in MECHANISMS}
    fractions = {
        "impact": cfg.weights.impact,
        "rolling": cfg.weights.rolling,
        "turbulence": cfg.weights.turbulence,
        "shedding": cfg.weights.shedding,
    }
    alphas = _mix_coefficients(fractions, sigmas)
    components = {
        name: alphas[name] * unit_components[name] for name in MECHANISMS
    }
    weights = MixWeights(**alphas)
    seismogram = synthesize_total(spectra, weights, fs, n_fft)[:n_sig]

    segment = min(cfg.analysis.welch_segment, n_sig)
    psd_kwargs = dict(
        fs=fs, segment_length=segment, overlap=cfg.analysis.welch_overlap
    )
    psd_total = psd_welch(seismogram, **psd_kwargs)
    psds = {name: psd_welch(components[name], **psd_kwargs) for name in MECHANISMS}

    transport = transport_metrics(
        result.rec_k,
        result.rec_id,
        result.rec_x,
        result.rec_z,
        result.rec_vx,
        result.diameters,
        result.masses,
        result.bed,
        fs,
        TransportThresholds(),
    )

    times = np.arange(n_sig) / fs
    _emit(out_path, written, "trajectories.csv", {
        "time_s": result.rec_k / fs,
        "particle_id": result.rec_id,
        "x_m": result.rec_x,
        "z_m": result.rec_z,
        "vx_ms": result.rec_vx,
        "vz_ms": result.rec_vz,
        "diameter_m": result.diameters[result.rec_id],
    }, float_format="%.7g")
    _emit(out_path, written, "events.csv", {
        "time_s": result.ev_time,
        "kind": result.kind_labels(),
        "particle_id": result.ev_id,
        "x_m": result.ev_x,
        "impulse_Ns": result.ev_impulse,
        "tc_s": result.ev_tc,
        "pre_vz_ms": result.ev_pre_vz,
    })
    for name in MECHANISMS:
        _emit(out_path, written, _FORCING_FILE[name], {
            "time_s": times,
            "force_N": forcing_values[name],
        })
    _emit(out_path, written, "seismogram.csv", {
        "time_s": times,
        "velocity_ms": seismogram,
    })
    _emit(out_path, written, "psd_total.csv", {
        "freq_hz": psd_total.frequencies,
        "power": psd_total.power,
    })
    for name in MECHANISMS:
        _emit(out_path, written, _PSD_FILE[name], {
            "freq_hz": psds[name].frequencies,
            "power": psds[name].power,
        })
    _emit(out_path, written, "transport_timeseries.csv", {
        "time_s": transport.times,
        "stuck_fraction": transport.stuck_fraction,
        "mean_z_rel": transport.mean_z_rel,
        "mean_moving_vx": transport.mean_moving_vx,
        "bulk_flux": transport.bulk_flux,
    })
    _emit(out_path, written, "transport_particles.csv", {
        "particle_id": transport.particle_id,
        "diameter_m": transport.diameter,
        "mass_kg": transport.mass,
        "mobility_class": transport.mobility_class,
        "rest_time_s": transport.rest_time,
        "suspension_time_s": transport.suspension_time,
        "lifetime_s": transport.lifetime,
    })

    manifest = RunManifest(
        config_hash=cfg.config_hash(),
        seed=cfg.seed,
        version=__version__,
        started_utc=started,
        finished_utc=_utcnow(),
        outputs=sorted(p.name for p in written),
    )
    manifest_path = out_path / "manifest.json"
    payload = manifest.to_dict()
    payload["config"] = config_to_dict(cfg)
    manifest_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    written.append(manifest_path)
    return manifest


def _emit(out_path, written, name, columns, float_format="%.9g"):
    path = out_path / name
    _write_csv(path, columns, float_format=float_format)
    written.append(path)


def compare_spectra(synthetic_path, reference_path, band=(0.5, 100.0)) -> dict:
    """Compare two PSD CSVs: peak offset, band misfit, band power shares.

    Grids that differ are compared on the synthetic grid with the
    reference linearly resampled onto it.
    """
    lo, hi = band
    if not (0 <= lo < hi):
        raise InvalidConfigError("comparison band must be an increasing pair")
    syn = pd.read_csv(synthetic_path)
    ref = pd.read_csv(reference_path)
    for frame, path in ((syn, synthetic_path), (ref, reference_path)):
        if not {"freq_hz", "power"}.issubset(frame.columns):
            raise InvalidConfigError(
                f"{path} lacks the freq_hz/power PSD columns"
            )
    f_syn = syn["freq_hz"].to_numpy(float)
    p_syn = syn["power"].to_numpy(float)
    f_ref = ref["freq_hz"].to_numpy(float)
    p_ref = ref["power"].to_numpy(float)
    peak_syn = float(f_syn[np.argmax(p_syn)])
    peak_ref = float(f_ref[np.argmax(p_ref)])
    if f_syn.size == f_ref.size and np.array_equal(f_syn, f_ref):
        p_ref_on_syn = p_ref
    else:
        p_ref_on_syn = np.interp(f_syn, f_ref, p_ref, left=0.0, right=0.0)
    mask = (f_syn >= lo) & (f_syn <= hi)
    if not np.any(mask):
        raise InvalidConfigError("comparison band contains no frequency bins")
    syn_max = p_syn.max()
    ref_max = p_ref_on_syn.max()
    if syn_max <= 0 or ref_max <= 0:
        raise InvalidConfigError("cannot compare an identically zero PSD")
    misfit = float(
        np.mean(np.abs(p_syn[mask] / syn_max - p_ref_on_syn[mask] / ref_max))
    )
    return {
        "band_hz": [float(lo), float(hi)],
        "peak_frequency_synthetic_hz": peak_syn,
        "peak_frequency_reference_hz": peak_ref,
        "peak_frequency_offset_hz": peak_syn - peak_ref,
        "band_misfit": misfit,
        "synthetic_band_power_fraction": float(p_syn[mask].sum() / p_syn.sum()),
        "reference_band_power_fraction": float(p_ref[(f_ref >= lo) & (f_ref <= hi)].sum() / p_ref.sum()),
    }


def metrics_from_trajectories(trajectories_path) -> dict:
    """Transport summary recomputed from a trajectories CSV.

    The bed profile is rebuilt from the config embedded in the sibling
    manifest.json when present; otherwise a flat zero bed is assumed and
    flagged in the output.
    """
    traj_path = Path(trajectories_path)
    frame = pd.read_csv(traj_path)
    needed = {"time_s", "particle_id", "x_m", "z_m", "vx_ms", "diameter_m"}
    missing = needed - set(frame.columns)
    if missing:
        raise InvalidConfigError(
            f"{traj_path} lacks trajectory columns: {sorted(missing)}"
        )
    manifest_path = traj_path.parent / "manifest.json"
    bed = None
    rho_s = 2650.0
    flat_bed_assumed = True
    fs = None
    if manifest_path.exists():
        payload = json.loads(manifest_path.read_text(encoding="utf-8"))
        config_dict = payload.get("config")
        if config_dict is not None:
            cfg = config_from_dict(config_dict)
            from .simulate import seed_streams as _streams
            from .bed import build_bed

            seeds = _streams(cfg.seed)
            bed = build_bed(
                length=cfg.domain.length,
                slope=cfg.domain.slope,
                n_nodes=cfg.domain.bed_nodes,
                sigma_z=cfg.domain.bed_sigma_z,
                seed=seeds["bed"],
            )
            rho_s = cfg.grain.rho_s
            fs = cfg.simulation.fs
            flat_bed_assumed = False
    if bed is None:
        from .bed import build_bed

        x_span = max(float(frame["x_m"].max()) if len(frame) else 1.0, 1.0)
        bed = build_bed(length=x_span, slope=0.0, n_nodes=2, sigma_z=0.0, seed=0)
    times = frame["time_s"].to_numpy(float)
    if fs is None:
        steps = np.unique(times)
        fs = 1.0 / np.min(np.diff(steps)) if steps.size > 1 else 1.0
    rec_k = np.rint(times * fs).astype(np.int64)
    pid = frame["particle_id"].to_numpy(np.int64)
    n_particles = int(pid.max()) + 1 if pid.size else 0
    diameters = np.zeros(n_particles)
    if pid.size:
        first_rows = np.unique(pid, return_index=True)[1]
        diameters[pid[first_rows]] = frame["diameter_m"].to_numpy(float)[first_rows]
    masses = rho_s * np.pi / 6.0 * diameters**3
    metrics = transport_metrics(
        rec_k,
        pid,
        frame["x_m"].to_numpy(float),
        frame["z_m"].to_numpy(float),
        frame["vx_ms"].to_numpy(float),
        diameters,
        masses,
        bed,
        fs,
        TransportThresholds(),
    )
    classes, counts = np.unique(metrics.mobility_class.astype(str), return_counts=True)
    return {
        "n_particles": int(n_particles),
        "flat_bed_assumed": flat_bed_assumed,
        "mobility_classes": {c: int(n) for c, n in zip(classes, counts)},
        "mean_stuck_fraction": float(np.mean(metrics.stuck_fraction))
        if metrics.stuck_fraction.size
        else 0.0,
        "mean_bulk_flux": float(np.mean(metrics.bulk_flux))
        if metrics.bulk_flux.size
        else 0.0,
        "total_rest_time_s": float(metrics.rest_time.sum()),
        "total_suspension_time_s": float(metrics.suspension_time.sum()),
    }


__all__ = [
    "ARTIFACT_FILES",
    "N_SOURCE_BINS",
    "RunManifest",
    "run_pipeline",
    "compare_spectra",
    "metrics_from_trajectories",
]
