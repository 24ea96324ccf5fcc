"""Dynamics -> polarimeter -> spectrum chain used by the experiment drivers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .dynamics import DynamicsConfig, EnsembleParams, StrobeWaveform, gate_fraction, iter_batches, sample_times
from .errors import ConfigError
from .polarimeter import (
    NoiseArea,
    PolarimeterConfig,
    PSDEstimate,
    atomic_noise_area,
    estimate_psn_floor,
    exclusion_band,
    image_bands,
    synthesize_signal,
    welch_psd,
)


@dataclass
class NoiseMeasurement:
    psd: PSDEstimate
    area: NoiseArea
    exclusion: tuple


def check_sampling(dyn: DynamicsConfig, pol: PolarimeterConfig):
    if abs(pol.sample_rate * dyn.sample_dt - 1.0) > 1e-9:
        raise ConfigError([(
            "polarimeter.sample_rate",
            f"must equal 1/(dynamics.dt * dynamics.sample_every) = {1 / dyn.sample_dt:.9g} Hz",
        )])


def default_segment_len(dyn: DynamicsConfig) -> int:
    return max(dyn.n_samples // 4, 2)


def simulate_psd(dyn: DynamicsConfig, params: EnsembleParams, strobe: StrobeWaveform,
                 pol: PolarimeterConfig, n_traj: int, *, segment_len=None, threads=1,
                 backend=None, keep_first=False):
    """Averaged polarimeter PSD over ``n_traj`` simulated records.

    With ``keep_first`` the rotation signal and spin samples of trajectory 0
    are returned as well (for CSV export).
    """
    check_sampling(dyn, pol)
    segment_len = segment_len or default_segment_len(dyn)
    t = sample_times(dyn)
    gate = gate_fraction(t, dyn.sample_dt, strobe)
    first = None
    total = None
    for indices, out in iter_batches(dyn, params, strobe, n_traj, threads=threads, backend=backend):
        mx = out[:, :, 0]
        phi = np.empty_like(mx)
        for row, i in enumerate(indices):
            gen = _rng.stream(dyn.seed, i, _rng.SHOT_NOISE)
            phi[row] = synthesize_signal(mx[row], gate, pol, gen, duty=strobe.duty)
        psd = welch_psd(phi, segment_len, "hann", pol.sample_rate)
        total = psd if total is None else total + psd
        if keep_first and first is None:
            first = (t, phi[0].copy(), out[0].copy())
    return (total, first) if keep_first else total


def noise_area(psd: PSDEstimate, f_L: float, band=None, n_widths=10.0, f_s=None) -> NoiseMeasurement:
    """Atomic noise area above the median shot-noise floor.

    With ``f_s`` the floor also skips the strobe sidebands of the resonance,
    whose tails otherwise lift the median.  On short records the sidebands can
    cover every bin; the floor then falls back to skipping the resonance only.
    """
    excl = exclusion_band(psd, f_L, n_widths)
    floor = None
    if f_s is not None:
        try:
            floor = estimate_psn_floor(psd, image_bands(excl, f_L, f_s, psd.freqs[-1]))
        except ValueError:
            pass
    if floor is None:
        floor = estimate_psn_floor(psd, excl)
    return NoiseMeasurement(psd, atomic_noise_area(psd, floor, band), excl)


def measure_noise(dyn, params, strobe, pol, n_traj, *, segment_len=None, threads=1, backend=None,
                  band=None, n_widths=10.0) -> NoiseMeasurement:
    psd = simulate_psd(dyn, params, strobe, pol, n_traj, segment_len=segment_len,
                       threads=threads, backend=backend)
    return noise_area(psd, dyn.f_L, band, n_widths, f_s=strobe.f_s if strobe.duty < 1 else None)
