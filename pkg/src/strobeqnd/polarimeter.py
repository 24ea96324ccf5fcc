"""Balanced-polarimeter signal synthesis and spin-noise spectral analysis.

The optical rotation recorded by the polarimeter is

    phi(t) = gate(t) * (rotation_gain * M_x(t) + shot_noise(t))

where the photon shot noise is white.  While the probe is on, its one-sided
density is ``psn_floor / duty`` so that the time-averaged floor equals
``psn_floor`` for any duty cycle at fixed average intensity.  A sample that
is only partly illuminated (``0 < gate < 1``) is weighted by ``sqrt(gate)``,
so both the atomic and the shot-noise power of a strobe period are
proportional to the illuminated time however the windows fall on the sample
grid.  For a 0/1 gate this is the expression above.

Atomic noise is quantified as the area of the averaged power spectrum above
the shot-noise floor, which does not depend on the line shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as _signal
from scipy.integrate import trapezoid

from .errors import NumericalError


@dataclass(frozen=True)
class PolarimeterConfig:
    rotation_gain: float = 1e-6
    sample_rate: float = 18e6
    psn_floor: float = 1e-16


@dataclass
class PSDEstimate:
    """One-sided power spectral density (rad^2/Hz) averaged over ``n_avg`` periodograms."""

    freqs: np.ndarray
    power: np.ndarray
    n_avg: int
    resolution: float

    def __add__(self, other):
        if not np.array_equal(self.freqs, other.freqs):
            raise ValueError("cannot combine PSDs on different frequency grids")
        n = self.n_avg + other.n_avg
        power = (self.power * self.n_avg + other.power * other.n_avg) / n
        return PSDEstimate(self.freqs, power, n, self.resolution)


@dataclass(frozen=True)
class NoiseArea:
    atomic_variance: float
    raw_variance: float
    psn_level: float
    band: tuple


def validate_polarimeter(cfg: PolarimeterConfig, f_L=None, prefix="polarimeter"):
    issues = []
    if not cfg.sample_rate > 0:
        issues.append((f"{prefix}.sample_rate", "must be > 0"))
    elif f_L is not None and cfg.sample_rate < 4 * f_L:
        issues.append((f"{prefix}.sample_rate", f"must be >= 4 f_L = {4 * f_L:g} Hz"))
    if not cfg.psn_floor >= 0:
        issues.append((f"{prefix}.psn_floor", "must be >= 0"))
    return issues


def synthesize_signal(traj, gate, cfg: PolarimeterConfig, rng: np.random.Generator, duty=None):
    """Optical rotation for the spin series ``traj`` gated by ``gate``.

    ``traj`` and ``gate`` must share the sample grid (the last axis of
    ``traj``).  ``duty`` defaults to the mean of ``gate``.
    """
    traj = np.asarray(traj, dtype=float)
    gate = np.asarray(gate, dtype=float)
    if traj.shape[-1] != gate.shape[-1]:
        raise ValueError(f"sample grids differ: {traj.shape[-1]} spin samples vs {gate.shape[-1]} gate samples")
    if duty is None:
        duty = float(gate.mean())
    weight = np.sqrt(gate)
    phi = weight * (cfg.rotation_gain * traj)
    if cfg.psn_floor > 0:
        sigma = np.sqrt(cfg.psn_floor / duty * cfg.sample_rate / 2)
        phi = phi + weight * sigma * rng.standard_normal(traj.shape)
    return phi


def welch_psd(x, segment_len: int, window: str = "hann", sample_rate: float = 1.0) -> PSDEstimate:
    """Averaged one-sided periodogram (50% overlap).

    ``x`` may be 2-D, in which case each row is a separate record and all
    segments of all rows are averaged.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[-1]
    if segment_len > n:
        raise ValueError(f"segment length {segment_len} exceeds record length {n}")
    if segment_len < 2:
        raise ValueError("segment length must be at least 2")
    noverlap = segment_len // 2
    freqs, power = _signal.welch(
        x, fs=sample_rate, window=window, nperseg=segment_len, noverlap=noverlap,
        detrend=False, return_onesided=True, scaling="density", axis=-1,
    )
    n_seg = 1 + (n - segment_len) // (segment_len - noverlap)
    return PSDEstimate(freqs, power.mean(axis=0), x.shape[0] * n_seg, sample_rate / segment_len)


def estimate_linewidth(psd: PSDEstimate, f_center: float, floor: float | None = None) -> float:
    """Half width at half maximum of the peak nearest ``f_center``, in Hz."""
    if floor is None:
        floor = float(np.median(psd.power))
    i0 = int(np.argmin(np.abs(psd.freqs - f_center)))
    lo = max(0, i0 - 3)
    peak_i = lo + int(np.argmax(psd.power[lo:i0 + 4]))
    half = floor + (psd.power[peak_i] - floor) / 2
    right = peak_i
    while right < len(psd.power) - 1 and psd.power[right] > half:
        right += 1
    left = peak_i
    while left > 0 and psd.power[left] > half:
        left -= 1
    return max((psd.freqs[right] - psd.freqs[left]) / 2, psd.resolution)


def exclusion_band(psd: PSDEstimate, f_center: float, n_widths: float = 10.0):
    """``f_center`` +- ``n_widths`` half-maximum linewidths."""
    w = n_widths * estimate_linewidth(psd, f_center)
    return (f_center - w, f_center + w)


def image_bands(band, f_center: float, f_strobe: float, f_max: float):
    """``band`` around ``f_center`` repeated at every strobe sideband ``|k f_s +- f_center|`` below ``f_max``."""
    lo, hi = band
    left, right = f_center - lo, hi - f_center
    bands = [(lo, hi)]
    for k in range(1, int((f_max + f_center) // f_strobe) + 1):
        for sign in (1, -1):
            fc = k * f_strobe + sign * f_center
            if fc >= 0:
                b = (fc - left, fc + right) if sign > 0 else (fc - right, fc + left)
            else:
                b = (-fc - left, -fc + right)
            if b[0] <= f_max:
                bands.append(b)
    return bands


def estimate_psn_floor(psd: PSDEstimate, exclusion_band) -> float:
    """Median PSD level outside the excluded band(s) (the shot-noise background).

    ``exclusion_band`` is one ``(lo, hi)`` pair or a sequence of them.
    """
    bands = [exclusion_band] if np.ndim(exclusion_band) == 1 else list(exclusion_band)
    lo, hi = bands[0]
    if not (psd.freqs[0] <= hi and lo <= psd.freqs[-1]):
        raise ValueError(f"exclusion band {bands[0]} lies outside the PSD range")
    keep = np.ones(psd.freqs.shape, dtype=bool)
    for lo, hi in bands:
        keep &= (psd.freqs < lo) | (psd.freqs > hi)
    if not keep.any():
        raise ValueError("exclusion band covers the whole spectrum")
    return float(np.median(psd.power[keep]))


def atomic_noise_area(psd: PSDEstimate, floor: float, band=None) -> NoiseArea:
    """Trapezoidal integral of ``power - floor`` over ``band`` (default: all bins above DC).

    The reported ``atomic_variance`` is clamped at zero; ``raw_variance`` keeps
    the signed value.
    """
    f = psd.freqs
    if band is None:
        band = (f[1], f[-1])
    lo, hi = band
    if lo < f[0] or hi > f[-1] or hi <= lo:
        raise ValueError(f"band {band} outside PSD range [{f[0]:g}, {f[-1]:g}] Hz")
    sel = (f >= lo) & (f <= hi)
    if sel.sum() < 2:
        raise ValueError(f"band {band} contains fewer than two frequency bins")
    raw = float(trapezoid(psd.power[sel] - floor, f[sel]))
    if not np.isfinite(raw):
        raise NumericalError("polarimeter", "non-finite noise area")
    return NoiseArea(max(raw, 0.0), raw, float(floor), (float(lo), float(hi)))


def lorentzian_fit(psd: PSDEstimate, f_center: float, floor: float):
    """Diagnostic Lorentzian fit near ``f_center``; returns (f0, hwhm, area).

    Never used for noise areas.
    """
    from scipy.optimize import curve_fit

    hw0 = estimate_linewidth(psd, f_center, floor)
    sel = np.abs(psd.freqs - f_center) < 20 * hw0
    f = psd.freqs[sel]

    def model(f, f0, hw, area):
        return floor + area * hw / np.pi / ((f - f0) ** 2 + hw ** 2)

    p0 = (f_center, hw0, np.pi * hw0 * (psd.power[sel].max() - floor))
    popt, _ = curve_fit(model, f, psd.power[sel], p0=p0, maxfev=20000)
    return tuple(float(v) for v in popt)
