import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from strobeqnd.dynamics import DynamicsConfig, EnsembleParams, StrobeWaveform, gate_fraction
from strobeqnd.errors import ConfigError
from strobeqnd.io import read_csv, write_columns
from strobeqnd.pipeline import check_sampling, measure_noise
from strobeqnd.polarimeter import (
    PolarimeterConfig,
    PSDEstimate,
    atomic_noise_area,
    estimate_linewidth,
    estimate_psn_floor,
    exclusion_band,
    image_bands,
    synthesize_signal,
    welch_psd,
)

from oracles import lorentzian_psd

FS = 18e6


def _rng(seed=0):
    return np.random.default_rng(seed)


# --- spectral estimation -------------------------------------------------------

def test_white_noise_density():
    # 200 half-overlapping segments of unit-variance white noise
    seg = 1024
    x = _rng(1).standard_normal(seg // 2 * 201)
    psd = welch_psd(x, seg, sample_rate=FS)
    assert psd.n_avg == 200
    interior = psd.power[1:-1]
    assert interior.mean() == pytest.approx(2 / FS, rel=0.03)
    # 8-bin blocks scatter by ~2.7%; all within 4 sigma of the flat level
    blocks = interior[: len(interior) // 8 * 8].reshape(-1, 8).mean(axis=1)
    assert np.all(np.abs(blocks * FS / 2 - 1) < 0.11)


def test_sinusoid_power():
    A, f0 = 0.7, 1.234567e6
    t = np.arange(2**16) / FS
    x = A * np.sin(2 * math.pi * f0 * t + 0.3)
    psd = welch_psd(x, 4096, sample_rate=FS)
    assert trapezoid(psd.power, psd.freqs) == pytest.approx(A**2 / 2, rel=0.02)


def test_zero_signal():
    psd = welch_psd(np.zeros(4096), 512, sample_rate=FS)
    assert np.all(psd.power == 0)


def test_parseval_white_noise():
    x = _rng(2).standard_normal((8, 2**15))
    psd = welch_psd(x, 2048, sample_rate=FS)
    assert trapezoid(psd.power, psd.freqs) == pytest.approx(x.var(), rel=0.01)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), seg=st.sampled_from([64, 256, 1000]))
def test_psd_nonnegative(seed, seg):
    x = _rng(seed).standard_normal(4000) * _rng(seed + 1).uniform(0, 3)
    assert np.all(welch_psd(x, seg).power >= 0)


def test_welch_rejects_long_segment():
    with pytest.raises(ValueError, match="exceeds"):
        welch_psd(np.zeros(100), 101)


def test_psd_combination_weights_by_averages():
    f = np.linspace(0, 1, 5)
    a = PSDEstimate(f, np.ones(5), 1, 0.25)
    b = PSDEstimate(f, np.full(5, 4.0), 3, 0.25)
    c = a + b
    assert c.n_avg == 4
    np.testing.assert_allclose(c.power, 3.25)
    with pytest.raises(ValueError):
        a + PSDEstimate(f * 2, np.ones(5), 1, 0.5)


# --- signal synthesis -----------------------------------------------------------

def test_shot_noise_only_is_white_at_floor():
    cfg = PolarimeterConfig(rotation_gain=0.0, sample_rate=FS, psn_floor=3e-16)
    n = 2**17
    phi = synthesize_signal(np.ones(n), np.ones(n), cfg, _rng(3))
    psd = welch_psd(phi, 1024, sample_rate=FS)
    assert np.median(psd.power[1:-1]) == pytest.approx(3e-16, rel=0.03)


def test_noiseless_probe_is_gated_rotation():
    cfg = PolarimeterConfig(rotation_gain=2e-6, sample_rate=FS, psn_floor=0.0)
    traj = _rng(4).standard_normal(1000)
    gate = (np.arange(1000) % 7 < 2).astype(float)
    phi = synthesize_signal(traj, gate, cfg, _rng(5))
    assert np.array_equal(phi, gate * 2e-6 * traj)


def test_grid_mismatch():
    with pytest.raises(ValueError, match="sample grids differ"):
        synthesize_signal(np.zeros(10), np.zeros(11), PolarimeterConfig(), _rng())


@pytest.mark.parametrize("f_s", [300e3, 270e3])
def test_shot_noise_floor_independent_of_duty(f_s):
    cfg = PolarimeterConfig(rotation_gain=0.0, sample_rate=FS, psn_floor=1e-16)
    n = 2**18
    t = np.arange(n) / FS
    levels = []
    for duty in (0.1, 1.0):
        gate = gate_fraction(t, 1 / FS, StrobeWaveform(f_s=f_s, duty=duty))
        phi = synthesize_signal(np.zeros(n), gate, cfg, _rng(6), duty=duty)
        psd = welch_psd(phi, 2048, sample_rate=FS)
        levels.append(estimate_psn_floor(psd, (140e3, 160e3)))
    assert levels[0] == pytest.approx(levels[1], rel=0.02)
    assert levels[1] == pytest.approx(1e-16, rel=0.02)


# --- floor and area -------------------------------------------------------------

def _grid(n=4001, f_max=9e6):
    return np.linspace(0, f_max, n)


def test_floor_of_flat_spectrum_with_peak():
    f = _grid()
    power = np.full_like(f, 2.5e-16) + lorentzian_psd(f, 150e3, 1e3, 1e-9)
    psd = PSDEstimate(f, power, 1, f[1])
    assert estimate_psn_floor(psd, (100e3, 200e3)) == pytest.approx(2.5e-16, rel=0.01)


def test_floor_of_peak_only_is_zero():
    f = _grid()
    power = np.where(np.abs(f - 150e3) < 3e3, 1e-12, 0.0)
    assert estimate_psn_floor(PSDEstimate(f, power, 1, f[1]), (140e3, 160e3)) == 0.0


def test_floor_of_shot_noise_record():
    cfg = PolarimeterConfig(rotation_gain=0.0, sample_rate=FS, psn_floor=4e-16)
    phi = synthesize_signal(np.zeros((4, 2**16)), np.ones(2**16), cfg, _rng(7))
    psd = welch_psd(phi, 4096, sample_rate=FS)
    assert estimate_psn_floor(psd, (140e3, 160e3)) == pytest.approx(4e-16, rel=0.02)


def test_floor_errors():
    f = _grid(101, 1e6)
    psd = PSDEstimate(f, np.ones_like(f), 1, f[1])
    with pytest.raises(ValueError, match="covers the whole"):
        estimate_psn_floor(psd, (-1.0, 2e6))
    with pytest.raises(ValueError, match="outside"):
        estimate_psn_floor(psd, (3e6, 4e6))


def test_lorentzian_area_recovered():
    f = _grid(36001)
    area, floor = 3e-9, 1e-16
    psd = PSDEstimate(f, floor + lorentzian_psd(f, 150e3, 800.0, area), 1, f[1])
    est = atomic_noise_area(psd, floor)
    assert est.atomic_variance == pytest.approx(area, rel=0.03)
    assert est.psn_level == floor


def test_floor_only_area_is_small_and_clamped():
    cfg = PolarimeterConfig(rotation_gain=0.0, sample_rate=FS, psn_floor=1e-16)
    phi = synthesize_signal(np.zeros((4, 2**16)), np.ones(2**16), cfg, _rng(8))
    psd = welch_psd(phi, 4096, sample_rate=FS)
    est = atomic_noise_area(psd, estimate_psn_floor(psd, (140e3, 160e3)))
    total = 1e-16 * FS / 2
    assert abs(est.raw_variance) < 0.01 * total
    assert est.atomic_variance == max(est.raw_variance, 0.0)


def test_area_band_errors():
    f = _grid(101, 1e6)
    psd = PSDEstimate(f, np.ones_like(f), 1, f[1])
    with pytest.raises(ValueError, match="outside PSD range"):
        atomic_noise_area(psd, 0.0, (0.0, 2e6))
    with pytest.raises(ValueError, match="fewer than two"):
        atomic_noise_area(psd, 0.0, (1000.0, 1001.0))


def test_linewidth_and_exclusion_band():
    f = _grid(90001)
    psd = PSDEstimate(f, lorentzian_psd(f, 150e3, 1e3, 1.0), 1, f[1])
    assert estimate_linewidth(psd, 150e3, 0.0) == pytest.approx(1e3, rel=0.01)
    lo, hi = exclusion_band(psd, 150e3)
    assert (lo, hi) == pytest.approx((140e3, 160e3), rel=1e-3)


def test_image_bands_cover_strobe_sidebands():
    bands = image_bands((149e3, 151e3), 150e3, 300e3, 1e6)
    centers = sorted(round((a + b) / 2) for a, b in bands)
    assert centers == [150_000, 150_000, 450_000, 450_000, 750_000, 750_000]
    bands = image_bands((149e3, 151e3), 150e3, 260e3, 600e3)
    assert sorted(round((a + b) / 2) for a, b in bands) == [110_000, 150_000, 370_000, 410_000]


# --- pipeline --------------------------------------------------------------------

def test_sampling_mismatch_is_config_error():
    with pytest.raises(ConfigError) as err:
        check_sampling(DynamicsConfig(), PolarimeterConfig(sample_rate=16e6))
    assert err.value.issues[0][0] == "polarimeter.sample_rate"


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_area_insensitive_to_line_shape():
    # diffusion changes the peak shape but not the spin variance
    p = EnsembleParams(P0=0.0)
    s = StrobeWaveform()
    areas = [
        measure_noise(DynamicsConfig(tau_D=tau, seed=5), p, s, PolarimeterConfig(), 64).area.atomic_variance
        for tau in (2e-4, 2e-3)
    ]
    assert areas[0] == pytest.approx(areas[1], rel=0.05)


# --- CSV ----------------------------------------------------------------------------

def test_csv_round_trip_nine_digits(tmp_path):
    freqs = np.array([0.0, 1111.111111111, 2.5e6])
    power = np.array([1.234567891234e-16, 9.87654321e-17, 0.0])
    path = write_columns(tmp_path / "psd.csv", ["freq_hz", "psd_rad2_per_hz"], freqs, power)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[1] == b"0,1.23456789e-16"
    header, rows = read_csv(path)
    assert header == ["freq_hz", "psd_rad2_per_hz"]
    back = np.array(rows, dtype=float)
    np.testing.assert_allclose(back[:, 0], freqs, rtol=5e-9)
    np.testing.assert_allclose(back[:, 1], power, rtol=5e-9)
