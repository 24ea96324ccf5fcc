"""The canonical experiments.  Each driver writes CSV files and returns their paths.

All sweep points reuse the configured seed, so every point sees the same
random numbers and differences between points are not masked by Monte Carlo
scatter.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .config import RunConfig
from .dynamics import longitudinal_spin
from .io import write_columns, write_csv
from .pipeline import default_segment_len, measure_noise, noise_area, simulate_psd
from .polarimeter import estimate_linewidth
from .qnd_protocol import sweep_od
from .spin_model import noise_ratio

AREA_COLUMNS = ["area_rad2", "raw_area_rad2", "psn_rad2_per_hz"]
SWEEP_OD_HEADER = ["od", "r_se_over_r_sd", "scheme", "eps1", "eps2", "t_m_s", "var_rel_sql"]


def _segment_len(cfg: RunConfig):
    return cfg.analysis.segment_len or default_segment_len(cfg.dynamics)


def _measure(cfg: RunConfig, P0=None, strobe=None):
    params = cfg.ensemble if P0 is None else dataclasses.replace(cfg.ensemble, P0=P0)
    m = measure_noise(
        cfg.dynamics_with_seed(), params, strobe or cfg.strobe, cfg.polarimeter, cfg.trajectories,
        segment_len=_segment_len(cfg), threads=cfg.threads, n_widths=cfg.analysis.n_widths,
    )
    return [m.area.atomic_variance, m.area.raw_variance, m.area.psn_level]


def run_psd(cfg: RunConfig, out: Path):
    """Averaged PSD, noise area, and the first trajectory's signal and spin."""
    dyn = cfg.dynamics_with_seed()
    psd, (t, phi, spin) = simulate_psd(
        dyn, cfg.ensemble, cfg.strobe, cfg.polarimeter, cfg.trajectories,
        segment_len=_segment_len(cfg), threads=cfg.threads, keep_first=True,
    )
    m = noise_area(psd, dyn.f_L, n_widths=cfg.analysis.n_widths,
                   f_s=cfg.strobe.f_s if cfg.strobe.duty < 1 else None)
    files = [
        write_columns(out / "psd.csv", ["freq_hz", "psd_rad2_per_hz"], psd.freqs, psd.power),
        write_columns(out / "timeseries.csv", ["t_s", "phi_rad"], t, phi),
        write_columns(out / "trajectory.csv", ["t_s", "F_x", "F_y", "F_z"], t,
                      spin[:, 0] + spin[:, 2], spin[:, 1] + spin[:, 3], longitudinal_spin(t, dyn, cfg.ensemble)),
        write_csv(out / "noise_area.csv",
                  ["P0", *AREA_COLUMNS, "band_lo_hz", "band_hi_hz", "linewidth_hz", "n_avg"],
                  [[cfg.ensemble.P0, m.area.atomic_variance, m.area.raw_variance, m.area.psn_level,
                    *m.area.band, estimate_linewidth(psd, dyn.f_L, m.area.psn_level), psd.n_avg]]),
    ]
    return files


def _ratio_rows(keys, base, pol, P):
    rows = []
    for k in keys:
        rows.append([k, 0.0, *base[k], 1.0 if base[k][0] > 0 else float("nan")])
    for k in keys:
        ratio = pol[k][0] / base[k][0] if base[k][0] > 0 else float("nan")
        rows.append([k, P, *pol[k], ratio])
    return rows


def run_sweep_strobe(cfg: RunConfig, out: Path):
    """Noise area vs strobe frequency for unpolarized and polarized atoms."""
    P = cfg.sweep.polarized_P0
    keys = list(cfg.sweep.f_s)
    base, pol = {}, {}
    for f_s in keys:
        strobe = dataclasses.replace(cfg.strobe, f_s=f_s)
        base[f_s] = _measure(cfg, 0.0, strobe)
        pol[f_s] = _measure(cfg, P, strobe)
    header = ["f_s_hz", "P0", *AREA_COLUMNS, "ratio_to_unpolarized"]
    return [write_csv(out / "sweep_strobe.csv", header, _ratio_rows(keys, base, pol, P))]


def run_sweep_duty(cfg: RunConfig, out: Path):
    """Noise area vs strobe duty cycle at fixed average flux."""
    P = cfg.sweep.polarized_P0
    keys = list(cfg.sweep.duty)
    base, pol = {}, {}
    for duty in keys:
        strobe = dataclasses.replace(cfg.strobe, duty=duty)
        base[duty] = _measure(cfg, 0.0, strobe)
        pol[duty] = _measure(cfg, P, strobe)
    header = ["duty", "P0", *AREA_COLUMNS, "ratio_to_unpolarized"]
    return [write_csv(out / "sweep_duty.csv", header, _ratio_rows(keys, base, pol, P))]


def run_sweep_polarization(cfg: RunConfig, out: Path):
    """Noise area vs longitudinal polarization next to the spin-temperature prediction."""
    levels = sorted(set(cfg.sweep.P0) | {0.0})
    areas = {P: _measure(cfg, P) for P in levels}
    base = areas[0.0][0]
    rows = []
    for P in levels:
        ratio = areas[P][0] / base if base > 0 else float("nan")
        rows.append([P, *areas[P], ratio, noise_ratio(cfg.ensemble.atom, P)])
    header = ["P0", *AREA_COLUMNS, "ratio_to_unpolarized", "model_ratio"]
    return [write_csv(out / "sweep_polarization.csv", header, rows)]


def run_optimize_protocol(cfg: RunConfig, out: Path):
    """Optimized one- and two-pulse field variance over the (OD, R_se/R_sd) grid."""
    sw = cfg.sweep
    results = sweep_od(cfg.ensemble, sw.od, sw.r_se_over_r_sd, sw.total_time,
                       n_starts=sw.n_starts, seed=cfg.seed, threads=cfg.threads)
    rows = [[od, r, res.scheme, res.plan.eps1, res.plan.eps2, res.plan.t_m, res.field_variance_rel_sql]
            for od, r, res in results]
    return [write_csv(out / "sweep_od.csv", SWEEP_OD_HEADER, rows)]


RUNNERS = {
    "psd": run_psd,
    "sweep_strobe": run_sweep_strobe,
    "sweep_duty": run_sweep_duty,
    "sweep_polarization": run_sweep_polarization,
    "optimize_protocol": run_optimize_protocol,
}


def run_experiment(cfg: RunConfig, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.experiment](cfg, out)
