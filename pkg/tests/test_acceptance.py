"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``CRITERION n <description>: PASS|FAIL (<detail>)`` line;
the lines are repeated in the pytest terminal summary.  The Monte Carlo
criteria run the shipped experiment configurations end to end.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from strobeqnd import cli, config
from strobeqnd.dynamics import DynamicsConfig, EnsembleParams, StrobeWaveform, simulate_record
from strobeqnd.experiments import run_experiment
from strobeqnd.io import read_csv
from strobeqnd.qnd_protocol import ONE_PULSE, TWO_PULSE, optimize_protocol
from strobeqnd.spin_model import AtomSpec, noise_ratio, variance_per_atom

from conftest import CRITERIA
from oracles import fx2_density_matrix

GOLDEN = Path(__file__).parent / "golden"


def report(n, text, ok, detail=""):
    line = f"CRITERION {n} {text}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
    print(line)
    CRITERIA.append(line)
    assert ok, line


def shipped(experiment, **overrides):
    data = config.to_dict(config.loads(cli.default_config_text(experiment)))
    data.update(overrides)
    return config.from_dict(data)


def table(path):
    header, rows = read_csv(path)
    return {name: [r[i] for r in rows] for i, name in enumerate(header)}


def floats(col):
    return np.array(col, dtype=float)


# --- spin model -------------------------------------------------------------------

def test_criterion_1_closed_form_matches_density_matrix():
    worst = 0.0
    for I in (0.5, 1.0, 1.5, 2.0, 2.5):
        for P in np.linspace(0.0, 0.99, 21):
            got = variance_per_atom(AtomSpec(I), P)
            ref = fx2_density_matrix(I, P)
            worst = max(worst, abs(got - ref) / ref)
    report(1, "variance per atom vs density-matrix trace", worst < 1e-10, f"max rel err {worst:.2e}")


def test_criterion_2_fully_polarized_ratio():
    r = noise_ratio(AtomSpec(1.5), 1.0 - 1e-12)
    report(2, "noise ratio I=3/2 at P->1 equals 2/3", abs(r - 2 / 3) < 1e-9, f"{r:.12f}")


# --- dynamics and spectra -----------------------------------------------------------

def test_criterion_3_fluctuation_dissipation():
    n_traj = 200
    details, ok = [], True
    for P0 in (0.0, 0.85):
        p = EnsembleParams(P0=P0)
        cfg = DynamicsConfig(ls_strength=0.0, sample_every=9, seed=1)
        rec = simulate_record(cfg, p, StrobeWaveform(duty=1.0), n_traj)
        per_traj = (rec.Fx ** 2).mean(axis=1)
        mean, se = per_traj.mean(), per_traj.std(ddof=1) / math.sqrt(n_traj)
        target = p.N_A * variance_per_atom(p.atom, P0)
        ok &= abs(mean - target) < 3 * se
        details.append(f"P0={P0}: {mean / target:.4f} of target, {abs(mean - target) / se:.2f} SE")
    report(3, "stationary variance equals N_A x variance per atom within 3 SE", ok, "; ".join(details))


@pytest.mark.slow
def test_criterion_4_strobe_frequency_sweep(tmp_path):
    cfg = shipped("sweep_strobe")
    t = table(run_experiment(cfg, tmp_path)[0])
    f_s, P0, ratio = floats(t["f_s_hz"]), floats(t["P0"]), floats(t["ratio_to_unpolarized"])
    area = floats(t["area_rad2"])
    base = area[P0 == 0]
    pol = P0 > 0
    fp, rp = f_s[pol], ratio[pol]
    f_min = fp[np.argmin(rp)]
    detuned = np.abs(fp - 300e3) >= 30e3
    plateau = rp[detuned].mean()
    spread = np.abs(rp[detuned] / plateau - 1).max()
    flat = np.abs(base / base.mean() - 1).max()
    ok = f_min == 300e3 and spread < 0.05 and rp.min() < 0.95 * plateau and flat < 0.03
    report(4, "polarized minimum at 2 f_L with detuned plateau, unpolarized flat to 3%", ok,
           f"min at {f_min / 1e3:g} kHz, dip {rp.min():.3f} vs plateau {plateau:.3f} "
           f"(spread {spread:.3f}), unpolarized spread {flat:.4f}")


@pytest.mark.slow
def test_criterion_5_duty_cycle_sweep(tmp_path):
    cfg = shipped("sweep_duty")
    t = table(run_experiment(cfg, tmp_path)[0])
    P0 = floats(t["P0"])
    duty = floats(t["duty"])[P0 > 0]
    ratio = floats(t["ratio_to_unpolarized"])[P0 > 0]
    ratio = ratio[np.argsort(duty)]
    ok = bool(np.all(np.diff(ratio) >= 0))
    report(5, "polarized/unpolarized ratio nondecreasing in duty", ok,
           ", ".join(f"{r:.4f}" for r in ratio))


@pytest.mark.slow
def test_criterion_6_polarization_sweep(tmp_path):
    cfg = shipped("sweep_polarization", trajectories=1000)
    t = table(run_experiment(cfg, tmp_path)[0])
    sim, model = floats(t["ratio_to_unpolarized"]), floats(t["model_ratio"])
    rel = np.abs(sim / model - 1)
    report(6, "simulated noise ratio vs spin-temperature curve within 5%", bool(np.all(rel < 0.05)),
           ", ".join(f"P={P:g}: {s / m:.4f}" for P, s, m in zip(floats(t["P0"]), sim, model)))


# --- measurement protocol --------------------------------------------------------------

def _params(R_se=0.0, OD=1e4):
    return EnsembleParams(N_A=1e10, R_sd=1.0, R_se=R_se, OD=OD)


def test_criterion_7_one_pulse_optimum():
    res = optimize_protocol(_params(), 100.0, ONE_PULSE)
    v, t_m = res.field_variance_rel_sql, res.plan.t_m
    ok = abs(v / math.e - 1) < 0.01 and abs(t_m / 0.5 - 1) < 0.02
    report(7, "one-pulse optimum e x SQL at t_m = 1/(2 R_sd)", ok, f"{v / math.e:.5f} e at t_m R_sd = {t_m:.5f}")


def test_criterion_8_two_pulse_recovers_sql():
    v = {r: optimize_protocol(_params(R_se=r), 100.0, TWO_PULSE).field_variance_rel_sql for r in (0.0, 10.0, 100.0)}
    ok = abs(v[0.0] - 1) < 0.05 and all(abs(v[r] - 1) < 0.10 for r in (10.0, 100.0))
    report(8, "two-pulse variance at OD 1e4 reaches the SQL", ok,
           ", ".join(f"R_se/R_sd={r:g}: {x:.4f} SQL" for r, x in v.items()))


def test_criterion_9_protocol_grid_ordering(tmp_path):
    cfg = shipped("optimize_protocol")
    path = run_experiment(cfg, tmp_path)[0]
    t = table(path)
    od, rse, scheme = floats(t["od"]), floats(t["r_se_over_r_sd"]), np.array(t["scheme"])
    v = floats(t["var_rel_sql"])
    grid = {(o, r, s): x for o, r, s, x in zip(od, rse, scheme, v)}
    ods, ratios = sorted(set(od)), sorted(set(rse))
    ordered = all(grid[o, r, TWO_PULSE] <= grid[o, r, ONE_PULSE] for o in ods for r in ratios)
    monotone = all(np.all(np.diff([grid[o, r, TWO_PULSE] for o in ods]) <= 0) for r in ratios)
    header, rows = read_csv(path)
    g_header, g_rows = read_csv(GOLDEN / "sweep_od.csv")
    golden = header == g_header and len(rows) == len(g_rows) and all(
        a[2] == b[2] and np.allclose(floats([a[i] for i in (0, 1, 3, 4, 5, 6)]),
                                     floats([b[i] for i in (0, 1, 3, 4, 5, 6)]), rtol=1e-6, atol=0)
        for a, b in zip(rows, g_rows))
    ok = len(ods) == 6 and len(ratios) == 3 and ordered and monotone and golden
    report(9, "two-pulse <= one-pulse, monotone in OD, matches golden file", ok,
           f"grid {len(ods)}x{len(ratios)}, ordered={ordered}, monotone={monotone}, golden={golden}")


# --- determinism --------------------------------------------------------------------

def _small(experiment, threads):
    data = config.to_dict(shipped(experiment))
    data.update(trajectories=3, threads=threads)
    data["dynamics"]["duration"] = 6e-4
    data["sweep"]["n_starts"] = 3
    return config.from_dict(data)


def test_criterion_10_determinism(tmp_path):
    bad = []
    for experiment in config.EXPERIMENTS:
        outputs = []
        for run, threads in enumerate((1, 1, 3)):
            files = run_experiment(_small(experiment, threads), tmp_path / f"{experiment}_{run}")
            outputs.append({Path(f).name: Path(f).read_bytes() for f in files})
        if not outputs[0] == outputs[1] == outputs[2]:
            bad.append(experiment)
    report(10, "same seed gives byte-identical CSVs across runs and thread counts", not bad,
           f"{len(config.EXPERIMENTS)} experiments" + (f", differing: {', '.join(bad)}" if bad else ""))
