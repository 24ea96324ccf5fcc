"""Stochastic time-domain model of the collective spin of a probed alkali vapor.

The transverse spin is split into the atoms inside the probe beam (``M``, the
measured sub-ensemble, a fraction ``beam_fraction`` of all atoms) and the
atoms outside it (``O``).  Per integrator step of length ``dt``:

1. Larmor precession about z and relaxation at
   ``R = R_sd + (1 - P_z) R_se``, applied exactly as a damped rotation.
2. Thermal noise refilling each compartment towards its equilibrium variance
   ``N * <F_x^2>(P_z)`` (fluctuation-dissipation, exact for the step).
3. Exchange of atoms between beam and bulk with correlation time ``tau_D``.
   The imbalance ``D = (1-f) M - f O`` is an Ornstein-Uhlenbeck process while
   ``M + O`` is conserved, which gives the measured spin a non-Lorentzian
   spectrum with unchanged total variance.
4. Light-shift back-action while the strobe gate is open: a random rotation
   about the probe axis (x) kicks ``M_y`` by ``ls * sqrt(I/I_avg) * M_z dW``.

The longitudinal spin follows ``dF_z = -R_sd (F_z - F_z,pump) dt`` and is the
same for every trajectory, so it is precomputed.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import ConfigError
from .kernels import get_integrator
from .spin_model import AtomSpec, VarianceTable, variance_per_atom

N_NOISE = 7
BATCH = 8
_PHASE_EPS = 1e-9


@dataclass(frozen=True)
class EnsembleParams:
    atom: AtomSpec = field(default_factory=lambda: AtomSpec(1.5))
    N_A: float = 1e6
    P0: float = 0.0
    gamma: float = 2 * math.pi * 7.0e9
    R_sd: float = 1000.0
    R_se: float = 5000.0
    OD: float = 100.0


@dataclass(frozen=True)
class StrobeWaveform:
    f_s: float = 300e3
    duty: float = 0.1
    phi0: float = 0.0
    avg_flux: float = 1.0


@dataclass(frozen=True)
class DynamicsConfig:
    f_L: float = 150e3
    dt: float = 1.0 / 18e6
    duration: float = 3.6e-3
    tau_D: float = 5e-4
    ls_strength: float = 0.4
    seed: int = 0
    beam_fraction: float = 0.3
    pump_on: bool = True
    sample_every: int = 1

    @property
    def n_steps(self) -> int:
        n = int(round(self.duration / self.dt))
        return n - n % self.sample_every

    @property
    def n_samples(self) -> int:
        return self.n_steps // self.sample_every

    @property
    def sample_dt(self) -> float:
        return self.dt * self.sample_every


@dataclass
class TrajectoryState:
    """Collective spin of one trajectory.  ``M`` is inside the probe beam, ``O`` outside."""

    Mx: float
    My: float
    Ox: float
    Oy: float
    Fz: float
    t: float = 0.0

    @property
    def F_x(self):
        return self.Mx + self.Ox

    @property
    def F_y(self):
        return self.My + self.Oy

    @property
    def F_z(self):
        return self.Fz


@dataclass
class Record:
    """Sampled output of ``simulate_record``; spin arrays are (n_traj, n_samples)."""

    t: np.ndarray
    Mx: np.ndarray
    My: np.ndarray
    Fx: np.ndarray
    Fy: np.ndarray
    Fz: np.ndarray
    gate: np.ndarray

    @property
    def n_traj(self):
        return self.Mx.shape[0]


def validate_params(params: EnsembleParams, prefix="ensemble"):
    issues = []
    if not params.N_A >= 1:
        issues.append((f"{prefix}.N_A", "must be >= 1"))
    if not 0 <= params.P0 < 1:
        issues.append((f"{prefix}.P0", "must lie in [0, 1)"))
    if not params.R_sd > 0:
        issues.append((f"{prefix}.R_sd", "must be > 0"))
    if not params.R_se >= 0:
        issues.append((f"{prefix}.R_se", "must be >= 0"))
    if not params.OD > 0:
        issues.append((f"{prefix}.OD", "must be > 0"))
    if not params.gamma > 0:
        issues.append((f"{prefix}.gamma", "must be > 0"))
    return issues


def validate_strobe(strobe: StrobeWaveform, prefix="strobe"):
    issues = []
    if not 0 < strobe.duty <= 1:
        issues.append((f"{prefix}.duty", "must lie in (0, 1]"))
    if not strobe.f_s > 0:
        issues.append((f"{prefix}.f_s", "must be > 0"))
    if not strobe.avg_flux > 0:
        issues.append((f"{prefix}.avg_flux", "must be > 0"))
    return issues


def max_step(f_L, f_s):
    """Largest integrator step allowed: ``1 / (40 max(f_L, f_s))``."""
    return 1.0 / (40.0 * max(f_L, f_s))


def validate_dynamics(cfg: DynamicsConfig, f_s_max=None, prefix="dynamics"):
    issues = []
    if not cfg.f_L > 0:
        issues.append((f"{prefix}.f_L", "must be > 0"))
    if not cfg.dt > 0:
        issues.append((f"{prefix}.dt", "must be > 0"))
    elif cfg.f_L > 0:
        limit = max_step(cfg.f_L, f_s_max or 0.0)
        if cfg.dt > limit * (1 + 1e-12):
            issues.append((f"{prefix}.dt", f"step-size rule dt <= 1/(40 max(f_L, f_s)) = {limit:.6g} s violated"))
    if not cfg.duration > 0:
        issues.append((f"{prefix}.duration", "must be > 0"))
    elif cfg.dt > 0 and cfg.n_steps < 1:
        issues.append((f"{prefix}.duration", "shorter than one sample"))
    if not cfg.tau_D > 0:
        issues.append((f"{prefix}.tau_D", "must be > 0 (use .inf to disable diffusion)"))
    if not cfg.ls_strength >= 0:
        issues.append((f"{prefix}.ls_strength", "must be >= 0"))
    if not 0 < cfg.beam_fraction <= 1:
        issues.append((f"{prefix}.beam_fraction", "must lie in (0, 1]"))
    if not (isinstance(cfg.sample_every, int) and cfg.sample_every >= 1):
        issues.append((f"{prefix}.sample_every", "must be a positive integer"))
    if not 0 <= cfg.seed < 2**64:
        issues.append((f"{prefix}.seed", "must be an unsigned 64-bit integer"))
    return issues


def check_config(cfg, params, strobe):
    issues = validate_params(params) + validate_strobe(strobe) + validate_dynamics(cfg, strobe.f_s)
    if issues:
        raise ConfigError(issues)


def relaxation_rate(P_z, params: EnsembleParams):
    """Transverse relaxation rate ``R_sd + (1 - P_z) R_se``."""
    return params.R_sd + (1.0 - P_z) * params.R_se


def strobe_gate(t, strobe: StrobeWaveform):
    """Probe gate and instantaneous photon flux at time(s) ``t``.

    The gate is open when ``frac(f_s t + phi0 / 2 pi) < duty``; the open-window
    flux is ``avg_flux / duty`` so the mean flux does not depend on ``duty``.
    """
    if strobe.duty >= 1.0:
        gate = np.ones_like(np.asarray(t, dtype=float))
    else:
        # the offset keeps window edges stable when f_s * t lands on an exact fraction
        phase = np.asarray(t, dtype=float) * strobe.f_s + strobe.phi0 / (2 * math.pi) + _PHASE_EPS
        gate = ((phase - np.floor(phase)) < strobe.duty).astype(float)
    return gate, gate * (strobe.avg_flux / strobe.duty)


def gate_fraction(t, dt, strobe: StrobeWaveform):
    """Fraction of each interval ``[t, t + dt)`` during which the probe is on.

    This is ``strobe_gate`` averaged over the interval; its mean over whole
    strobe periods is exactly ``duty``.
    """
    t = np.asarray(t, dtype=float)
    if strobe.duty >= 1.0:
        return np.ones_like(t)
    x0 = t * strobe.f_s + strobe.phi0 / (2 * math.pi)
    x1 = x0 + dt * strobe.f_s

    def on_time(x):
        n = np.floor(x)
        return n * strobe.duty + np.minimum(x - n, strobe.duty)

    return np.clip((on_time(x1) - on_time(x0)) / (dt * strobe.f_s), 0.0, 1.0)


# --- per-step coefficients -------------------------------------------------

def _fz_pump(cfg, params):
    return params.P0 * params.N_A / 2 if cfg.pump_on else 0.0


def _coefficients(Fz, gate, cfg, params, strobe, variance):
    """Per-step integrator coefficients for longitudinal spin(s) ``Fz``."""
    f = cfg.beam_fraction
    P = np.clip(2.0 * np.asarray(Fz, dtype=float) / params.N_A, -1.0, 1.0)
    v = params.N_A * variance(P)
    decay = np.exp(-relaxation_rate(P, params) * cfg.dt)
    refill = 1.0 - decay * decay
    amp_m = np.sqrt(f * v * refill)
    amp_o = np.sqrt((1.0 - f) * v * refill)
    if f < 1.0 and math.isfinite(cfg.tau_D):
        q = math.exp(-cfg.dt / ((1.0 - f) * cfg.tau_D))
        amp_d = np.sqrt(f * (1.0 - f) * v * (1.0 - q * q))
    else:
        q = 1.0
        amp_d = np.zeros_like(v)
    kick = cfg.ls_strength * np.sqrt(gate / strobe.duty) * f * np.asarray(Fz, dtype=float) * math.sqrt(cfg.dt)
    return decay, amp_m, amp_o, amp_d, kick, 1.0 - q


@dataclass
class _Schedule:
    t: np.ndarray
    Fz: np.ndarray
    gate: np.ndarray
    decay: np.ndarray
    amp_m: np.ndarray
    amp_o: np.ndarray
    amp_d: np.ndarray
    kick: np.ndarray
    c: float
    s: float
    g: float
    v0: float


def longitudinal_spin(t, cfg: DynamicsConfig, params: EnsembleParams):
    """Deterministic ``F_z(t)`` relaxing at ``R_sd`` towards the pump value."""
    fz0 = params.P0 * params.N_A / 2
    pump = _fz_pump(cfg, params)
    return pump + (fz0 - pump) * np.exp(-params.R_sd * np.asarray(t, dtype=float))


def _schedule(cfg, params, strobe):
    n = cfg.n_steps
    t = np.arange(n) * cfg.dt
    Fz = longitudinal_spin(t, cfg, params)
    gate = gate_fraction(t, cfg.dt, strobe)
    if cfg.pump_on:
        v_const = variance_per_atom(params.atom, params.P0)
        variance = lambda P: np.full_like(P, v_const)
    else:
        variance = VarianceTable(params.atom)
    decay, amp_m, amp_o, amp_d, kick, g = _coefficients(Fz, gate, cfg, params, strobe, variance)
    w = 2 * math.pi * cfg.f_L * cfg.dt
    return _Schedule(
        t=t, Fz=Fz, gate=gate, decay=decay, amp_m=amp_m, amp_o=amp_o, amp_d=amp_d, kick=kick,
        c=math.cos(w), s=math.sin(w), g=g,
        v0=params.N_A * variance_per_atom(params.atom, params.P0),
    )


def _draw(seed, index, n_steps, v0, f):
    gen = _rng.stream(seed, index, _rng.DYNAMICS)
    z0 = gen.standard_normal(4)
    state = np.array([
        math.sqrt(f * v0) * z0[0], math.sqrt(f * v0) * z0[1],
        math.sqrt((1 - f) * v0) * z0[2], math.sqrt((1 - f) * v0) * z0[3],
    ])
    return state, gen.standard_normal((n_steps, N_NOISE))


def step(state: TrajectoryState, t: float, cfg: DynamicsConfig, params: EnsembleParams,
         strobe: StrobeWaveform, rng: np.random.Generator) -> TrajectoryState:
    """Advance one trajectory by a single step ``cfg.dt`` (draws 7 normals from ``rng``)."""
    gate = gate_fraction(np.array([t]), cfg.dt, strobe)
    Fz = np.array([state.Fz])
    variance = lambda P: np.array([variance_per_atom(params.atom, float(P[0]))])
    decay, amp_m, amp_o, amp_d, kick, g = _coefficients(Fz, gate, cfg, params, strobe, variance)
    w = 2 * math.pi * cfg.f_L * cfg.dt
    buf = np.array([[state.Mx, state.My, state.Ox, state.Oy]])
    noise = rng.standard_normal((1, 1, N_NOISE))
    out = np.empty((1, 1, 4))
    get_integrator("python")(buf, noise, decay, amp_m, amp_o, amp_d, kick,
                             math.cos(w), math.sin(w), cfg.beam_fraction, g, 1, out)
    pump = _fz_pump(cfg, params)
    fz = pump + (state.Fz - pump) * math.exp(-params.R_sd * cfg.dt)
    return TrajectoryState(*buf[0], Fz=fz, t=t + cfg.dt)


def _correlation_warning(cfg, params):
    rate = relaxation_rate(params.P0, params)
    if cfg.duration * rate < 10:
        warnings.warn(
            f"record of {cfg.duration:g} s covers only {cfg.duration * rate:.1f} atomic correlation times",
            RuntimeWarning, stacklevel=3,
        )


def iter_batches(cfg, params, strobe, n_traj, *, threads=1, backend=None, state0=None, batch=BATCH):
    """Yield ``(indices, samples)`` per trajectory batch, in index order.

    ``samples`` has shape (len(indices), n_samples, 4) holding M_x, M_y, O_x, O_y.
    Batches are computed on up to ``threads`` worker threads; their content
    does not depend on the thread count.
    """
    check_config(cfg, params, strobe)
    _correlation_warning(cfg, params)
    sched = _schedule(cfg, params, strobe)
    integrate = get_integrator(backend)
    f = cfg.beam_fraction

    def run(indices):
        init = np.empty((len(indices), 4))
        noise = np.empty((len(indices), cfg.n_steps, N_NOISE))
        for row, i in enumerate(indices):
            init[row], noise[row] = _draw(cfg.seed, i, cfg.n_steps, sched.v0, f)
        if state0 is not None:
            init[:] = state0
        out = np.empty((len(indices), cfg.n_samples, 4))
        integrate(init, noise, sched.decay, sched.amp_m, sched.amp_o, sched.amp_d, sched.kick,
                  sched.c, sched.s, f, sched.g, cfg.sample_every, out)
        return indices, out

    chunks = [list(range(i, min(i + batch, n_traj))) for i in range(0, n_traj, batch)]
    if threads <= 1:
        for chunk in chunks:
            yield run(chunk)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(run, chunks)


def sample_times(cfg):
    return np.arange(cfg.n_samples) * cfg.sample_dt


def simulate_record(cfg: DynamicsConfig, params: EnsembleParams, strobe: StrobeWaveform,
                    n_traj: int, *, threads=1, backend=None, state0=None) -> Record:
    """Simulate ``n_traj`` independent trajectories and return the sampled spin.

    Trajectory ``i`` is a deterministic function of ``(cfg.seed, i)``.
    ``state0`` optionally fixes the initial ``(M_x, M_y, O_x, O_y)`` instead of
    drawing it from the stationary distribution.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    parts = [out for _, out in iter_batches(cfg, params, strobe, n_traj, threads=threads,
                                            backend=backend, state0=state0)]
    data = np.concatenate(parts, axis=0)
    t = sample_times(cfg)
    gate = gate_fraction(t, cfg.sample_dt, strobe)
    return Record(
        t=t, Mx=data[:, :, 0], My=data[:, :, 1],
        Fx=data[:, :, 0] + data[:, :, 2], Fy=data[:, :, 1] + data[:, :, 3],
        Fz=longitudinal_spin(t, cfg, params), gate=gate,
    )

