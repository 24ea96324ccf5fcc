"""Two-pulse QND magnetometry with polarization-dependent relaxation.

A spin-1/2 ensemble of ``N_A`` atoms, polarized along z, precesses in a small
field.  A first probe pulse of strength ``eps1`` measures the transverse spin
``S_x`` at t = 0, a second pulse of strength ``eps2`` measures it again at
``t_m``, and the field is estimated from the second result conditioned on the
first.  Each measurement has variance ``(1 + 1/(eps OD)) N_A/4``.

Between the pulses the transverse coherence decays at
``R(t) = R_sd + (1 - P_z(t)) R_se`` with ``P_z(t) = P_z0 exp(-R_sd t)``.

Modeling choices that are not fixed by the underlying theory:

* A pulse of strength ``eps`` leaves a fraction ``exp(-eps)`` of the atoms
  unscattered; scattered atoms lose their transverse and longitudinal spin.
  The first pulse therefore scales the covariance and the signal by
  ``exp(-eps1)`` and sets ``P_z0 = P_init exp(-eps1)``.
* Atomic variance that decays between pulses is refilled by thermal noise, so
  the spin variance at ``t_m`` stays ``N_A/4``.
* Repeating the sequence every ``t_m`` over ``total_time`` averages
  ``total_time / t_m`` independent estimates.

All field variances are reported relative to the standard quantum limit
``2 R_sd / (N_A t gamma^2)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .dynamics import EnsembleParams
from .errors import NumericalError

ONE_PULSE = "one_pulse"
TWO_PULSE = "two_pulse"
SCHEMES = (ONE_PULSE, TWO_PULSE)

EPS_BOUNDS = (1e-3, 10.0)
T_BOUNDS = (1e-2, 10.0)  # in units of 1/R_sd
N_STARTS = 8

# stands in for an infinite variance (vanishing slope, overflowing decay)
_HUGE = 1e300
_MAX_EXP = 690.0


@dataclass(frozen=True)
class PulsePlan:
    eps1: float
    eps2: float
    t_m: float

    def __post_init__(self):
        if not (self.eps1 > 0 and self.eps2 > 0 and self.t_m > 0):
            raise ValueError(f"pulse plan needs eps1, eps2, t_m > 0, got {self}")


@dataclass(frozen=True)
class ProtocolResult:
    field_variance_rel_sql: float
    plan: PulsePlan
    scheme: str
    n_starts: int = 0


@dataclass(frozen=True)
class RelaxationModel:
    R_sd: float
    R_se: float
    P_z0: float = 1.0

    def rate(self, t):
        """Instantaneous transverse relaxation rate at time(s) ``t``."""
        P_z = self.P_z0 * np.exp(-self.R_sd * np.asarray(t, dtype=float))
        return self.R_sd + (1.0 - P_z) * self.R_se


def measurement_variance(eps, OD, N_A):
    """Variance of one pulse's ``S_x`` estimate: ``(1 + 1/(eps OD)) N_A / 4``."""
    if not (np.all(np.asarray(eps) > 0) and np.all(np.asarray(OD) > 0)):
        raise ValueError("eps and OD must be > 0")
    return (1.0 + 1.0 / (eps * OD)) * N_A / 4.0


def integrated_rate(t_m, model: RelaxationModel):
    """``int_0^t_m R(t) dt`` in closed form."""
    t_m = np.asarray(t_m, dtype=float)
    if np.any(t_m < 0):
        raise ValueError("t_m must be >= 0")
    # (1 - exp(-x)) / x evaluated stably for small x
    x = model.R_sd * t_m
    frac = np.where(x > 1e-8, -np.expm1(-x) / np.where(x > 0, x, 1.0), 1.0 - x / 2)
    out = model.R_sd * t_m + model.R_se * t_m * (1.0 - model.P_z0 * frac)
    return out if out.ndim else float(out)


def relaxation_after_pulse(params: EnsembleParams, eps1, p_init=1.0) -> RelaxationModel:
    """Relaxation model once the first pulse has depolarized a fraction ``1 - exp(-eps1)``."""
    return RelaxationModel(params.R_sd, params.R_se, p_init * math.exp(-eps1))


def covariance(t_m, N_A, model: RelaxationModel, eps1):
    """``cov[S_x(0), S_x(t_m)] = (N_A/4) exp(-eps1) exp(-int R)``.

    ``model.P_z0`` should already include the first pulse's depolarization
    (see ``relaxation_after_pulse``).
    """
    return N_A / 4.0 * math.exp(-eps1) * np.exp(-integrated_rate(t_m, model))


def sql_variance(params: EnsembleParams, total_time):
    """Standard-quantum-limit field variance ``2 R_sd / (N_A t gamma^2)`` in T^2."""
    if not total_time > 0:
        raise ValueError("total_time must be > 0")
    return 2.0 * params.R_sd / (params.N_A * total_time * params.gamma ** 2)


def _log_exp(x):
    return math.exp(min(x, _MAX_EXP))


def _per_time_variance(cond_var, log_decay, t_m, params: EnsembleParams, total_time):
    """Field variance from a conditional spin variance and ``log`` of the signal decay, relative to SQL."""
    # slope = gamma t_m (N_A/2) exp(-log_decay); repetitions = total_time / t_m
    if t_m <= 0:
        return _HUGE
    scaled = cond_var / (params.N_A / 4.0)
    value = scaled * _log_exp(2.0 * log_decay) / (2.0 * params.R_sd * t_m)
    if not math.isfinite(value) or value > _HUGE:
        return _HUGE
    # the factors N_A, gamma and total_time cancel against the SQL
    return value


def two_pulse_field_variance(plan: PulsePlan, params: EnsembleParams, total_time, p_init=1.0):
    """Conditional two-pulse field variance relative to the SQL."""
    if total_time < plan.t_m:
        raise ValueError("total_time must be >= t_m")
    model = relaxation_after_pulse(params, plan.eps1, p_init)
    var1 = measurement_variance(plan.eps1, params.OD, params.N_A)
    var2 = measurement_variance(plan.eps2, params.OD, params.N_A)
    log_decay = plan.eps1 + integrated_rate(plan.t_m, model)
    # cov^2 / var1 with cov = (N_A/4) exp(-log_decay), kept finite for huge decays
    cov_sq = (params.N_A / 4.0) ** 2 * math.exp(-2.0 * min(log_decay, _MAX_EXP))
    cond = var2 - cov_sq / var1
    return _per_time_variance(cond, log_decay, plan.t_m, params, total_time)


def one_pulse_field_variance(t_m, params: EnsembleParams, total_time, eps2=EPS_BOUNDS[1], p_init=1.0):
    """Unconditioned single-pulse field variance relative to the SQL.

    The spin starts fully pumped, precesses for ``t_m`` and is measured once
    with strength ``eps2``.
    """
    if not t_m > 0:
        raise ValueError("t_m must be > 0")
    if total_time < t_m:
        raise ValueError("total_time must be >= t_m")
    model = RelaxationModel(params.R_sd, params.R_se, p_init)
    var = measurement_variance(eps2, params.OD, params.N_A)
    return _per_time_variance(var, integrated_rate(t_m, model), t_m, params, total_time)


def _objective(scheme, params, total_time, p_init):
    if scheme == TWO_PULSE:
        def f(x):
            e1, e2, t = np.exp(x)
            return two_pulse_field_variance(PulsePlan(e1, e2, t / params.R_sd), params,
                                            max(total_time, t / params.R_sd), p_init)
    elif scheme == ONE_PULSE:
        def f(x):
            e2, t = np.exp(x)
            return one_pulse_field_variance(t / params.R_sd, params, max(total_time, t / params.R_sd),
                                            eps2=e2, p_init=p_init)
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return f


def start_points(scheme, n_starts=N_STARTS, seed=0):
    """Multi-start points (log space) spread over the search box with a scrambled Sobol sequence."""
    lo = [math.log(EPS_BOUNDS[0])] * (2 if scheme == TWO_PULSE else 1) + [math.log(T_BOUNDS[0])]
    hi = [math.log(EPS_BOUNDS[1])] * (2 if scheme == TWO_PULSE else 1) + [math.log(T_BOUNDS[1])]
    sobol = qmc.Sobol(len(lo), scramble=True, seed=seed)
    # random_base2 needs a power of two; take the leading n_starts points
    m = max(0, math.ceil(math.log2(n_starts)))
    pts = sobol.random_base2(m)[:n_starts]
    return qmc.scale(pts, lo, hi), list(zip(lo, hi))


def optimize_protocol(params: EnsembleParams, total_time, scheme=TWO_PULSE, *, n_starts=N_STARTS,
                      seed=0, p_init=1.0) -> ProtocolResult:
    """Minimize the SQL-relative field variance over the pulse plan.

    Nelder-Mead in log coordinates from ``n_starts`` Sobol-distributed
    starting points inside the box ``eps in [1e-3, 10]``,
    ``t_m in [1e-2, 10] / R_sd``.  The one-pulse scheme has no first pulse;
    its plan reports ``eps1 = eps2``.
    """
    f = _objective(scheme, params, total_time, p_init)
    starts, bounds = start_points(scheme, n_starts, seed)
    best = None
    failures = []
    for x0 in starts:
        res = minimize(f, x0, method="Nelder-Mead", bounds=bounds,
                       options=dict(xatol=1e-9, fatol=1e-13, maxiter=4000 * len(x0), maxfev=8000 * len(x0)))
        if not (np.isfinite(res.fun) and res.fun < _HUGE):
            failures.append(f"start {np.exp(x0)}: {res.message}")
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise NumericalError("qnd-protocol", "all optimizer starts diverged:\n  " + "\n  ".join(failures))
    x = np.exp(best.x)
    if scheme == TWO_PULSE:
        plan = PulsePlan(float(x[0]), float(x[1]), float(x[2]) / params.R_sd)
    else:
        plan = PulsePlan(float(x[0]), float(x[0]), float(x[1]) / params.R_sd)
    return ProtocolResult(float(best.fun), plan, scheme, len(starts))


def sweep_od(params: EnsembleParams, od_grid, rse_ratios, total_time, *, n_starts=N_STARTS, seed=0,
             p_init=1.0, threads=1):
    """Optimize both schemes on every (R_se / R_sd, OD) point.

    Returns a list of ``(od, r_se_over_r_sd, ProtocolResult)`` ordered by
    ratio, then OD, then scheme.
    """
    if len(od_grid) == 0 or len(rse_ratios) == 0:
        raise ValueError("OD and R_se grids must be nonempty")
    jobs = [(od, r, scheme) for r in rse_ratios for od in od_grid for scheme in SCHEMES]

    def run(job):
        od, r, scheme = job
        p = replace(params, OD=float(od), R_se=float(r) * params.R_sd)
        return od, r, optimize_protocol(p, total_time, scheme, n_starts=n_starts, seed=seed, p_init=p_init)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]
