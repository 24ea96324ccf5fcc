"""Spin-temperature statistics of an alkali atom with two hyperfine manifolds.

The ground state of an alkali atom with nuclear spin ``I`` splits into the
manifolds ``F = a = I + 1/2`` and ``F = b = I - 1/2``.  Under rapid
spin-exchange the density matrix takes the spin-temperature form
``rho = exp(beta F_z) / Z`` and the transverse spin variance per atom is

    <F_x^2> = sum_F sum_m exp(beta m) [F(F+1) - m^2] / (2 Z)

All quantities here are per atom (hbar = 1).  Multiply by the atom number to
get the collective variance of an uncorrelated ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "AtomSpec",
    "SpinTemperature",
    "NoiseStatistics",
    "beta_from_polarization",
    "partition_function",
    "variance_per_atom",
    "noise_ratio",
    "noise_statistics",
    "VarianceTable",
]


@dataclass(frozen=True)
class AtomSpec:
    """Nuclear spin of the species; ``nuclear_spin`` must be a half-integer multiple."""

    nuclear_spin: float
    a: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self):
        two_i = 2 * self.nuclear_spin
        if two_i < 1 or abs(two_i - round(two_i)) > 1e-12:
            raise ValueError(f"nuclear_spin must be a positive multiple of 1/2, got {self.nuclear_spin}")
        object.__setattr__(self, "a", self.nuclear_spin + 0.5)
        object.__setattr__(self, "b", self.nuclear_spin - 0.5)

    @property
    def manifolds(self) -> tuple[float, float]:
        return (self.a, self.b)

    @property
    def dimension(self) -> int:
        """Number of ground-state sublevels, ``2(2I+1)``."""
        return int(round(2 * (2 * self.nuclear_spin + 1)))

    def __str__(self):
        return f"I={Fraction(self.nuclear_spin).limit_denominator(2)}"


@dataclass(frozen=True)
class SpinTemperature:
    P: float

    @property
    def beta(self) -> float:
        return beta_from_polarization(self.P)


@dataclass(frozen=True)
class NoiseStatistics:
    variance_per_atom: float
    partition_function: float
    ratio_to_unpolarized: float


def beta_from_polarization(P: float) -> float:
    """Spin-temperature parameter ``ln[(1+P)/(1-P)]``.

    Raises
    ------
    ValueError
        If ``|P| >= 1``; the fully polarized limit has infinite ``beta``.
    """
    if not abs(P) < 1:
        raise ValueError(f"polarization must satisfy |P| < 1, got {P}")
    # 2*atanh(P) is the same function, with better accuracy near P = 0
    return 2.0 * math.atanh(P)


def _m_values(F: float) -> np.ndarray:
    n = int(round(2 * F)) + 1
    return -F + np.arange(n, dtype=float)


def partition_function(atom: AtomSpec, beta: float) -> float:
    """``Z = sum over both manifolds of exp(beta m)``."""
    return float(sum(np.exp(beta * _m_values(F)).sum() for F in atom.manifolds))


def _weighted_sums(atom: AtomSpec, beta: float) -> tuple[float, float]:
    # Factor out exp(|beta| a) so that the largest weight is exactly 1.
    shift = abs(beta) * atom.a
    z = 0.0
    num = 0.0
    for F in atom.manifolds:
        m = _m_values(F)
        w = np.exp(beta * m - shift)
        z += w.sum()
        num += (w * (F * (F + 1) - m * m)).sum()
    return float(num), float(z)


def variance_per_atom(atom: AtomSpec, P: float) -> float:
    """Transverse variance ``<F_x^2>`` of a single atom at polarization ``P``.

    At ``|P| = 1`` only the stretched state ``|a, +-a>`` is populated and the
    result is ``a/2``.
    """
    if abs(P) > 1:
        raise ValueError(f"polarization must satisfy |P| <= 1, got {P}")
    if abs(P) == 1:
        return atom.a / 2.0
    num, z = _weighted_sums(atom, beta_from_polarization(P))
    return num / (2.0 * z)


def noise_ratio(atom: AtomSpec, P: float) -> float:
    """Polarized-to-unpolarized spin-noise ratio."""
    return variance_per_atom(atom, P) / variance_per_atom(atom, 0.0)


def noise_statistics(atom: AtomSpec, P: float) -> NoiseStatistics:
    beta = beta_from_polarization(P)
    return NoiseStatistics(
        variance_per_atom=variance_per_atom(atom, P),
        partition_function=partition_function(atom, beta),
        ratio_to_unpolarized=noise_ratio(atom, P),
    )


class VarianceTable:
    """Tabulated ``variance_per_atom`` on a uniform grid in P for fast lookup.

    Used by the trajectory integrator when the polarization drifts during a
    record.  Linear interpolation; the error is below 1e-6 relative for the
    default 4097-point grid.
    """

    def __init__(self, atom: AtomSpec, n: int = 4097):
        self.atom = atom
        self.grid = np.linspace(-1.0, 1.0, n)
        self.values = np.array([variance_per_atom(atom, p) for p in self.grid])

    def __call__(self, P):
        return np.interp(P, self.grid, self.values)
